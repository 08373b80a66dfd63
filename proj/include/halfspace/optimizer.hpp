#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "halfspace/core.hpp"
#include "halfspace/distributions.hpp"
#include "halfspace/losses.hpp"
#include "halfspace/noise.hpp"

namespace halfspace {

/// A source of labeled examples: `next` writes x into the buffer and returns
/// its label, or nullopt once the source is exhausted.
template <typename S>
concept ExampleStream = requires(S s, std::span<double> x) {
    { s.next(x) } -> std::convertible_to<std::optional<Label>>;
};

/// Replays a finite dataset in order.
class DatasetStream {
public:
    explicit DatasetStream(const LabeledDataset& ds) : ds_(&ds) {}

    std::optional<Label> next(std::span<double> x) {
        if (pos_ >= ds_->size())
            return std::nullopt;
        auto src = ds_->x(pos_);
        std::copy(src.begin(), src.end(), x.begin());
        return ds_->y[pos_++];
    }

private:
    const LabeledDataset* ds_;
    std::size_t pos_ = 0;
};

/// Endless i.i.d. stream: sample x, label it by w*, corrupt with the noise model.
class GeneratedStream {
public:
    GeneratedStream(const DistributionSpec& spec, const NoiseModel& noise, std::uint64_t seed)
        : sampler_(spec, derive_seed(seed, 0)), noise_(noise), flip_rng_(derive_seed(seed, 1)) {
        if (spec.dim != noise.dim())
            throw InvalidInput("GeneratedStream: dimension mismatch");
    }

    std::optional<Label> next(std::span<double> x) {
        sampler_.draw(x);
        ++drawn_;
        return apply_noise(noise_, x, label_clean(noise_.w_star(), x), flip_rng_);
    }

    std::uint64_t drawn() const noexcept { return drawn_; }

private:
    Sampler sampler_;
    NoiseModel noise_;
    std::mt19937_64 flip_rng_;
    std::uint64_t drawn_ = 0;
};

struct PsgdConfig {
    std::size_t T = 1000;
    double beta = 1e-3;
    double sigma = 0.1;
    std::uint64_t seed = 0;
    std::size_t dim = 2;
    // Keep every k-th iterate (and always the last). 1 keeps the full list.
    std::size_t record_stride = 1;

    void validate() const {
        if (T < 1)
            throw InvalidInput("PsgdConfig: T must be >= 1");
        if (!(beta >= 0.0) || !std::isfinite(beta))
            throw InvalidInput("PsgdConfig: beta must be a finite non-negative number");
        if (!(sigma > 0.0))
            throw InvalidInput("PsgdConfig: sigma must be positive");
        if (dim < 2)
            throw InvalidInput("PsgdConfig: dimension must be >= 2");
        if (record_stride < 1)
            throw InvalidInput("PsgdConfig: record_stride must be >= 1");
    }
};

/// Default step size β = σ²·ρ².
inline double default_step_size(double sigma, double rho) { return sigma * sigma * rho * rho; }

struct IterateList {
    std::vector<UnitVector> iterates;
    std::vector<std::size_t> steps;  // 1-based step index of each kept iterate

    std::size_t size() const noexcept { return iterates.size(); }
    bool empty() const noexcept { return iterates.empty(); }
    const UnitVector& back() const { return iterates.back(); }
};

/// Projected SGD on the unit sphere starting at e1: one fresh example per
/// step, v = w − β·∇(sample loss), w = v/‖v‖.
template <ExampleStream Stream>
IterateList psgd_run(Stream& stream, const PsgdConfig& config) {
    config.validate();
    const SigmoidSurrogate loss(config.sigma);
    const std::size_t d = config.dim;
    Vector w(d, 0.0), x(d), g(d);
    w[0] = 1.0;

    IterateList out;
    const std::size_t keep = config.T / config.record_stride + 1;
    out.iterates.reserve(keep);
    out.steps.reserve(keep);

    for (std::size_t i = 1; i <= config.T; ++i) {
        const auto y = stream.next(x);
        if (!y)
            throw InvalidInput("psgd_run: example stream exhausted after " + std::to_string(i - 1) + " of " +
                               std::to_string(config.T) + " steps");
        surrogate_grad_sample(w, x, *y, loss, g);
        for (std::size_t j = 0; j < d; ++j)
            w[j] -= config.beta * g[j];
        normalize_in_place(w);
        if (i % config.record_stride == 0 || i == config.T) {
            out.iterates.push_back(UnitVector::from(w));
            out.steps.push_back(i);
        }
    }
    return out;
}

/// ceil(c_T · d · ln(1/δ) / (σ⁴ ρ⁴)), saturating at UINT64_MAX.
inline std::uint64_t iteration_budget(std::size_t d, double sigma, double rho, double delta, double c_T = 1.0) {
    if (!(sigma > 0.0 && rho > 0.0 && delta > 0.0 && delta < 1.0 && c_T > 0.0) || d == 0)
        throw InvalidInput("iteration_budget: arguments must be positive with delta < 1");
    const double t = c_T * static_cast<double>(d) * std::log(1.0 / delta) / std::pow(sigma * rho, 4.0);
    if (!(t < 1.8e19))
        return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(std::ceil(t));
}

/// Mean sample gradient of the sigmoid surrogate over the first `batch`
/// examples of `data`.
inline Vector batch_gradient(std::span<const double> w, const LabeledDataset& data, double sigma, std::size_t batch) {
    if (batch < 1 || data.size() == 0)
        throw InvalidInput("batch_gradient: empty batch");
    batch = std::min(batch, data.size());
    const SigmoidSurrogate loss(sigma);
    Vector acc(w.size(), 0.0), g(w.size());
    for (std::size_t i = 0; i < batch; ++i) {
        surrogate_grad_sample(w, data.x(i), data.y[i], loss, g);
        for (std::size_t j = 0; j < g.size(); ++j)
            acc[j] += g[j];
    }
    for (double& v : acc)
        v /= static_cast<double>(batch);
    return acc;
}

struct MinGradResult {
    UnitVector w;
    std::size_t index = 0;
    double grad_norm = 0.0;
};

/// Iterate with the smallest batch-estimated gradient norm (first on ties).
inline MinGradResult min_grad_iterate(const IterateList& iterates, const LabeledDataset& data, double sigma,
                                      std::size_t batch) {
    if (iterates.empty())
        throw InvalidInput("min_grad_iterate: empty iterate list");
    if (batch < 1)
        throw InvalidInput("min_grad_iterate: batch must be >= 1");
    std::size_t best = 0;
    double best_norm = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < iterates.size(); ++k) {
        const double n = norm2(batch_gradient(iterates.iterates[k].coords(), data, sigma, batch));
        if (n < best_norm) {
            best_norm = n;
            best = k;
        }
    }
    return {iterates.iterates[best], best, best_norm};
}

/// CSV trajectory dump: step, grad_norm_estimate, angle_to_wstar. Every
/// `every`-th kept iterate is written, plus the last.
inline void write_trajectory(std::ostream& os, const IterateList& iterates, const LabeledDataset& batch_data,
                             double sigma, std::size_t batch, const UnitVector& w_star, std::size_t every = 1) {
    os << "step,grad_norm_estimate,angle_to_wstar\n";
    char buf[96];
    for (std::size_t k = 0; k < iterates.size(); ++k) {
        if (k % every != 0 && k + 1 != iterates.size())
            continue;
        const auto& w = iterates.iterates[k];
        const double gn = norm2(batch_gradient(w.coords(), batch_data, sigma, batch));
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g\n", iterates.steps[k], gn,
                      angle_between(w, w_star).radians());
        os << buf;
    }
}

} // namespace halfspace
