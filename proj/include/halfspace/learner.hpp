#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "halfspace/core.hpp"
#include "halfspace/distributions.hpp"
#include "halfspace/noise.hpp"
#include "halfspace/optimizer.hpp"

namespace halfspace {

/// R⁴/(2¹⁵U³) for the family's well-behaved constants.
inline double sigma_grid_constant(const DistributionSpec& spec, double R = 1.0) {
    const auto p = well_behaved_params(spec, R);
    return std::pow(p.R, 4) / (32768.0 * std::pow(p.U, 3));
}

struct LearnerConfig {
    double epsilon = 0.01;
    double delta = 0.01;
    double C_const = 0.1;             // upper end of the σ grid
    std::vector<double> grid;         // empty: sigma_grid(epsilon, C_const)
    std::size_t holdout_size = 0;     // 0: default_holdout_size
    double holdout_factor = 2.0;      // c_H
    std::size_t eval_size = 200000;   // fresh sample for the reported error
    std::uint64_t T_cap = 200000;
    double rho = 0.5;                 // β = σ²ρ² and the target gradient norm of the budget
    double c_T = 1.0;
    std::size_t candidates_per_sigma = 100;
    bool timing = false;              // wall_ms is 0 unless set

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw InvalidInput("LearnerConfig: epsilon must lie in (0, 1)");
        if (!(delta > 0.0 && delta < 1.0))
            throw InvalidInput("LearnerConfig: delta must lie in (0, 1)");
        if (!(C_const > 0.0) || !std::isfinite(C_const))
            throw InvalidInput("LearnerConfig: C_const must be positive");
        for (double s : grid)
            if (!(s > 0.0) || s > C_const * (1.0 + 1e-12))
                throw InvalidInput("LearnerConfig: grid values must lie in (0, C_const]");
        if (!(rho > 0.0) || !(c_T > 0.0) || !(holdout_factor > 0.0))
            throw InvalidInput("LearnerConfig: rho, c_T and holdout_factor must be positive");
        if (T_cap < 1 || candidates_per_sigma < 1 || eval_size < 1)
            throw InvalidInput("LearnerConfig: T_cap, candidates_per_sigma and eval_size must be >= 1");
    }
};

/// {Cε, (C+1)ε, ..., C}: step ε from C·ε, closing at C. A single point when ε ≥ C.
inline std::vector<double> sigma_grid(double epsilon, double C) {
    if (!(epsilon > 0.0) || !(C > 0.0))
        throw InvalidInput("sigma_grid: epsilon and C must be positive");
    if (epsilon >= C)
        return {C};
    std::vector<double> grid;
    const double slack = 1e-9 * epsilon;
    for (std::size_t k = 0;; ++k) {
        const double s = C * epsilon + double(k) * epsilon;
        if (s > C - slack)
            break;
        grid.push_back(s);
    }
    grid.push_back(C);
    return grid;
}

/// max(10⁴, ceil(ln(d/(εδ))/ε²)·c_H).
inline std::size_t default_holdout_size(std::size_t d, double epsilon, double delta, double c_H = 2.0) {
    const double n = std::ceil(std::log(double(d) / (epsilon * delta)) / (epsilon * epsilon)) * c_H;
    return std::max<std::size_t>(10000, static_cast<std::size_t>(n));
}

struct CandidateList {
    double sigma = 0.0;
    double beta = 0.0;
    std::uint64_t T = 0;
    std::vector<UnitVector> vectors;
};

/// PSGD at one σ with T = min(T_cap, iteration_budget) steps; iterates are
/// kept on a stride so that about `candidates_per_sigma` remain.
template <ExampleStream Stream>
CandidateList run_for_sigma(double sigma, Stream& stream, const LearnerConfig& config, std::size_t dim) {
    config.validate();
    CandidateList out;
    out.sigma = sigma;
    out.beta = default_step_size(sigma, config.rho);
    out.T = std::min<std::uint64_t>(config.T_cap, iteration_budget(dim, sigma, config.rho, config.delta, config.c_T));
    PsgdConfig pc;
    pc.T = static_cast<std::size_t>(out.T);
    pc.beta = out.beta;
    pc.sigma = sigma;
    pc.dim = dim;
    pc.record_stride = std::max<std::size_t>(1, pc.T / config.candidates_per_sigma);
    out.vectors = psgd_run(stream, pc).iterates;
    return out;
}

/// Fraction of examples with halfspace_label(w, x) ≠ y.
inline double estimate_err01(std::span<const double> w, const LabeledDataset& data) {
    if (data.size() == 0)
        throw InvalidInput("estimate_err01: empty dataset");
    if (w.size() != data.dim())
        throw InvalidInput("estimate_err01: dimension mismatch");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        wrong += halfspace_label(w, data.x(i)) != data.y[i];
    return double(wrong) / double(data.size());
}

inline double estimate_err01(const UnitVector& w, const LabeledDataset& data) { return estimate_err01(w.coords(), data); }

/// Zero-one error counts of planar halfspaces against a fixed dataset. The
/// point x is misclassified by w exactly when the angle of y·x lies in the
/// open half circle centred opposite w, so counting is a binary search over
/// sorted angles. Points within 1e-9 rad of either end of that half circle
/// are rechecked with halfspace_label; the counts equal the direct ones.
class PlanarErrorIndex {
public:
    explicit PlanarErrorIndex(const LabeledDataset& data) : data_(&data) {
        if (data.dim() != 2)
            throw InvalidInput("PlanarErrorIndex: 2-dimensional data required");
        keys_.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto x = data.x(i);
            if (x[0] == 0.0 && x[1] == 0.0) {
                origin_wrong_ += data.y[i] != 1;
                continue;
            }
            double a = std::atan2(data.y[i] * x[1], data.y[i] * x[0]);
            if (a < 0.0)
                a += kTwoPi;
            keys_.push_back({a, static_cast<std::uint32_t>(i)});
        }
        std::sort(keys_.begin(), keys_.end());
    }

    std::size_t size() const noexcept { return data_->size(); }

    std::size_t errors(std::span<const double> w) const {
        if (w.size() != 2)
            throw InvalidInput("PlanarErrorIndex::errors: w must be 2-dimensional");
        constexpr double band = 1e-9;
        double lo = std::atan2(-w[1], -w[0]) - std::numbers::pi / 2.0;
        if (lo < 0.0)
            lo += kTwoPi;
        const double hi = lo + std::numbers::pi;
        std::size_t n = origin_wrong_ + count(lo + band, hi - band);
        for (double edge : {lo, hi})
            visit(edge - band, edge + band, [&](std::uint32_t i) { n += halfspace_label(w, data_->x(i)) != data_->y[i]; });
        return n;
    }

    double err01(std::span<const double> w) const { return double(errors(w)) / double(size()); }

private:
    static constexpr double kTwoPi = 2.0 * std::numbers::pi;

    using Key = std::pair<double, std::uint32_t>;

    std::size_t rank(double a) const {
        return std::lower_bound(keys_.begin(), keys_.end(), Key{a, 0}) - keys_.begin();
    }

    // Keys in [a, b) with b − a < 2π, taken modulo 2π.
    template <typename F>
    void for_ranges(double a, double b, F&& f) const {
        const double width = b - a;
        a = std::fmod(a, kTwoPi);
        if (a < 0.0)
            a += kTwoPi;
        b = a + width;
        if (b <= kTwoPi) {
            f(rank(a), rank(b));
        } else {
            f(rank(a), keys_.size());
            f(std::size_t{0}, rank(b - kTwoPi));
        }
    }

    std::size_t count(double a, double b) const {
        std::size_t n = 0;
        for_ranges(a, b, [&](std::size_t i, std::size_t j) { n += j - i; });
        return n;
    }

    template <typename F>
    void visit(double a, double b, F&& f) const {
        for_ranges(a, b, [&](std::size_t i, std::size_t j) {
            for (; i < j; ++i)
                f(keys_[i].second);
        });
    }

    const LabeledDataset* data_;
    std::vector<Key> keys_;
    std::size_t origin_wrong_ = 0;
};

struct Selection {
    UnitVector w = UnitVector::basis(2, 0);
    std::size_t list_index = 0;
    std::size_t vector_index = 0;
    double holdout_err = 0.0;
    std::vector<double> best_per_list;  // lowest holdout error within each list
};

/// Exact argmin of holdout zero-one error; ties go to the first occurrence in
/// list order, then iterate order.
inline Selection select_best(const std::vector<CandidateList>& candidates, const LabeledDataset& holdout) {
    Selection sel;
    bool found = false;
    std::optional<PlanarErrorIndex> planar;
    if (holdout.dim() == 2 && holdout.size() > 0)
        planar.emplace(holdout);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double list_best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < candidates[i].vectors.size(); ++j) {
            const auto& v = candidates[i].vectors[j];
            const double e = planar ? planar->err01(v.coords()) : estimate_err01(v, holdout);
            list_best = std::min(list_best, e);
            if (!found || e < sel.holdout_err) {
                found = true;
                sel.w = candidates[i].vectors[j];
                sel.list_index = i;
                sel.vector_index = j;
                sel.holdout_err = e;
            }
        }
        sel.best_per_list.push_back(list_best);
    }
    if (!found)
        throw InvalidInput("select_best: no candidates");
    return sel;
}

struct SigmaDiagnostic {
    double sigma = 0.0;
    double beta = 0.0;
    std::uint64_t T = 0;
    std::size_t candidates = 0;
    double best_holdout_err = 0.0;
};

struct TrialReport {
    std::uint64_t seed = 0;
    std::string family;
    std::size_t d = 0;
    double opt_target = 0.0;
    double measured_noise_rate = 0.0;  // error of w* on the evaluation sample
    double sigma_best = 0.0;
    double err01 = 0.0;
    double angle_to_wstar = 0.0;
    std::uint64_t T_used = 0;          // steps at sigma_best
    std::uint64_t samples_total = 0;   // training examples over the whole grid
    double beta = 0.0;
    double wall_ms = 0.0;
    double C_const = 0.0;
    bool beyond_C = false;             // opt_target ≥ C_const: O(opt) holds for any halfspace
    Vector w;
    std::vector<SigmaDiagnostic> per_sigma;
};

/// Grid of σ values → PSGD candidate list per σ on its own stream → holdout
/// selection → error of the chosen vector on a fresh evaluation sample.
/// Streams are seeded derive_seed(seed, 16 + k), the holdout
/// derive_seed(seed, 1), the evaluation sample derive_seed(seed, 2).
inline TrialReport learn(const DistributionSpec& spec, const NoiseModel& noise, const LearnerConfig& config,
                         std::uint64_t seed, double opt_target = 0.0) {
    config.validate();
    if (spec.dim != noise.dim())
        throw InvalidInput("learn: dimension mismatch between distribution and noise model");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t d = spec.dim;
    const auto grid = config.grid.empty() ? sigma_grid(config.epsilon, config.C_const) : config.grid;

    TrialReport rep;
    rep.seed = seed;
    rep.family = spec.name();
    rep.d = d;
    rep.opt_target = opt_target;
    rep.C_const = config.C_const;
    rep.beyond_C = opt_target >= config.C_const;

    std::vector<CandidateList> lists;
    lists.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        GeneratedStream stream(spec, noise, derive_seed(seed, 16 + k));
        lists.push_back(run_for_sigma(grid[k], stream, config, d));
        rep.samples_total += stream.drawn();
    }

    const std::size_t n_hold = config.holdout_size ? config.holdout_size
                                                   : default_holdout_size(d, config.epsilon, config.delta, config.holdout_factor);
    const auto holdout = make_dataset(spec, noise, n_hold, derive_seed(seed, 1));
    const auto sel = select_best(lists, holdout);

    const auto eval = make_dataset(spec, noise, config.eval_size, derive_seed(seed, 2));
    const auto& best = lists[sel.list_index];
    rep.sigma_best = best.sigma;
    rep.beta = best.beta;
    rep.T_used = best.T;
    rep.err01 = estimate_err01(sel.w, eval);
    rep.measured_noise_rate = eval.flip_rate();
    rep.angle_to_wstar = angle_between(sel.w, noise.w_star()).radians();
    rep.w = sel.w.vec();
    for (std::size_t k = 0; k < lists.size(); ++k)
        rep.per_sigma.push_back({lists[k].sigma, lists[k].beta, lists[k].T, lists[k].vectors.size(), sel.best_per_list[k]});
    if (config.timing)
        rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

} // namespace halfspace
