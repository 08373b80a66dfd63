#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "halfspace/core.hpp"
#include "halfspace/losses.hpp"
#include "halfspace/noise.hpp"

namespace halfspace {

/// Mean convex loss (1/n)·Σ ℓ(−y<w,x>) over a batch, with its gradient.
struct BatchObjective {
    double value = 0.0;
    Vector grad;
};

inline BatchObjective convex_batch_objective(std::span<const double> w, const LabeledDataset& data,
                                             const ConvexSurrogate& loss) {
    if (data.size() == 0)
        throw InvalidInput("convex_batch_objective: empty dataset");
    if (w.size() != data.dim())
        throw InvalidInput("convex_batch_objective: dimension mismatch");
    const std::size_t d = data.dim();
    const double inv_n = 1.0 / double(data.size());
    BatchObjective out;
    out.grad.assign(d, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.x(i);
        double m = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            m += w[j] * x[j];
        const double t = -data.y[i] * m;
        total += loss.value(t);
        const double c = -data.y[i] * loss.derivative(t);
        if (c != 0.0)
            for (std::size_t j = 0; j < d; ++j)
                out.grad[j] += c * x[j];
    }
    out.value = total * inv_n;
    for (double& g : out.grad)
        g *= inv_n;
    if (!std::isfinite(out.value) || !all_finite(out.grad))
        throw NumericalFailure("convex_batch_objective: non-finite value");
    return out;
}

/// Smallest norm over the hinge subdifferential enlarged by `band`: examples
/// with |t + 1| ≤ band may take any derivative in [0, 1], the rest use ℓ'.
/// Solved by cyclic coordinate descent on the box-constrained weights. For
/// losses with a continuous derivative this is the gradient norm.
inline double kink_stationarity(std::span<const double> w, const LabeledDataset& data, const ConvexSurrogate& loss,
                                double band) {
    if (loss.kind != ConvexKind::hinge)
        return norm2(convex_batch_objective(w, data, loss).grad);
    const std::size_t d = data.dim();
    const double inv_n = 1.0 / double(data.size());
    Vector v(d, 0.0);
    std::vector<Vector> on_kink;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.x(i);
        const double t = -data.y[i] * dot(w, x);
        const double c = -data.y[i] * inv_n;
        if (std::abs(t - ConvexSurrogate::kink) <= band) {
            Vector col(d);
            for (std::size_t j = 0; j < d; ++j)
                col[j] = c * x[j];
            on_kink.push_back(std::move(col));
        } else if (loss.derivative(t) != 0.0) {
            for (std::size_t j = 0; j < d; ++j)
                v[j] += c * loss.derivative(t) * x[j];
        }
    }
    std::vector<double> lambda(on_kink.size(), 0.0);
    for (int sweep = 0; sweep < 10000; ++sweep) {
        double change = 0.0;
        for (std::size_t k = 0; k < on_kink.size(); ++k) {
            const auto& col = on_kink[k];
            const double cc = dot(col, col);
            if (!(cc > 0.0))
                continue;
            const double next = std::clamp(lambda[k] - dot(col, v) / cc, 0.0, 1.0);
            const double step = next - lambda[k];
            if (step != 0.0) {
                for (std::size_t j = 0; j < d; ++j)
                    v[j] += step * col[j];
                lambda[k] = next;
                change = std::max(change, std::abs(step));
            }
        }
        if (change < 1e-13)
            break;
    }
    return norm2(v);
}

struct ConvexFitConfig {
    double grad_tol = 1e-6;
    std::size_t max_iter = 200000;
    std::size_t memory = 10;    // window of the non-monotone line search
    double kink_band = 1e-7;    // hinge: margins within this distance of the kink count as on it
};

struct ConvexFit {
    Vector w;
    double objective = 0.0;
    double grad_norm = 0.0;     // norm of the right-derivative gradient
    double stationarity = 0.0;  // see kink_stationarity; equals grad_norm for smooth losses
    std::size_t iterations = 0;
    bool converged = false;
    bool stalled = false;  // line search found no decrease (a kink of a piecewise-linear objective)
};

/// Full-batch gradient descent from w = 0 with Barzilai–Borwein step lengths
/// and a non-monotone Armijo backtracking safeguard, stopped when the
/// stationarity measure (the gradient norm, or kink_stationarity for hinge)
/// reaches grad_tol. Stops early with `stalled` set when the
/// line search cannot decrease the objective.
inline ConvexFit fit_convex(const LabeledDataset& data, const ConvexSurrogate& loss, const ConvexFitConfig& config = {}) {
    const std::size_t d = data.dim();
    Vector w(d, 0.0), trial(d);
    auto cur = convex_batch_objective(w, data, loss);
    std::deque<double> recent{cur.value};
    double gnorm = norm2(cur.grad);
    double alpha = gnorm > 0.0 ? 1.0 / gnorm : 1.0;
    auto stationarity = [&] {
        return loss.kind == ConvexKind::hinge ? kink_stationarity(w, data, loss, config.kink_band) : gnorm;
    };
    double stat = stationarity();

    ConvexFit fit;
    for (; fit.iterations < config.max_iter && stat > config.grad_tol; ++fit.iterations) {
        const double ref = *std::max_element(recent.begin(), recent.end());
        double lambda = 1.0;
        bool accepted = false;
        BatchObjective next;
        for (int k = 0; k <= 60 && !accepted; ++k) {
            for (std::size_t j = 0; j < d; ++j)
                trial[j] = w[j] - lambda * alpha * cur.grad[j];
            next = convex_batch_objective(trial, data, loss);
            accepted = next.value <= ref - 1e-4 * lambda * alpha * gnorm * gnorm;
            if (!accepted)
                lambda *= 0.5;
        }
        if (!accepted) {
            fit.stalled = true;
            break;
        }
        double ss = 0.0, sy = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double s = trial[j] - w[j], yv = next.grad[j] - cur.grad[j];
            ss += s * s;
            sy += s * yv;
        }
        alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(1e10, 10.0 * alpha);
        w = trial;
        cur = std::move(next);
        gnorm = norm2(cur.grad);
        stat = stationarity();
        recent.push_back(cur.value);
        if (recent.size() > config.memory)
            recent.pop_front();
    }
    fit.w = w;
    fit.objective = cur.value;
    fit.grad_norm = gnorm;
    fit.stationarity = stat;
    fit.converged = stat <= config.grad_tol;
    return fit;
}

} // namespace halfspace
