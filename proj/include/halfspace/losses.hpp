#pragma once

#include <cmath>
#include <span>
#include <string>

#include "halfspace/core.hpp"

// Two objectives live here and they normalize differently:
//   sigmoid surrogate  L_σ(w) = E[S_σ(−y·<w,x>/‖w‖)]   (scale invariant in w)
//   convex surrogate   C(w)   = E[ℓ(−y·<w,x>)]          (NOT normalized)

namespace halfspace {

/// Logistic link with growth rate 1/σ, evaluated without overflow.
inline double sigmoid(double t, double sigma) {
    const double z = t / sigma;
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// S'_σ(t) = S_σ(t)(1 − S_σ(t))/σ.
inline double sigmoid_derivative(double t, double sigma) {
    const double s = sigmoid(t, sigma);
    return s * (1.0 - s) / sigma;
}

struct SigmoidSurrogate {
    double sigma = 0.1;

    explicit SigmoidSurrogate(double sigma_) : sigma(sigma_) {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw InvalidInput("SigmoidSurrogate: sigma must be positive");
    }

    double operator()(double t) const { return sigmoid(t, sigma); }
    double derivative(double t) const { return sigmoid_derivative(t, sigma); }
};

inline double checked_norm(std::span<const double> w, const char* who) {
    const double n = norm2(w);
    if (!(n > 0.0) || !std::isfinite(n))
        throw InvalidInput(std::string(who) + ": w must be nonzero and finite");
    return n;
}

inline double surrogate_loss_sample(std::span<const double> w, std::span<const double> x, Label y,
                                    const SigmoidSurrogate& s) {
    const double n = checked_norm(w, "surrogate_loss_sample");
    return s(-y * dot(w, x) / n);
}

inline double surrogate_loss_sample(std::span<const double> w, const LabeledExample& ex,
                                    const SigmoidSurrogate& s) {
    return surrogate_loss_sample(w, ex.x, ex.y, s);
}

/// Gradient of S_σ(−y·h(w,x)) with h(w,x) = <w,x>/‖w‖:
///   −S'_σ(−y h)·y·(x/‖w‖ − <w,x> w/‖w‖³).
/// Writes into `out`; for unit w the result is orthogonal to w.
inline void surrogate_grad_sample(std::span<const double> w, std::span<const double> x, Label y,
                                  const SigmoidSurrogate& s, std::span<double> out) {
    if (out.size() != w.size())
        throw InvalidInput("surrogate_grad_sample: output dimension mismatch");
    const double n = checked_norm(w, "surrogate_grad_sample");
    const double wx = dot(w, x);
    const double h = wx / n;
    const double c = -s.derivative(-y * h) * y;
    const double inv_n = 1.0 / n;
    const double proj = wx * inv_n * inv_n * inv_n;
    for (std::size_t j = 0; j < w.size(); ++j)
        out[j] = c * (x[j] * inv_n - proj * w[j]);
}

inline Vector surrogate_grad_sample(std::span<const double> w, const LabeledExample& ex,
                                    const SigmoidSurrogate& s) {
    Vector g(w.size());
    surrogate_grad_sample(w, ex.x, ex.y, s, g);
    return g;
}

enum class ConvexKind { logistic, hinge, squared_hinge };

inline std::string to_string(ConvexKind k) {
    switch (k) {
    case ConvexKind::logistic: return "logistic";
    case ConvexKind::hinge: return "hinge";
    case ConvexKind::squared_hinge: return "squared_hinge";
    }
    return "?";
}

inline ConvexKind parse_convex_kind(const std::string& s) {
    if (s == "logistic")
        return ConvexKind::logistic;
    if (s == "hinge")
        return ConvexKind::hinge;
    if (s == "squared_hinge")
        return ConvexKind::squared_hinge;
    throw InvalidInput("unknown convex loss '" + s + "'");
}

/// Convex, non-decreasing, non-constant ℓ(t):
///   logistic       ln(1 + e^t)
///   hinge          max(0, 1 + t)
///   squared_hinge  max(0, 1 + t)²
/// At the hinge kink t = −1 the right derivative is used.
struct ConvexSurrogate {
    ConvexKind kind = ConvexKind::logistic;

    double value(double t) const {
        switch (kind) {
        case ConvexKind::logistic: return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
        case ConvexKind::hinge: return std::max(0.0, 1.0 + t);
        case ConvexKind::squared_hinge: {
            const double m = std::max(0.0, 1.0 + t);
            return m * m;
        }
        }
        return 0.0;
    }

    double derivative(double t) const {
        switch (kind) {
        case ConvexKind::logistic: return sigmoid(t, 1.0);
        case ConvexKind::hinge: return t >= -1.0 ? 1.0 : 0.0;
        case ConvexKind::squared_hinge: return 2.0 * std::max(0.0, 1.0 + t);
        }
        return 0.0;
    }

    /// Arguments where ℓ' is discontinuous or ℓ'' jumps.
    bool has_kink() const { return kind != ConvexKind::logistic; }
    static constexpr double kink = -1.0;
};

inline double convex_loss_sample(std::span<const double> w, std::span<const double> x, Label y,
                                 const ConvexSurrogate& loss) {
    return loss.value(-y * dot(x, w));
}

inline double convex_loss_sample(std::span<const double> w, const LabeledExample& ex, const ConvexSurrogate& loss) {
    return convex_loss_sample(w, ex.x, ex.y, loss);
}

/// −y·ℓ'(−y<x,w>)·x, accumulated as out += scale·gradient.
inline void convex_grad_accumulate(std::span<const double> w, std::span<const double> x, Label y,
                                   const ConvexSurrogate& loss, double scale, std::span<double> out) {
    const double c = -y * loss.derivative(-y * dot(x, w)) * scale;
    if (c == 0.0)
        return;
    for (std::size_t j = 0; j < x.size(); ++j)
        out[j] += c * x[j];
}

inline Vector convex_grad_sample(std::span<const double> w, const LabeledExample& ex, const ConvexSurrogate& loss) {
    Vector g(w.size(), 0.0);
    convex_grad_accumulate(w, ex.x, ex.y, loss, 1.0, g);
    return g;
}

} // namespace halfspace
