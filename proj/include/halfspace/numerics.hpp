#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "halfspace/core.hpp"

namespace halfspace::numerics {

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on P_n from the Chebyshev initial guesses.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n) : nodes(n), weights(n) {
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16)
                    break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

inline const GaussLegendre& gauss_legendre_10() {
    static const GaussLegendre rule(10);
    return rule;
}

// Integrands may return double or std::array<double, N>.
template <typename T>
struct ValueOps;

template <>
struct ValueOps<double> {
    static double zero() { return 0.0; }
    static void axpy(double& acc, double w, double v) { acc += w * v; }
    static double max_abs(double v) { return std::abs(v); }
    static double diff(double a, double b) { return std::abs(a - b); }
    static bool finite(double v) { return std::isfinite(v); }
};

template <std::size_t N>
struct ValueOps<std::array<double, N>> {
    using A = std::array<double, N>;
    static A zero() { return A{}; }
    static void axpy(A& acc, double w, const A& v) {
        for (std::size_t i = 0; i < N; ++i)
            acc[i] += w * v[i];
    }
    static double max_abs(const A& v) {
        double m = 0.0;
        for (double x : v)
            m = std::max(m, std::abs(x));
        return m;
    }
    static double diff(const A& a, const A& b) {
        double m = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    }
    static bool finite(const A& v) {
        for (double x : v)
            if (!std::isfinite(x))
                return false;
        return true;
    }
};

template <typename T>
struct QuadResult {
    T value{};
    double error = 0.0;  // |I(2n) - I(n)| at the accepted panel count
    int panels = 0;
};

enum class Spacing { linear, logarithmic };

struct PanelRule {
    double tol_abs = 1e-12;
    double tol_rel = 1e-12;
    int initial_panels = 2;
    int max_panels = 1 << 14;
};

/// Composite 10-point Gauss–Legendre on [a, b] with the panel count doubled
/// until two successive estimates agree within max(tol_abs, tol_rel·|I|).
/// Logarithmic spacing integrates in t = ln r and needs 0 < a.
template <typename F>
auto integrate(F&& f, double a, double b, const PanelRule& rule = {},
               Spacing spacing = Spacing::linear)
    -> QuadResult<std::decay_t<decltype(f(a))>> {
    using T = std::decay_t<decltype(f(a))>;
    using Ops = ValueOps<T>;
    QuadResult<T> out;
    if (a == b) {
        out.value = Ops::zero();
        return out;
    }
    if (spacing == Spacing::logarithmic && !(a > 0.0 && b > a))
        throw InvalidInput("integrate: logarithmic spacing needs 0 < a < b");

    const auto& gl = gauss_legendre_10();
    const double lo = spacing == Spacing::logarithmic ? std::log(a) : a;
    const double hi = spacing == Spacing::logarithmic ? std::log(b) : b;

    auto composite = [&](int panels) {
        T acc = Ops::zero();
        const double h = (hi - lo) / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = lo + (p + 0.5) * h;
            for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                const double t = mid + 0.5 * h * gl.nodes[k];
                double w = 0.5 * h * gl.weights[k];
                double x = t;
                if (spacing == Spacing::logarithmic) {
                    x = std::exp(t);
                    w *= x;
                }
                Ops::axpy(acc, w, f(x));
            }
        }
        return acc;
    };

    int panels = std::max(1, rule.initial_panels);
    T prev = composite(panels);
    while (panels < rule.max_panels) {
        panels *= 2;
        T cur = composite(panels);
        if (!Ops::finite(cur))
            throw NumericalFailure("integrate: non-finite integrand");
        const double err = Ops::diff(cur, prev);
        if (err <= std::max(rule.tol_abs, rule.tol_rel * Ops::max_abs(cur))) {
            out.value = cur;
            out.error = err;
            out.panels = panels;
            return out;
        }
        prev = std::move(cur);
    }
    throw NumericalFailure("integrate: no convergence within " + std::to_string(rule.max_panels) +
                           " panels on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
}

/// Brent's method on a sign-changing bracket [a, b].
template <typename F>
double find_root(F&& f, double a, double b, double xtol = 1e-12, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0)
        return a;
    if (fb == 0.0)
        return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw NumericalFailure("find_root: endpoints do not bracket a root");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || fb == 0.0)
            return b;
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0)
                q = -q;
            else
                p = -p;
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
    }
    throw NumericalFailure("find_root: iteration limit reached");
}

/// Expands `hi` geometrically until f changes sign on [lo, hi].
template <typename F>
double bracket_upper(F&& f, double lo, double hi, int max_doublings = 200) {
    const bool sign_lo = f(lo) > 0.0;
    for (int i = 0; i < max_doublings; ++i, hi *= 2.0)
        if ((f(hi) > 0.0) != sign_lo)
            return hi;
    throw NumericalFailure("bracket_upper: no sign change found");
}

} // namespace halfspace::numerics
