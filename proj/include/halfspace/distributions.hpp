#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "halfspace/core.hpp"
#include "halfspace/numerics.hpp"

namespace halfspace {

enum class Family { gaussian, logconcave, heavy_tailed };

inline std::string to_string(Family f) {
    switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::logconcave: return "logconcave";
    case Family::heavy_tailed: return "heavy_tailed";
    }
    return "?";
}

inline Family parse_family(const std::string& name) {
    if (name == "gaussian")
        return Family::gaussian;
    if (name == "logconcave" || name == "logconcave_radial_exponential")
        return Family::logconcave;
    if (name == "heavy_tailed" || name == "heavy")
        return Family::heavy_tailed;
    throw InvalidInput("unknown distribution family '" + name + "'");
}

/// Scale constants (a_s, b_s) of the heavy-tailed density b/(r/a + 1)^{2+s}.
struct HeavyTailParams {
    double a = 0.0;
    double b = 0.0;
};

namespace detail {

// ∫_0^∞ r^k (1 + r/a)^{-(2+s)} dr = a^{k+1} B(k+1, s+1-k), finite for k < s+1.
inline double heavy_radial_moment(double a, double s, int k) {
    const double beta = std::exp(std::lgamma(k + 1.0) + std::lgamma(s + 1.0 - k) - std::lgamma(s + 2.0));
    return std::pow(a, k + 1.0) * beta;
}

} // namespace detail

/// Finds (a_s, b_s) such that the 2D density integrates to one and E‖x‖² = 2.
/// b_s is eliminated through the normalization equation and a_s is located by
/// Brent's method on the second-moment equation.
inline HeavyTailParams solve_isotropic_params(double s) {
    if (!(s > 2.0) || !std::isfinite(s))
        throw InvalidInput("solve_isotropic_params: need s > 2 (second moment diverges otherwise)");
    auto b_of = [s](double a) { return 1.0 / (2.0 * std::numbers::pi * detail::heavy_radial_moment(a, s, 1)); };
    auto second_moment_gap = [&](double a) {
        return 2.0 * std::numbers::pi * b_of(a) * detail::heavy_radial_moment(a, s, 3) - 2.0;
    };
    double lo = 1e-3;
    while (second_moment_gap(lo) > 0.0)
        lo *= 0.5;
    const double hi = numerics::bracket_upper(second_moment_gap, lo, 1.0);
    const double a = numerics::find_root(second_moment_gap, lo, hi, 1e-15);
    return {a, b_of(a)};
}

/// One of the radially symmetric marginal families. The non-Gaussian families
/// exist only in two dimensions.
struct DistributionSpec {
    Family family = Family::gaussian;
    std::size_t dim = 2;
    double s = 0.0;           // heavy_tailed only
    HeavyTailParams heavy{};  // derived from s

    static DistributionSpec gaussian(std::size_t d) {
        if (d < 2)
            throw InvalidInput("DistributionSpec: dimension must be >= 2");
        return {Family::gaussian, d, 0.0, {}};
    }
    static DistributionSpec logconcave() { return {Family::logconcave, 2, 0.0, {}}; }
    static DistributionSpec heavy_tailed(double s) {
        return {Family::heavy_tailed, 2, s, solve_isotropic_params(s)};
    }
    static DistributionSpec make(Family f, std::size_t d, double s = 3.0) {
        switch (f) {
        case Family::gaussian: return gaussian(d);
        case Family::logconcave:
            if (d != 2)
                throw InvalidInput("logconcave family is defined only for d = 2");
            return logconcave();
        case Family::heavy_tailed:
            if (d != 2)
                throw InvalidInput("heavy_tailed family is defined only for d = 2");
            return heavy_tailed(s);
        }
        throw InvalidInput("unknown family");
    }

    std::string name() const {
        if (family == Family::heavy_tailed) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "heavy_tailed_s%g", s);
            return buf;
        }
        return to_string(family);
    }
};

inline constexpr double kLogConcaveRate = 3.4641016151377544;  // 2√3

// The radial functionals below describe the two-dimensional marginal. For the
// Gaussian family in d > 2 that is the law of any 2D orthogonal projection.

/// Density of the 2D marginal at radius r (the γ(r) of the polar formulas).
inline double radial_density(const DistributionSpec& spec, double r) {
    switch (spec.family) {
    case Family::gaussian: return std::exp(-0.5 * r * r) / (2.0 * std::numbers::pi);
    case Family::logconcave: return (6.0 / std::numbers::pi) * std::exp(-kLogConcaveRate * r);
    case Family::heavy_tailed: return spec.heavy.b * std::pow(r / spec.heavy.a + 1.0, -(2.0 + spec.s));
    }
    return 0.0;
}

inline double density2d(const DistributionSpec& spec, std::span<const double> x) {
    if (x.size() != 2 || spec.dim != 2)
        throw InvalidInput("density2d: needs a 2-dimensional distribution and point");
    return radial_density(spec, norm2(x));
}

/// Pr[‖x‖ >= Z].
inline double radial_tail_mass(const DistributionSpec& spec, double Z) {
    if (!(Z >= 0.0))
        throw InvalidInput("radial_tail_mass: Z must be >= 0");
    switch (spec.family) {
    case Family::gaussian: return std::exp(-0.5 * Z * Z);
    case Family::logconcave: {
        const double kz = kLogConcaveRate * Z;
        return (1.0 + kz) * std::exp(-kz);
    }
    case Family::heavy_tailed: {
        const double s = spec.s, u = 1.0 + Z / spec.heavy.a;
        return (1.0 + (s + 1.0) * Z / spec.heavy.a) * std::pow(u, -(s + 1.0));
    }
    }
    return 0.0;
}

inline double radial_cdf(const DistributionSpec& spec, double r) {
    if (spec.family == Family::gaussian)
        return -std::expm1(-0.5 * r * r);
    return 1.0 - radial_tail_mass(spec, r);
}

/// E[1{‖x‖ >= Z}·‖x‖] in closed form.
inline double truncated_first_moment(const DistributionSpec& spec, double Z) {
    if (!(Z >= 0.0))
        throw InvalidInput("truncated_first_moment: Z must be >= 0");
    switch (spec.family) {
    case Family::gaussian:
        return Z * std::exp(-0.5 * Z * Z) +
               std::sqrt(std::numbers::pi / 2.0) * std::erfc(Z / std::numbers::sqrt2);
    case Family::logconcave: {
        const double k = kLogConcaveRate;
        return std::exp(-k * Z) * (k * Z * Z + 2.0 * Z + 2.0 / k);
    }
    case Family::heavy_tailed: {
        const double s = spec.s, a = spec.heavy.a, u = 1.0 + Z / a;
        return a * s * (s + 1.0) *
               (std::pow(u, 1.0 - s) / (s - 1.0) - 2.0 * std::pow(u, -s) / s + std::pow(u, -s - 1.0) / (s + 1.0));
    }
    }
    return 0.0;
}

/// E[1{‖x‖ >= Z}·‖x‖²] in closed form.
inline double truncated_second_moment(const DistributionSpec& spec, double Z) {
    if (!(Z >= 0.0))
        throw InvalidInput("truncated_second_moment: Z must be >= 0");
    switch (spec.family) {
    case Family::gaussian: return (Z * Z + 2.0) * std::exp(-0.5 * Z * Z);
    case Family::logconcave: {
        const double k = kLogConcaveRate;
        return 12.0 * std::exp(-k * Z) *
               (Z * Z * Z / k + 3.0 * Z * Z / (k * k) + 6.0 * Z / (k * k * k) + 6.0 / (k * k * k * k));
    }
    case Family::heavy_tailed: {
        const double s = spec.s, a = spec.heavy.a, u = 1.0 + Z / a;
        return a * a * s * (s + 1.0) *
               (std::pow(u, 2.0 - s) / (s - 2.0) - 3.0 * std::pow(u, 1.0 - s) / (s - 1.0) +
                3.0 * std::pow(u, -s) / s - std::pow(u, -s - 1.0) / (s + 1.0));
    }
    }
    return 0.0;
}

inline double mean_norm(const DistributionSpec& spec) { return truncated_first_moment(spec, 0.0); }

/// E‖x‖² of the 2D marginal; per-coordinate variance is half of it.
inline double radial_second_moment(const DistributionSpec& spec) {
    switch (spec.family) {
    case Family::gaussian: return 2.0;
    case Family::logconcave: return 72.0 / std::pow(kLogConcaveRate, 4);
    case Family::heavy_tailed:
        return 2.0 * std::numbers::pi * spec.heavy.b * detail::heavy_radial_moment(spec.heavy.a, spec.s, 3);
    }
    return 0.0;
}

/// Radius Z with Pr[‖x‖ >= Z] = mass.
inline double radius_for_tail_mass(const DistributionSpec& spec, double mass) {
    if (!(mass > 0.0 && mass <= 1.0))
        throw InvalidInput("radius_for_tail_mass: mass must lie in (0, 1]");
    if (mass == 1.0)
        return 0.0;
    if (spec.family == Family::gaussian)
        return std::sqrt(-2.0 * std::log(mass));
    auto f = [&](double z) { return radial_tail_mass(spec, z) - mass; };
    const double hi = numerics::bracket_upper(f, 0.0, 1.0);
    return numerics::find_root(f, 0.0, hi, 1e-13);
}

/// Constants (U, R) of the well-behaved definition for a family's 2D marginal,
/// with the envelope t taken to be the density itself.
struct WellBehavedParams {
    double U = 0.0;
    double R = 0.0;
    std::string t_description;
};

/// U = max(1/min_{‖x‖<=R} γ, sup γ, ∫γ, ∫‖x‖γ). The densities are radially
/// decreasing, so the disk minimum sits at ‖x‖ = R and the supremum at 0.
inline WellBehavedParams well_behaved_params(const DistributionSpec& spec, double R = 1.0) {
    if (!(R > 0.0))
        throw InvalidInput("well_behaved_params: R must be positive");
    const double U = std::max({1.0 / radial_density(spec, R), radial_density(spec, 0.0), 1.0, mean_norm(spec)});
    return {U, R, "t(r) = gamma(r), the radial density of the 2D marginal"};
}

/// Flat row-major point set.
struct Points {
    std::size_t dim = 0;
    std::vector<double> data;

    std::size_t size() const noexcept { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const double> operator[](std::size_t i) const { return {data.data() + i * dim, dim}; }
    std::span<double> operator[](std::size_t i) { return {data.data() + i * dim, dim}; }
};

/// Seeded i.i.d. sampler. Not thread-safe; use one instance per thread.
class Sampler {
public:
    Sampler(DistributionSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {
        if (spec_.family != Family::gaussian && spec_.dim != 2)
            throw InvalidInput("Sampler: " + to_string(spec_.family) + " is defined only for d = 2");
    }

    const DistributionSpec& spec() const noexcept { return spec_; }

    void draw(std::span<double> out) {
        if (out.size() != spec_.dim)
            throw InvalidInput("Sampler::draw: output dimension mismatch");
        if (spec_.family == Family::gaussian) {
            for (double& v : out)
                v = normal_(rng_);
            return;
        }
        const double phi = 2.0 * std::numbers::pi * uniform_(rng_);
        const double r = radius_from_tail(1.0 - uniform_(rng_));  // tail in (0, 1]
        out[0] = r * std::cos(phi);
        out[1] = r * std::sin(phi);
    }

    Vector draw() {
        Vector v(spec_.dim);
        draw(v);
        return v;
    }

    Points draw_many(std::size_t n) {
        Points p{spec_.dim, std::vector<double>(n * spec_.dim)};
        for (std::size_t i = 0; i < n; ++i)
            draw(p[i]);
        return p;
    }

    std::mt19937_64& engine() noexcept { return rng_; }

private:
    // Inverse radial CDF by Brent's method on the closed-form tail.
    double radius_from_tail(double tail) const {
        if (tail >= 1.0)
            return 0.0;
        auto f = [&](double r) { return radial_tail_mass(spec_, r) - tail; };
        double hi = 1.0;
        while (f(hi) > 0.0)
            hi *= 4.0;
        return numerics::find_root(f, 0.0, hi, 1e-12);
    }

    DistributionSpec spec_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline Points sample(const DistributionSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n == 0)
        throw InvalidInput("sample: n must be >= 1");
    Sampler s(spec, seed);
    return s.draw_many(n);
}

} // namespace halfspace
