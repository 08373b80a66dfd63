#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "halfspace/core.hpp"
#include "halfspace/distributions.hpp"
#include "halfspace/losses.hpp"
#include "halfspace/noise.hpp"
#include "halfspace/numerics.hpp"

namespace halfspace {

using Vec2 = std::array<double, 2>;

/// Largest θ < π/8 with 24·θ·E‖x‖ < E[1{‖x‖ >= Z}‖x‖], less a 1e-9 margin.
inline Angle admissible_theta(const DistributionSpec& spec, double Z) {
    constexpr double margin = 1e-9;
    const double bound = truncated_first_moment(spec, Z) / (24.0 * mean_norm(spec));
    return Angle(std::max(0.0, std::min(std::numbers::pi / 8.0, bound) - margin));
}

/// admissible_theta at the radius whose tail mass is `opt`.
inline Angle predicted_floor(const DistributionSpec& spec, double opt) {
    if (!(opt > 0.0 && opt < 0.25))
        throw InvalidInput("predicted_floor: opt must lie in (0, 1/4)");
    return admissible_theta(spec, radius_for_tail_mass(spec, opt));
}

/// far_flip with Pr[S] = opt and theta2 = 2·admissible_theta.
inline NoiseModel far_flip_at_tail_mass(const DistributionSpec& spec, const UnitVector& w_star, double opt) {
    const double Z = radius_for_tail_mass(spec, opt);
    const double theta2 = std::min(2.0 * admissible_theta(spec, Z).radians(), std::numbers::pi / 4.0);
    return NoiseModel::far_flip(w_star, theta2, Z);
}

/// far_flip whose flip probability (the error of w*) equals `rate`, with
/// theta2 = 2·admissible_theta(Z) tied to the chosen Z.
inline NoiseModel far_flip_at_noise_rate(const DistributionSpec& spec, const UnitVector& w_star, double rate) {
    if (!(rate > 0.0 && rate < 0.5))
        throw InvalidInput("far_flip_at_noise_rate: rate must lie in (0, 1/2)");
    auto theta2_at = [&](double Z) {
        return std::min(2.0 * admissible_theta(spec, Z).radians(), std::numbers::pi / 4.0);
    };
    auto gap = [&](double Z) {
        return radial_tail_mass(spec, Z) * (std::numbers::pi + 2.0 * theta2_at(Z)) / (2.0 * std::numbers::pi) - rate;
    };
    const double hi = numerics::bracket_upper(gap, 1e-12, 1.0);
    const double Z = numerics::find_root(gap, 1e-12, hi, 1e-13);
    return NoiseModel::far_flip(w_star, theta2_at(Z), Z);
}

struct QuadratureSpec {
    int radial_panels = 4;   // initial counts; doubled until successive estimates agree
    int angular_panels = 2;
    double r_max = 0.0;      // 0 selects the radius from the closed-form tails
    double tol = 1e-8;       // relative to gradient_scale
    int max_panels = 1 << 12;
};

/// Population gradient of the convex objective with its split over
/// S^c = {‖x‖ < Z} and S = {‖x‖ >= Z}.
struct PopulationGradient {
    Vec2 grad{};
    Vec2 inside{};   // I_{S^c}
    Vec2 outside{};  // I_S
    double error = 0.0;
    double r_max = 0.0;
};

/// Bound on ‖∇C(w)‖ used to turn the relative tolerance into an absolute
/// one: E‖x‖ for losses with |ℓ'| ≤ 1, E[2‖x‖(1 + ρ‖x‖)] for squared hinge.
inline double gradient_scale(const DistributionSpec& spec, const ConvexSurrogate& loss, double rho) {
    if (loss.kind == ConvexKind::squared_hinge)
        return 2.0 * (mean_norm(spec) + rho * radial_second_moment(spec));
    return mean_norm(spec);
}

namespace detail {

// Radius beyond which the neglected gradient mass is below tol/10. ℓ' is
// bounded by 1 for logistic and hinge; squared hinge grows like 2(1 + ρr).
inline double truncation_radius(const DistributionSpec& spec, const ConvexSurrogate& loss, double rho, double tol) {
    auto tail_bound = [&](double R) {
        if (loss.kind == ConvexKind::squared_hinge)
            return 2.0 * (rho * truncated_second_moment(spec, R) + truncated_first_moment(spec, R));
        return truncated_first_moment(spec, R);
    };
    const double target = tol / 10.0;
    double R = 1.0;
    while (tail_bound(R) > target) {
        R *= 2.0;
        if (R > 1e300)
            throw NumericalFailure("truncation_radius: tail does not decay");
    }
    auto f = [&](double r) { return std::log(tail_bound(r)) - std::log(target); };
    if (f(R / 2.0) <= 0.0)
        return R;
    return numerics::find_root(f, R / 2.0, R, 1e-9 * R);
}

inline std::vector<double> angular_breakpoints(std::span<const Vec2> normals, std::span<const double> extra = {}) {
    std::vector<double> bp{0.0, 2.0 * std::numbers::pi};
    for (double p : extra) {
        p = std::fmod(p, 2.0 * std::numbers::pi);
        bp.push_back(p < 0.0 ? p + 2.0 * std::numbers::pi : p);
    }
    for (const auto& v : normals) {
        if (v[0] == 0.0 && v[1] == 0.0)
            continue;
        const double base = std::atan2(v[1], v[0]);
        for (double off : {-std::numbers::pi / 2.0, std::numbers::pi / 2.0}) {
            double p = std::fmod(base + off, 2.0 * std::numbers::pi);
            if (p < 0.0)
                p += 2.0 * std::numbers::pi;
            bp.push_back(p);
        }
    }
    std::sort(bp.begin(), bp.end());
    std::vector<double> out;
    for (double p : bp)
        if (out.empty() || p - out.back() > 1e-14)
            out.push_back(p);
    if (2.0 * std::numbers::pi - out.back() <= 1e-14)
        out.back() = 2.0 * std::numbers::pi;
    return out;
}

// Labels a direction receives inside (‖x‖ < Z) and outside (‖x‖ >= Z).
struct DirectionLabels {
    Label inside = 1;
    Label outside = 1;
};

inline DirectionLabels direction_labels(const NoiseModel& noise, const Vec2& u) {
    DirectionLabels l;
    l.inside = label_clean(noise.w_star(), u);
    l.outside = l.inside;
    if (noise.kind() == NoiseKind::far_flip) {
        const double far = 2.0 * noise.Z() + 1.0;
        const Vec2 x{far * u[0], far * u[1]};
        const auto m = region_membership(noise, x);
        if (m.in_S && !m.in_C)
            l.outside = -l.inside;
    }
    return l;
}

// Integrates f over [lo, hi], splitting at the interior breakpoints and using
// logarithmic panels on long segments away from the origin.
template <typename F>
numerics::QuadResult<double> integrate_radial(F&& f, double lo, double hi, std::vector<double> cuts,
                                              const numerics::PanelRule& rule) {
    numerics::QuadResult<double> total;
    if (!(hi > lo))
        return total;
    cuts.push_back(lo);
    cuts.push_back(hi);
    if (lo < 1.0 && hi > 2.0)
        cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    double prev = lo;
    for (double c : cuts) {
        if (c <= prev || c > hi)
            continue;
        const auto spacing = (prev > 0.0 && c / prev > 2.0) ? numerics::Spacing::logarithmic : numerics::Spacing::linear;
        const auto r = numerics::integrate(f, prev, c, rule, spacing);
        total.value += r.value;
        total.error += r.error;
        total.panels += r.panels;
        prev = c;
    }
    return total;
}

inline void check_population_inputs(std::span<const double> w, const DistributionSpec& spec, const NoiseModel& noise) {
    if (spec.dim != 2 || noise.dim() != 2 || w.size() != 2)
        throw InvalidInput("population gradient: 2-dimensional inputs required");
    if (!(norm2(w) > 0.0))
        throw InvalidInput("population gradient: w must be nonzero");
}

} // namespace detail

namespace detail {

// Panel edges on [lo, hi]: [lo, 1] and [1, hi] are split separately when the
// band straddles r = 1, each with `per_segment` panels, uniform in r on
// segments touching the origin and uniform in ln r elsewhere.
inline std::vector<double> radial_edges(double lo, double hi, int per_segment) {
    std::vector<double> cuts{lo};
    if (lo < 1.0 && hi > 2.0)
        cuts.push_back(1.0);
    cuts.push_back(hi);
    std::vector<double> edges{lo};
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        const bool log_spaced = a > 0.0 && b / a > 2.0;
        for (int k = 1; k <= per_segment; ++k) {
            const double f = double(k) / per_segment;
            edges.push_back(k == per_segment ? b : log_spaced ? a * std::pow(b / a, f) : a + (b - a) * f);
        }
    }
    return edges;
}

// 10-point Gauss–Legendre on one panel, in ln r when the panel is away from 0.
template <typename F>
double gl_panel(F&& f, double a, double b) {
    const auto& gl = numerics::gauss_legendre_10();
    double acc = 0.0;
    if (a > 0.0) {
        const double la = std::log(a), lb = std::log(b);
        const double mid = 0.5 * (la + lb), half = 0.5 * (lb - la);
        for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
            const double r = std::exp(mid + half * gl.nodes[k]);
            acc += half * gl.weights[k] * r * f(r);
        }
    } else {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t k = 0; k < gl.nodes.size(); ++k)
            acc += half * gl.weights[k] * f(mid + half * gl.nodes[k]);
    }
    return acc;
}

// Fixed composite rule over `edges`, with any panel containing a kink split there.
template <typename F>
double composite_with_kinks(F&& f, const std::vector<double>& edges, std::vector<double> kinks) {
    std::sort(kinks.begin(), kinks.end());
    double acc = 0.0;
    auto k = kinks.begin();
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        double a = edges[i];
        const double b = edges[i + 1];
        while (k != kinks.end() && *k <= a)
            ++k;
        for (; k != kinks.end() && *k < b; ++k) {
            acc += gl_panel(f, a, *k);
            a = *k;
        }
        acc += gl_panel(f, a, b);
    }
    return acc;
}

} // namespace detail

/// ∇C(w) = E[−y·x·ℓ'(−y<x,w>)] by nested polar quadrature: an adaptive outer
/// rule over each angular sector on which the observed labels are constant,
/// and a composite radial rule split at Z and at the loss kinks. The radial
/// panel count doubles until two successive gradients agree within tol;
/// failure to converge throws.
inline PopulationGradient convex_population_grad(const ConvexSurrogate& loss, std::span<const double> w,
                                                 const DistributionSpec& spec, const NoiseModel& noise,
                                                 const QuadratureSpec& q = {}) {
    detail::check_population_inputs(w, spec, noise);
    const double rho = norm2(w);
    const double tol = q.tol * gradient_scale(spec, loss, rho);
    const double r_max = q.r_max > 0.0 ? q.r_max : detail::truncation_radius(spec, loss, rho, tol);
    const double Z = noise.kind() == NoiseKind::far_flip ? std::min(noise.Z(), r_max) : r_max;
    const double eta = noise.kind() == NoiseKind::random_flip ? noise.eta() : 0.0;

    const Vec2 wv{w[0], w[1]};
    std::vector<Vec2> normals{{noise.w_star()[0], noise.w_star()[1]}, wv};
    if (noise.kind() == NoiseKind::far_flip) {
        normals.push_back({noise.w_tilde()[0], noise.w_tilde()[1]});
        normals.push_back({noise.w_tilde_perp()[0], noise.w_tilde_perp()[1]});
    }
    // Directions where the kink radius 1/|<u,w>| meets Z.
    std::vector<double> kink_angles;
    if (loss.has_kink() && rho * Z > 1.0) {
        const double phi_w = std::atan2(wv[1], wv[0]);
        const double off = std::acos(1.0 / (rho * Z));
        for (double base : {phi_w, phi_w + std::numbers::pi})
            for (double sgn : {-1.0, 1.0})
                kink_angles.push_back(base + sgn * off);
    }
    const auto bp = detail::angular_breakpoints(normals, kink_angles);
    const numerics::PanelRule angular_rule{tol / 4.0, 1e-14, q.angular_panels, q.max_panels};

    auto evaluate = [&](int per_segment) {
        const auto inner_edges = detail::radial_edges(0.0, Z, per_segment);
        const auto outer_edges = detail::radial_edges(Z, r_max, per_segment);

        // J(φ) for one radial band and label: ∫ −y r² γ(r) ℓ'(−y r <u,w>) dr.
        auto band = [&](const std::vector<double>& edges, double uw, Label y) {
            if (edges.front() >= edges.back())
                return 0.0;
            auto g = [&](double r, Label yy) {
                return -yy * r * r * radial_density(spec, r) * loss.derivative(-yy * r * uw);
            };
            auto f = [&](double r) { return eta > 0.0 ? (1.0 - eta) * g(r, y) + eta * g(r, -y) : g(r, y); };
            std::vector<double> kinks;
            if (loss.has_kink() && uw != 0.0)
                for (Label yy : {y, Label(-y)}) {
                    const double rk = -ConvexSurrogate::kink / (yy * uw);
                    if (rk > edges.front() && rk < edges.back())
                        kinks.push_back(rk);
                }
            return detail::composite_with_kinks(f, edges, std::move(kinks));
        };

        PopulationGradient out;
        out.r_max = r_max;
        for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
            const double a = bp[k], b = bp[k + 1];
            const double mid = 0.5 * (a + b);
            const auto labels = detail::direction_labels(noise, {std::cos(mid), std::sin(mid)});
            auto integrand = [&](double phi) {
                const double c = std::cos(phi), s = std::sin(phi);
                const double uw = c * wv[0] + s * wv[1];
                const double jin = band(inner_edges, uw, labels.inside);
                const double jout = band(outer_edges, uw, labels.outside);
                return std::array<double, 4>{jin * c, jin * s, jout * c, jout * s};
            };
            const auto r = numerics::integrate(integrand, a, b, angular_rule);
            out.inside[0] += r.value[0];
            out.inside[1] += r.value[1];
            out.outside[0] += r.value[2];
            out.outside[1] += r.value[3];
            out.error += r.error;
        }
        out.grad = {out.inside[0] + out.outside[0], out.inside[1] + out.outside[1]};
        return out;
    };

    int per_segment = std::max(1, q.radial_panels);
    PopulationGradient prev = evaluate(per_segment);
    while (per_segment < q.max_panels) {
        per_segment *= 2;
        PopulationGradient cur = evaluate(per_segment);
        const double radial_err = std::max({std::abs(cur.inside[0] - prev.inside[0]), std::abs(cur.inside[1] - prev.inside[1]),
                                            std::abs(cur.outside[0] - prev.outside[0]),
                                            std::abs(cur.outside[1] - prev.outside[1])});
        if (radial_err <= tol / 2.0) {
            cur.error += radial_err + tol / 10.0;
            return cur;
        }
        prev = cur;
    }
    throw NumericalFailure("convex_population_grad: radial rule did not converge");
}

/// The tangential component <∇C(w), t>, t = (w2, −w1)/‖w‖, through the
/// angular antiderivative: on a region {r ∈ [r1, r2], φ' ∈ [φ1, φ2]} with
/// constant label y (φ' measured so that w points along φ' = π/2)
///   (1/ρ) ∫ r γ(r) (ℓ(−yρ r sin φ2) − ℓ(−yρ r sin φ1)) dr.
/// Only radial integrals remain, which makes this an independent check on
/// convex_population_grad.
inline double tangential_gradient_polar(const ConvexSurrogate& loss, std::span<const double> w,
                                        const DistributionSpec& spec, const NoiseModel& noise,
                                        const QuadratureSpec& q = {}) {
    detail::check_population_inputs(w, spec, noise);
    const double rho = norm2(w);
    const double tol = q.tol * gradient_scale(spec, loss, rho);
    const double r_max = q.r_max > 0.0 ? q.r_max : detail::truncation_radius(spec, loss, rho, tol);
    const double Z = noise.kind() == NoiseKind::far_flip ? noise.Z() : r_max;
    const double eta = noise.kind() == NoiseKind::random_flip ? noise.eta() : 0.0;
    const double phi_w = std::atan2(w[1], w[0]);

    std::vector<Vec2> normals{{noise.w_star()[0], noise.w_star()[1]}, {w[0], w[1]}};
    if (noise.kind() == NoiseKind::far_flip) {
        normals.push_back({noise.w_tilde()[0], noise.w_tilde()[1]});
        normals.push_back({noise.w_tilde_perp()[0], noise.w_tilde_perp()[1]});
    }
    const auto bp = detail::angular_breakpoints(normals);
    const numerics::PanelRule rule{tol * 1e-2, 1e-13, q.radial_panels, q.max_panels};

    auto region = [&](double pa, double pb, Label y, double lo, double hi) {
        if (!(hi > lo))
            return 0.0;
        const double sa = std::sin(pa - phi_w + std::numbers::pi / 2.0);
        const double sb = std::sin(pb - phi_w + std::numbers::pi / 2.0);
        auto g = [&](double r, Label yy) {
            return r * radial_density(spec, r) * (loss.value(-yy * rho * r * sb) - loss.value(-yy * rho * r * sa)) / rho;
        };
        auto f = [&](double r) { return eta > 0.0 ? (1.0 - eta) * g(r, y) + eta * g(r, -y) : g(r, y); };
        std::vector<double> cuts;
        if (loss.has_kink())
            for (double sn : {sa, sb})
                for (Label yy : {y, Label(-y)})
                    if (sn != 0.0) {
                        const double rk = -ConvexSurrogate::kink / (yy * rho * sn);
                        if (rk > lo && rk < hi)
                            cuts.push_back(rk);
                    }
        return detail::integrate_radial(f, lo, hi, cuts, rule).value;
    };

    double total = 0.0;
    for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
        const double a = bp[k], b = bp[k + 1], mid = 0.5 * (a + b);
        const auto labels = detail::direction_labels(noise, {std::cos(mid), std::sin(mid)});
        total += region(a, b, labels.inside, 0.0, std::min(Z, r_max));
        total += region(a, b, labels.outside, Z, r_max);
    }
    return total;
}

struct ConeScanReport {
    Angle theta_max;
    std::size_t grid_points = 0;
    double min_grad_norm = 0.0;
    UnitVector argmin_w = UnitVector::basis(2, 1);
    double argmin_angle = 0.0;  // signed rotation from w*, counterclockwise positive
    double min_tangential = 0.0;  // min |<∇C(w), t>| over the grid, t the unit tangent at w
    double max_error = 0.0;       // largest quadrature error estimate over the grid
    double Z = 0.0;

    /// Nonzero gradient certified with a 10x margin over the quadrature error.
    bool certified() const { return min_grad_norm > 10.0 * max_error; }
};

/// Evaluates ‖∇C(w)‖ for unit w on a uniform grid of rotations α ∈ [−θ, θ]
/// of w* = e2, under far_flip(w*, theta2 = 2θ, Z). Positive α rotates toward
/// w~, negative α away from it, covering both cases of the cone.
inline ConeScanReport scan_cone(const ConvexSurrogate& loss, const DistributionSpec& spec, double Z, Angle theta,
                                std::size_t grid_points, const QuadratureSpec& q = {}) {
    if (grid_points < 1)
        throw InvalidInput("scan_cone: grid_points must be >= 1");
    if (theta.radians() > admissible_theta(spec, Z).radians() + 1e-15)
        throw InvalidInput("scan_cone: theta exceeds admissible_theta(spec, Z)");
    if (!(theta.radians() > 0.0))
        throw InvalidInput("scan_cone: theta must be positive");
    const auto w_star = UnitVector::basis(2, 1);
    const auto noise = NoiseModel::far_flip(w_star, std::min(2.0 * theta.radians(), std::numbers::pi / 4.0), Z);

    ConeScanReport rep;
    rep.theta_max = theta;
    rep.grid_points = grid_points;
    rep.Z = Z;
    rep.min_grad_norm = std::numeric_limits<double>::infinity();
    rep.min_tangential = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid_points; ++k) {
        const double alpha = grid_points == 1 ? 0.0
                                              : -theta.radians() + 2.0 * theta.radians() * double(k) / double(grid_points - 1);
        const Vec2 w{-std::sin(alpha), std::cos(alpha)};
        const auto g = convex_population_grad(loss, w, spec, noise, q);
        const double n = std::hypot(g.grad[0], g.grad[1]);
        rep.max_error = std::max(rep.max_error, g.error);
        rep.min_tangential = std::min(rep.min_tangential, std::abs(g.grad[0] * w[1] - g.grad[1] * w[0]));
        if (n < rep.min_grad_norm) {
            rep.min_grad_norm = n;
            rep.argmin_angle = alpha;
            rep.argmin_w = UnitVector::from(w);
        }
    }
    return rep;
}

} // namespace halfspace
