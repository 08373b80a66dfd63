#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "halfspace/core.hpp"
#include "halfspace/distributions.hpp"

namespace halfspace {

enum class NoiseKind { clean, far_flip, random_flip };

inline std::string to_string(NoiseKind k) {
    switch (k) {
    case NoiseKind::clean: return "clean";
    case NoiseKind::far_flip: return "far_flip";
    case NoiseKind::random_flip: return "random_flip";
    }
    return "?";
}

inline NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "clean")
        return NoiseKind::clean;
    if (s == "far_flip")
        return NoiseKind::far_flip;
    if (s == "random_flip")
        return NoiseKind::random_flip;
    throw InvalidInput("unknown noise kind '" + s + "'");
}

inline Label label_clean(const UnitVector& w_star, std::span<const double> x) { return halfspace_label(w_star, x); }

/// Label-generation rule.
///
/// far_flip works in the plane spanned by w* and a fixed reference direction u
/// orthogonal to w*. In 2D, u is w* rotated clockwise by π/2, so (u, w*) is a
/// positively oriented frame; in higher dimension u is e1 (or e2 when w* is
/// close to ±e1) with its w* component removed. Inside that plane
///   w~     = w* rotated counterclockwise by theta2 = cos·w* − sin·u
///   w~perp = cos·u + sin·w*        (so <w*, w~perp> = sin(theta2) >= 0)
///   C = { <w*,x><w~,x> >= 0  and  <w*,x><w~perp,x> <= 0 }
///   S = { ‖P x‖ >= Z },  P the orthogonal projection onto the plane
/// and labels are flipped exactly on S \ C. Inside S the observed labels are
/// then the halfspace −sign(<w~perp, x>).
class NoiseModel {
public:
    static NoiseModel clean(UnitVector w_star) { return NoiseModel(NoiseKind::clean, std::move(w_star), 0.0, 0.0, 0.0); }

    static NoiseModel far_flip(UnitVector w_star, double theta2, double Z) {
        if (!(theta2 > 0.0 && theta2 <= std::numbers::pi / 4.0))
            throw InvalidInput("far_flip: theta2 must lie in (0, pi/4]");
        if (!(Z > 0.0))
            throw InvalidInput("far_flip: Z must be positive");
        return NoiseModel(NoiseKind::far_flip, std::move(w_star), theta2, Z, 0.0);
    }

    static NoiseModel random_flip(UnitVector w_star, double eta) {
        if (!(eta >= 0.0 && eta < 0.5))
            throw InvalidInput("random_flip: eta must lie in [0, 1/2)");
        return NoiseModel(NoiseKind::random_flip, std::move(w_star), 0.0, 0.0, eta);
    }

    NoiseKind kind() const noexcept { return kind_; }
    const UnitVector& w_star() const noexcept { return w_star_; }
    double theta2() const noexcept { return theta2_; }
    double Z() const noexcept { return Z_; }
    double eta() const noexcept { return eta_; }
    std::size_t dim() const noexcept { return w_star_.dim(); }

    const Vector& reference() const noexcept { return u_; }
    const Vector& w_tilde() const noexcept { return w_tilde_; }
    const Vector& w_tilde_perp() const noexcept { return w_tilde_perp_; }

private:
    NoiseModel(NoiseKind kind, UnitVector w_star, double theta2, double Z, double eta)
        : kind_(kind), w_star_(std::move(w_star)), theta2_(theta2), Z_(Z), eta_(eta) {
        const std::size_t d = w_star_.dim();
        u_.assign(d, 0.0);
        if (d == 2) {
            u_[0] = w_star_[1];
            u_[1] = -w_star_[0];
        } else {
            const std::size_t axis = std::abs(w_star_[0]) > 0.9 ? 1 : 0;
            u_[axis] = 1.0;
            const double c = w_star_[axis];
            for (std::size_t i = 0; i < d; ++i)
                u_[i] -= c * w_star_[i];
            const double n = norm2(u_);
            for (double& v : u_)
                v /= n;
        }
        const double cs = std::cos(theta2_), sn = std::sin(theta2_);
        w_tilde_.resize(d);
        w_tilde_perp_.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            w_tilde_[i] = cs * w_star_[i] - sn * u_[i];
            w_tilde_perp_[i] = cs * u_[i] + sn * w_star_[i];
        }
    }

    NoiseKind kind_;
    UnitVector w_star_;
    double theta2_;
    double Z_;
    double eta_;
    Vector u_, w_tilde_, w_tilde_perp_;
};

struct RegionMembership {
    bool in_C = false;
    bool in_S = false;
};

inline RegionMembership region_membership(const NoiseModel& model, std::span<const double> x) {
    if (model.kind() != NoiseKind::far_flip)
        throw InvalidInput("region_membership: needs a far_flip model");
    if (x.size() != model.dim())
        throw InvalidInput("region_membership: dimension mismatch");
    const double a = dot(model.w_star().coords(), x);
    const double c = dot(model.reference(), x);
    const double t = dot(model.w_tilde(), x);
    const double tp = dot(model.w_tilde_perp(), x);
    RegionMembership m;
    m.in_C = a * t >= 0.0 && a * tp <= 0.0;
    m.in_S = std::hypot(a, c) >= model.Z();
    return m;
}

/// Observed label for a point whose clean label is `clean_y`. `rng` is used
/// only by random_flip.
template <typename Rng>
Label apply_noise(const NoiseModel& model, std::span<const double> x, Label clean_y, Rng& rng) {
    switch (model.kind()) {
    case NoiseKind::clean: return clean_y;
    case NoiseKind::far_flip: {
        const auto m = region_membership(model, x);
        return (m.in_S && !m.in_C) ? -clean_y : clean_y;
    }
    case NoiseKind::random_flip: {
        std::bernoulli_distribution flip(model.eta());
        return flip(rng) ? -clean_y : clean_y;
    }
    }
    return clean_y;
}

inline Label apply_noise(const NoiseModel& model, std::span<const double> x, Label clean_y) {
    if (model.kind() == NoiseKind::random_flip)
        throw InvalidInput("apply_noise: random_flip needs a seeded generator");
    std::mt19937_64 unused(0);
    return apply_noise(model, x, clean_y, unused);
}

/// Analytic flip probability under a radially symmetric marginal:
/// far_flip flips the angular fraction (π + 2·theta2)/(2π) of S.
inline double expected_flip_rate(const DistributionSpec& spec, const NoiseModel& model) {
    switch (model.kind()) {
    case NoiseKind::clean: return 0.0;
    case NoiseKind::random_flip: return model.eta();
    case NoiseKind::far_flip:
        return radial_tail_mass(spec, model.Z()) * (std::numbers::pi + 2.0 * model.theta2()) / (2.0 * std::numbers::pi);
    }
    return 0.0;
}

/// Examples plus the record of which labels were corrupted.
struct LabeledDataset {
    Points points;
    std::vector<Label> y;
    std::vector<std::uint8_t> flipped;

    std::size_t size() const noexcept { return y.size(); }
    std::size_t dim() const noexcept { return points.dim; }
    std::span<const double> x(std::size_t i) const { return points[i]; }
    LabeledExample example(std::size_t i) const {
        auto xi = points[i];
        return {Vector(xi.begin(), xi.end()), y[i]};
    }

    double flip_rate() const {
        if (y.empty())
            return 0.0;
        std::size_t n = 0;
        for (auto f : flipped)
            n += f;
        return static_cast<double>(n) / static_cast<double>(y.size());
    }
};

/// Samples n points, labels them by w*, then corrupts the labels.
inline LabeledDataset make_dataset(const DistributionSpec& spec, const NoiseModel& model, std::size_t n,
                                   std::uint64_t seed) {
    if (spec.dim != model.dim())
        throw InvalidInput("make_dataset: distribution and noise dimensions differ");
    LabeledDataset ds;
    ds.points = sample(spec, n, derive_seed(seed, 0));
    ds.y.resize(n);
    ds.flipped.resize(n);
    std::mt19937_64 flip_rng(derive_seed(seed, 1));
    for (std::size_t i = 0; i < n; ++i) {
        const Label clean = label_clean(model.w_star(), ds.points[i]);
        const Label obs = apply_noise(model, ds.points[i], clean, flip_rng);
        ds.y[i] = obs;
        ds.flipped[i] = obs != clean;
    }
    return ds;
}

/// CSV with columns x_1..x_d, y, flipped.
inline void write_csv(std::ostream& os, const LabeledDataset& ds) {
    for (std::size_t j = 0; j < ds.dim(); ++j)
        os << "x_" << (j + 1) << ',';
    os << "y,flipped\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.x(i)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << buf << ',';
        }
        os << ds.y[i] << ',' << int(ds.flipped[i]) << '\n';
    }
}

} // namespace halfspace
