#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace halfspace {

/// Thrown when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot reach its requested accuracy.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw InvalidInput("dot: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()) + ")");
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(acc);
}

inline double norm2(std::span<const double> v) {
    // scaled to avoid overflow for very large coordinates
    double scale = 0.0;
    for (double x : v)
        scale = std::max(scale, std::abs(x));
    if (scale == 0.0 || !std::isfinite(scale))
        return scale;
    long double acc = 0.0L;
    for (double x : v) {
        const long double t = x / scale;
        acc += t * t;
    }
    return scale * static_cast<double>(std::sqrt(acc));
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Scales `v` to unit norm in place; returns the norm it had.
inline double normalize_in_place(std::span<double> v) {
    const double n = norm2(v);
    if (!(n > 0.0) || !std::isfinite(n))
        throw InvalidInput("normalize: vector must be nonzero and finite");
    for (double& x : v)
        x /= n;
    const double n2 = norm2(v);
    for (double& x : v)
        x /= n2;
    return n;
}

/// A direction in R^d with unit Euclidean norm, d >= 2.
///
/// The only ways to obtain one are normalization of a nonzero finite vector
/// or the canonical basis vectors, so every instance satisfies |‖w‖ − 1| <= 1e-12.
class UnitVector {
public:
    /// Normalizes `v`. Throws InvalidInput for zero, non-finite or 1-dimensional input.
    static UnitVector from(std::span<const double> v) {
        if (v.size() < 2)
            throw InvalidInput("UnitVector: dimension must be >= 2");
        if (!all_finite(v))
            throw InvalidInput("UnitVector: non-finite coordinate");
        if (!(norm2(v) > 0.0))
            throw InvalidInput("UnitVector: zero vector has no direction");
        Vector c(v.begin(), v.end());
        normalize_in_place(c);
        return UnitVector(std::move(c));
    }

    static UnitVector basis(std::size_t dim, std::size_t axis) {
        if (dim < 2 || axis >= dim)
            throw InvalidInput("UnitVector::basis: bad dimension/axis");
        Vector c(dim, 0.0);
        c[axis] = 1.0;
        return UnitVector(std::move(c));
    }

    std::size_t dim() const noexcept { return coords_.size(); }
    double operator[](std::size_t i) const noexcept { return coords_[i]; }
    std::span<const double> coords() const noexcept { return coords_; }
    const Vector& vec() const noexcept { return coords_; }

    UnitVector operator-() const {
        Vector c = coords_;
        for (double& x : c)
            x = -x;
        return UnitVector(std::move(c));
    }

    friend bool operator==(const UnitVector&, const UnitVector&) = default;

private:
    explicit UnitVector(Vector c) : coords_(std::move(c)) {}
    Vector coords_;
};

/// Angle in radians, always in [0, π].
class Angle {
public:
    constexpr Angle() = default;
    explicit Angle(double radians) : radians_(radians) {
        if (!(radians >= 0.0 && radians <= std::numbers::pi))
            throw InvalidInput("Angle: value outside [0, pi]");
    }
    constexpr double radians() const noexcept { return radians_; }
    friend constexpr auto operator<=>(const Angle&, const Angle&) = default;

private:
    double radians_ = 0.0;
};

/// Label in {-1, +1}.
using Label = int;

struct LabeledExample {
    Vector x;
    Label y = 1;
};

inline void validate(const LabeledExample& ex) {
    if (ex.y != 1 && ex.y != -1)
        throw InvalidInput("LabeledExample: label must be -1 or +1");
    if (!all_finite(ex.x))
        throw InvalidInput("LabeledExample: non-finite coordinate");
}

inline UnitVector project_to_sphere(std::span<const double> v) { return UnitVector::from(v); }

inline Angle angle_between(const UnitVector& u, const UnitVector& v) {
    const double c = std::clamp(dot(u.coords(), v.coords()), -1.0, 1.0);
    return Angle(std::acos(c));
}

/// sign(<w, x>) with sign(0) = +1.
inline Label halfspace_label(std::span<const double> w, std::span<const double> x) {
    return dot(w, x) >= 0.0 ? 1 : -1;
}

inline Label halfspace_label(const UnitVector& w, std::span<const double> x) {
    return halfspace_label(w.coords(), x);
}

/// Disagreement probability of two homogeneous halfspaces under any radially
/// symmetric marginal.
inline double disagreement(const UnitVector& u, const UnitVector& v) {
    return angle_between(u, v).radians() / std::numbers::pi;
}

} // namespace halfspace

namespace halfspace {

/// SplitMix64 finalizer; used to derive independent stream seeds from one
/// trial seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace halfspace
