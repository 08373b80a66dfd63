#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "halfspace/lowerbound.hpp"
#include "halfspace/optimizer.hpp"

using namespace halfspace;

namespace {

constexpr double kPi = std::numbers::pi;

const ConvexSurrogate kLogistic{ConvexKind::logistic};
const ConvexSurrogate kHinge{ConvexKind::hinge};
const ConvexSurrogate kSquaredHinge{ConvexKind::squared_hinge};

Vec2 rotated_from_e2(double alpha) { return {-std::sin(alpha), std::cos(alpha)}; }

double tangential(const Vec2& g, const Vec2& w) { return (g[0] * w[1] - g[1] * w[0]) / std::hypot(w[0], w[1]); }

// Least-squares slope of y against x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Gradient contribution of the band r ∈ [lo, hi] by nested Gauss–Kronrod with
// labels from the angular-sector description of C around w* = e2.
Vec2 oracle_band_grad(const ConvexSurrogate& loss, const Vec2& w, const DistributionSpec& spec, double theta2,
                      double Z, double lo, double hi) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto label = [&](double r, double phi) {
        const int clean = std::sin(phi) >= 0.0 ? 1 : -1;
        const double psi = std::fmod(phi - kPi / 2 + 4 * kPi, 2 * kPi);
        const bool in_C = (psi >= theta2 && psi <= kPi / 2) || (psi >= kPi + theta2 && psi <= 1.5 * kPi);
        return (r >= Z && !in_C) ? -clean : clean;
    };
    std::vector<double> cuts{0.0, 2 * kPi};
    const double phi_w = std::atan2(w[1], w[0]);
    for (double b : {0.0, kPi, kPi / 2 + theta2, 1.5 * kPi + theta2, phi_w + kPi / 2, phi_w - kPi / 2})
        cuts.push_back(std::fmod(b + 4 * kPi, 2 * kPi));
    std::sort(cuts.begin(), cuts.end());
    Vec2 out{0.0, 0.0};
    for (int comp = 0; comp < 2; ++comp) {
        auto angular = [&](double phi) {
            const double c = std::cos(phi), s = std::sin(phi);
            auto radial = [&](double r) {
                const int y = label(r, phi);
                const double t = -y * r * (c * w[0] + s * w[1]);
                return -y * r * (comp == 0 ? c : s) * loss.derivative(t) * radial_density(spec, r) * r;
            };
            return GK::integrate(radial, lo, hi, 15, 1e-12);
        };
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            if (cuts[i + 1] > cuts[i])
                out[comp] += GK::integrate(angular, cuts[i], cuts[i + 1], 15, 1e-11);
    }
    return out;
}

} // namespace

TEST(AdmissibleTheta, FullMassCase) {
    for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::logconcave(), DistributionSpec::heavy_tailed(3.0)})
        EXPECT_NEAR(admissible_theta(spec, 0.0).radians(), 1.0 / 24.0 - 1e-9, 1e-15) << spec.name();
}

TEST(AdmissibleTheta, SatisfiesStrictInequality) {
    for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::logconcave(), DistributionSpec::heavy_tailed(3.0)})
        for (double Z : {0.5, 1.0, 3.0, 6.0}) {
            const double th = admissible_theta(spec, Z).radians();
            EXPECT_GT(th, 0.0);
            EXPECT_LT(th, kPi / 8);
            EXPECT_LT(24.0 * th * mean_norm(spec), truncated_first_moment(spec, Z));
        }
}

TEST(PredictedFloor, GaussianComposition) {
    const auto spec = DistributionSpec::gaussian(2);
    EXPECT_NEAR(predicted_floor(spec, 0.01).radians(),
                admissible_theta(spec, std::sqrt(2 * std::log(100.0))).radians(), 1e-12);
    EXPECT_THROW(predicted_floor(spec, 0.25), InvalidInput);
    EXPECT_THROW(predicted_floor(spec, 0.0), InvalidInput);
}

TEST(PredictedFloor, GrowthShapes) {
    const std::vector<double> opts{1e-2, 1e-3, 1e-4};
    std::vector<double> log_opt, g_lhs, g_rhs, l_rhs, l_lhs, h_lhs, h_ratio;
    for (double opt : opts) {
        const double L = std::log(1.0 / opt);
        log_opt.push_back(std::log(opt));
        g_lhs.push_back(std::log(predicted_floor(DistributionSpec::gaussian(2), opt).radians()));
        g_rhs.push_back(std::log(opt * std::sqrt(L)));
        l_lhs.push_back(std::log(predicted_floor(DistributionSpec::logconcave(), opt).radians()));
        l_rhs.push_back(std::log(opt * L));
        const double h = predicted_floor(DistributionSpec::heavy_tailed(3.0), opt).radians();
        h_lhs.push_back(std::log(h));
        h_ratio.push_back(std::log(h / opt));
    }
    EXPECT_NEAR(slope(g_rhs, g_lhs), 1.0, 0.05);
    EXPECT_NEAR(slope(l_rhs, l_lhs), 1.0, 0.05);
    EXPECT_NEAR(slope(log_opt, h_lhs), 2.0 / 3.0, 0.05);
    EXPECT_NEAR(slope(log_opt, h_ratio), -1.0 / 3.0, 0.05);
    EXPECT_GT(h_ratio[2], h_ratio[0]);

    // gaussian/logconcave ratio behaves like √log/log = 1/√log
    std::vector<double> scaled;
    for (double opt : opts)
        scaled.push_back(predicted_floor(DistributionSpec::gaussian(2), opt).radians() /
                         predicted_floor(DistributionSpec::logconcave(), opt).radians() * std::sqrt(std::log(1.0 / opt)));
    for (double v : scaled)
        EXPECT_NEAR(v / scaled[0], 1.0, 0.2);
}

TEST(FarFlipCalibration, TailMassAndNoiseRate) {
    const auto spec = DistributionSpec::gaussian(2);
    const auto w_star = UnitVector::basis(2, 1);
    const auto a = far_flip_at_tail_mass(spec, w_star, 0.01);
    EXPECT_NEAR(radial_tail_mass(spec, a.Z()), 0.01, 1e-12);
    EXPECT_NEAR(a.theta2(), 2 * admissible_theta(spec, a.Z()).radians(), 1e-15);
    for (const auto& s : {spec, DistributionSpec::heavy_tailed(3.0)}) {
        const auto b = far_flip_at_noise_rate(s, w_star, 0.01);
        EXPECT_NEAR(expected_flip_rate(s, b), 0.01, 1e-10);
    }
    EXPECT_THROW(far_flip_at_noise_rate(spec, w_star, 0.5), InvalidInput);
}

TEST(PopulationGradient, CleanSymmetryAtWStar) {
    const auto w_star = UnitVector::basis(2, 1);
    for (const auto* loss : {&kLogistic, &kHinge, &kSquaredHinge})
        for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::heavy_tailed(3.0)}) {
            const auto g = convex_population_grad(*loss, Vec2{0.0, 1.0}, spec, NoiseModel::clean(w_star));
            EXPECT_LE(std::abs(g.grad[0]), g.error) << to_string(loss->kind) << " " << spec.name();
        }
}

TEST(PopulationGradient, InputValidation) {
    const auto noise = NoiseModel::clean(UnitVector::basis(2, 1));
    EXPECT_THROW(convex_population_grad(kLogistic, Vec2{0.0, 0.0}, DistributionSpec::gaussian(2), noise), InvalidInput);
    EXPECT_THROW(convex_population_grad(kLogistic, Vector{0.0, 1.0, 0.0}, DistributionSpec::gaussian(3),
                                        NoiseModel::clean(UnitVector::basis(3, 1))),
                 InvalidInput);
}

TEST(PopulationGradient, NonConvergenceThrows) {
    QuadratureSpec q;
    q.tol = 1e-15;
    q.max_panels = 8;
    const auto noise = far_flip_at_tail_mass(DistributionSpec::gaussian(2), UnitVector::basis(2, 1), 0.01);
    EXPECT_THROW(convex_population_grad(kHinge, rotated_from_e2(0.001), DistributionSpec::gaussian(2), noise, q),
                 NumericalFailure);
}

TEST(PopulationGradient, RegionSplitMatchesIndependentQuadrature) {
    const double opt = 0.01;
    for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::logconcave()}) {
        const auto noise = far_flip_at_tail_mass(spec, UnitVector::basis(2, 1), opt);
        for (double alpha : {-0.01, 0.003, 0.2}) {
            const Vec2 w = rotated_from_e2(alpha);
            const auto g = convex_population_grad(kLogistic, w, spec, noise);
            EXPECT_NEAR(g.grad[0], g.inside[0] + g.outside[0], 1e-15);
            EXPECT_NEAR(g.grad[1], g.inside[1] + g.outside[1], 1e-15);
            const auto in = oracle_band_grad(kLogistic, w, spec, noise.theta2(), noise.Z(), 0.0, noise.Z());
            const auto out = oracle_band_grad(kLogistic, w, spec, noise.theta2(), noise.Z(), noise.Z(), g.r_max);
            const double tol = 2 * g.error + 1e-9;
            for (int j = 0; j < 2; ++j) {
                EXPECT_NEAR(g.inside[j], in[j], tol) << spec.name() << " alpha=" << alpha;
                EXPECT_NEAR(g.outside[j], out[j], tol) << spec.name() << " alpha=" << alpha;
            }
        }
    }
}

TEST(PopulationGradient, TangentialRouteAgrees) {
    for (const auto* loss : {&kLogistic, &kHinge, &kSquaredHinge})
        for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::logconcave(), DistributionSpec::heavy_tailed(3.0)}) {
            const auto noise = far_flip_at_tail_mass(spec, UnitVector::basis(2, 1), 0.01);
            for (double alpha : {-0.02, 0.0, 0.005})
                for (double rho : {0.5, 1.0, 2.0}) {
                    Vec2 w = rotated_from_e2(alpha);
                    w[0] *= rho;
                    w[1] *= rho;
                    const auto g = convex_population_grad(*loss, w, spec, noise);
                    const double t = tangential_gradient_polar(*loss, w, spec, noise);
                    EXPECT_NEAR(t, tangential(g.grad, w), 2 * g.error + 1e-9)
                        << to_string(loss->kind) << " " << spec.name() << " alpha=" << alpha << " rho=" << rho;
                }
        }
}

TEST(PopulationGradient, PanelRefinementStable) {
    const auto spec = DistributionSpec::gaussian(2);
    const auto noise = far_flip_at_tail_mass(spec, UnitVector::basis(2, 1), 0.01);
    QuadratureSpec fine;
    fine.radial_panels = 16;
    fine.angular_panels = 8;
    for (const auto* loss : {&kLogistic, &kHinge}) {
        const Vec2 w = rotated_from_e2(0.004);
        const auto a = convex_population_grad(*loss, w, spec, noise);
        const auto b = convex_population_grad(*loss, w, spec, noise, fine);
        const double tol = QuadratureSpec{}.tol * gradient_scale(spec, *loss, 1.0);
        EXPECT_NEAR(a.grad[0], b.grad[0], tol);
        EXPECT_NEAR(a.grad[1], b.grad[1], tol);
    }
}

TEST(PopulationGradient, SignStructureBetweenWStarAndWTilde) {
    for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::logconcave(), DistributionSpec::heavy_tailed(3.0)}) {
        const auto noise = far_flip_at_tail_mass(spec, UnitVector::basis(2, 1), 0.01);
        for (const auto* loss : {&kLogistic, &kHinge, &kSquaredHinge})
            for (double frac : {0.1, 0.5, 0.9}) {
                const Vec2 w = rotated_from_e2(frac * noise.theta2());
                const auto g = convex_population_grad(*loss, w, spec, noise);
                const double tol = QuadratureSpec{}.tol * gradient_scale(spec, *loss, 1.0);
                // The clean disk pulls back toward w*, the far region pushes toward w~ and wins.
                const double t_in = tangential(g.inside, w), t_out = tangential(g.outside, w);
                EXPECT_LE(t_in, tol) << spec.name() << " " << to_string(loss->kind);
                EXPECT_GE(t_out, -tol) << spec.name() << " " << to_string(loss->kind);
                EXPECT_GT(t_in + t_out, 10 * g.error) << spec.name() << " " << to_string(loss->kind);
            }
    }
}

TEST(PopulationGradient, MonteCarloAgreement) {
    const double opt = 0.01;
    const std::size_t n = 10'000'000;
    for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::logconcave(), DistributionSpec::heavy_tailed(3.0)}) {
        const auto noise = far_flip_at_tail_mass(spec, UnitVector::basis(2, 1), opt);
        const Vec2 w = rotated_from_e2(0.5 * noise.theta2());
        std::vector<const ConvexSurrogate*> losses{&kLogistic, &kHinge};
        // squared hinge has an infinite-variance gradient under the s = 3 tail
        if (spec.family != Family::heavy_tailed)
            losses.push_back(&kSquaredHinge);
        std::vector<std::array<double, 4>> acc(losses.size(), std::array<double, 4>{});
        GeneratedStream stream(spec, noise, 99);
        Vector x(2);
        for (std::size_t i = 0; i < n; ++i) {
            const Label y = *stream.next(x);
            const double m = x[0] * w[0] + x[1] * w[1];
            for (std::size_t k = 0; k < losses.size(); ++k) {
                const double c = -y * losses[k]->derivative(-y * m);
                const double g0 = c * x[0], g1 = c * x[1];
                acc[k][0] += g0;
                acc[k][1] += g1;
                acc[k][2] += g0 * g0;
                acc[k][3] += g1 * g1;
            }
        }
        for (std::size_t k = 0; k < losses.size(); ++k) {
            const auto g = convex_population_grad(*losses[k], w, spec, noise);
            for (int j = 0; j < 2; ++j) {
                const double mean = acc[k][j] / n;
                const double se = std::sqrt((acc[k][2 + j] / n - mean * mean) / n);
                EXPECT_NEAR(g.grad[j], mean, 4 * se + g.error) << spec.name() << " " << to_string(losses[k]->kind) << " j=" << j;
            }
        }
    }
}

TEST(ScanCone, SinglePointAtWStar) {
    const auto spec = DistributionSpec::gaussian(2);
    const double Z = radius_for_tail_mass(spec, 0.01);
    const auto rep = scan_cone(kLogistic, spec, Z, admissible_theta(spec, Z), 1);
    EXPECT_EQ(rep.argmin_angle, 0.0);
    EXPECT_EQ(rep.argmin_w, UnitVector::basis(2, 1));
    EXPECT_GT(rep.min_grad_norm, 0.0);
    EXPECT_TRUE(rep.certified());
}

TEST(ScanCone, CoarseGridsCertified) {
    for (const auto& spec : {DistributionSpec::gaussian(2), DistributionSpec::logconcave(), DistributionSpec::heavy_tailed(3.0)})
        for (const auto* loss : {&kLogistic, &kHinge, &kSquaredHinge}) {
            const double Z = radius_for_tail_mass(spec, 0.01);
            const auto rep = scan_cone(*loss, spec, Z, admissible_theta(spec, Z), 11);
            EXPECT_TRUE(rep.certified()) << spec.name() << " " << to_string(loss->kind) << " min=" << rep.min_grad_norm
                                         << " err=" << rep.max_error;
            EXPECT_LE(std::abs(rep.argmin_angle), rep.theta_max.radians() + 1e-15);
            EXPECT_LE(rep.min_tangential, rep.min_grad_norm + rep.max_error);
        }
}

TEST(ScanCone, ArgumentValidation) {
    const auto spec = DistributionSpec::gaussian(2);
    const double Z = radius_for_tail_mass(spec, 0.01);
    const double adm = admissible_theta(spec, Z).radians();
    EXPECT_THROW(scan_cone(kLogistic, spec, Z, Angle(adm * 1.01), 5), InvalidInput);
    EXPECT_THROW(scan_cone(kLogistic, spec, Z, Angle(0.0), 5), InvalidInput);
    EXPECT_THROW(scan_cone(kLogistic, spec, Z, Angle(adm), 0), InvalidInput);
}
