#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "halfspace/baselines.hpp"
#include "halfspace/distributions.hpp"
#include "halfspace/lowerbound.hpp"

using namespace halfspace;

namespace {

const ConvexSurrogate kLogistic{ConvexKind::logistic};
const ConvexSurrogate kHinge{ConvexKind::hinge};
const ConvexSurrogate kSquaredHinge{ConvexKind::squared_hinge};

LabeledDataset noisy_planar(std::size_t n, std::uint64_t seed) {
    return make_dataset(DistributionSpec::gaussian(2), NoiseModel::random_flip(UnitVector::basis(2, 1), 0.1), n, seed);
}

} // namespace

TEST(BatchObjective, MeanOfSampleLosses) {
    const auto ds = noisy_planar(500, 1);
    const Vector w{0.4, -1.3};
    for (const auto* loss : {&kLogistic, &kHinge, &kSquaredHinge}) {
        const auto obj = convex_batch_objective(w, ds, *loss);
        double v = 0.0;
        Vector g(2, 0.0);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto ex = ds.example(i);
            v += convex_loss_sample(w, ex, *loss);
            const auto gi = convex_grad_sample(w, ex, *loss);
            g[0] += gi[0];
            g[1] += gi[1];
        }
        EXPECT_NEAR(obj.value, v / ds.size(), 1e-12);
        EXPECT_NEAR(obj.grad[0], g[0] / ds.size(), 1e-12);
        EXPECT_NEAR(obj.grad[1], g[1] / ds.size(), 1e-12);
    }
}

TEST(BatchObjective, GradientMatchesFiniteDifferences) {
    const auto ds = noisy_planar(2000, 2);
    const Vector w{0.3, 0.9};
    for (const auto* loss : {&kLogistic, &kSquaredHinge}) {
        const auto obj = convex_batch_objective(w, ds, *loss);
        for (int j = 0; j < 2; ++j) {
            Vector a = w, b = w;
            a[j] += 1e-6;
            b[j] -= 1e-6;
            const double fd = (convex_batch_objective(a, ds, *loss).value - convex_batch_objective(b, ds, *loss).value) / 2e-6;
            EXPECT_NEAR(obj.grad[j], fd, 1e-6);
        }
    }
}

TEST(BatchObjective, InputErrors) {
    const auto ds = noisy_planar(10, 3);
    EXPECT_THROW(convex_batch_objective(Vector{1.0, 0.0, 0.0}, ds, kLogistic), InvalidInput);
    EXPECT_THROW(convex_batch_objective(Vector{1.0, 0.0}, LabeledDataset{}, kLogistic), InvalidInput);
}

TEST(FitConvex, LogisticReachesToleranceAndIsMinimal) {
    const auto ds = noisy_planar(20000, 4);
    const auto fit = fit_convex(ds, kLogistic);
    EXPECT_TRUE(fit.converged);
    EXPECT_LE(fit.grad_norm, 1e-6);
    EXPECT_NEAR(fit.objective, convex_batch_objective(fit.w, ds, kLogistic).value, 1e-15);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1e-2);
    for (int k = 0; k < 50; ++k) {
        Vector v = fit.w;
        v[0] += n(rng);
        v[1] += n(rng);
        EXPECT_GE(convex_batch_objective(v, ds, kLogistic).value, fit.objective - 1e-12);
    }
    // symmetric label noise keeps the minimizer aligned with w*
    EXPECT_LT(angle_between(UnitVector::from(fit.w), UnitVector::basis(2, 1)).radians(), 0.05);
}

TEST(FitConvex, SquaredHingeConverges) {
    const auto ds = noisy_planar(20000, 5);
    const auto fit = fit_convex(ds, kSquaredHinge);
    EXPECT_TRUE(fit.converged);
    EXPECT_GT(fit.iterations, 0u);
}

TEST(FitConvex, HingeDecreasesObjective) {
    const auto ds = noisy_planar(20000, 6);
    ConvexFitConfig cfg;
    cfg.max_iter = 5000;
    const auto fit = fit_convex(ds, kHinge, cfg);
    EXPECT_LT(fit.objective, 1.0);  // value at w = 0
    EXPECT_LT(angle_between(UnitVector::from(fit.w), UnitVector::basis(2, 1)).radians(), 0.1);
}

TEST(KinkStationarity, HandComputedExamples) {
    // At w = e1 the first example sits on the kink with column (−1, 0)/2.
    LabeledDataset ds;
    ds.points = Points{2, {1.0, 0.0, -2.0, 0.0}};
    ds.y = {1, 1};
    ds.flipped = {0, 0};
    const Vector w{1.0, 0.0};
    // second example: t = 2, contributes (2, 0)/2; best weight 1 leaves (1, 0)/2
    EXPECT_NEAR(kink_stationarity(w, ds, kHinge, 1e-12), 0.5, 1e-12);
    ds.points = Points{2, {1.0, 0.0, -0.5, 0.0}};
    // contributes (0.5, 0)/2, cancelled by weight 1/2
    EXPECT_NEAR(kink_stationarity(w, ds, kHinge, 1e-12), 0.0, 1e-12);
    // an empty band leaves the right derivative: (−1 + 0.5, 0)/2
    EXPECT_NEAR(kink_stationarity(w, ds, kHinge, -1.0), 0.25, 1e-12);
}

TEST(KinkStationarity, GradientNormForSmoothLosses) {
    const auto ds = noisy_planar(1000, 10);
    const Vector w{0.3, 2.0};
    for (const auto* loss : {&kLogistic, &kSquaredHinge})
        EXPECT_DOUBLE_EQ(kink_stationarity(w, ds, *loss, 1e-3), norm2(convex_batch_objective(w, ds, *loss).grad));
}

TEST(FitConvex, HingeReachesKinkStationarity) {
    const auto ds = noisy_planar(100000, 11);
    const auto fit = fit_convex(ds, kHinge);
    ASSERT_TRUE(fit.converged);
    EXPECT_LE(fit.stationarity, 1e-6);
    // no nearby point improves the objective by more than the stationarity allows
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    const double r = 1e-3 * norm2(fit.w);
    for (int k = 0; k < 50; ++k) {
        Vector v{normal(rng), normal(rng)};
        const double scale = r / norm2(v);
        Vector p{fit.w[0] + scale * v[0], fit.w[1] + scale * v[1]};
        EXPECT_GE(convex_batch_objective(p, ds, kHinge).value, fit.objective - 2e-6 * r);
    }
}

TEST(FitConvex, HingeStallIsReportedNotThrown) {
    const auto ds = noisy_planar(2000, 9);
    ConvexFitConfig cfg;
    cfg.grad_tol = 0.0;
    const auto fit = fit_convex(ds, kHinge, cfg);
    EXPECT_FALSE(fit.converged);
    EXPECT_TRUE(fit.stalled);
    EXPECT_LT(fit.iterations, cfg.max_iter);
}

TEST(FitConvex, IterationCapReportsNotConverged) {
    const auto ds = noisy_planar(5000, 7);
    ConvexFitConfig cfg;
    cfg.max_iter = 2;
    cfg.grad_tol = 1e-14;
    const auto fit = fit_convex(ds, kLogistic, cfg);
    EXPECT_FALSE(fit.converged);
    EXPECT_FALSE(fit.stalled);
    EXPECT_EQ(fit.iterations, 2u);
}

TEST(FitConvex, FarFlipMinimizerTiltsAwayFromWStar) {
    const auto spec = DistributionSpec::gaussian(2);
    const auto noise = far_flip_at_tail_mass(spec, UnitVector::basis(2, 1), 0.01);
    const auto ds = make_dataset(spec, noise, 200000, 8);
    const auto fit = fit_convex(ds, kLogistic);
    ASSERT_TRUE(fit.converged);
    const double angle = angle_between(UnitVector::from(fit.w), noise.w_star()).radians();
    EXPECT_GT(angle, 0.5 * predicted_floor(spec, 0.01).radians());
}
