#include "psc/errors.hpp"
#include "psc/models.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace psc;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

WarpedProductMetric warped(int n, int k, double c_f, const std::function<double(double)>& f) {
    const auto mesh = QuotientMesh::build(Topology::circle, n, kTwoPi, [](double) { return 1.0; });
    return WarpedProductMetric(mesh, k, c_f, sample(mesh, f));
}

LeftInvariantMetric diag_su2(double p1, double p2, double p3) {
    return LeftInvariantMetric(LieAlgebra::su2(), Eigen::Vector3d(p1, p2, p3).asDiagonal().toDenseMatrix());
}

}  // namespace

TEST(YamabeConstants, RationalFunctionsOfDimension) {
    const auto c = YamabeConstants::for_dimension(4);
    EXPECT_DOUBLE_EQ(c.b_n, 1.5);
    EXPECT_DOUBLE_EQ(c.gamma_n, 3.0);
    EXPECT_DOUBLE_EQ(c.two_star, 4.0);
    const auto c3 = YamabeConstants::for_dimension(3);
    EXPECT_DOUBLE_EQ(c3.b_n, 2.0);
    EXPECT_DOUBLE_EQ(c3.gamma_n, 5.0);
    EXPECT_DOUBLE_EQ(c3.two_star, 6.0);
    EXPECT_THROW(YamabeConstants::for_dimension(2), PreconditionError);
}

TEST(WarpedProduct, ValidatesInput) {
    const auto mesh = QuotientMesh::build(Topology::circle, 32, kTwoPi, [](double) { return 1.0; });
    EXPECT_THROW(WarpedProductMetric(mesh, 1, 0.0, DiscreteFunction::Ones(32)), PreconditionError);
    EXPECT_THROW(WarpedProductMetric(mesh, 3, 6.0, DiscreteFunction::Zero(32)), PreconditionError);
    const auto interval = QuotientMesh::build(Topology::interval, 32, 1.0, [](double) { return 1.0; });
    EXPECT_THROW(WarpedProductMetric(interval, 3, 6.0, DiscreteFunction::Ones(32)), PreconditionError);
    const WarpedProductMetric m(mesh, 3, 0.0, DiscreteFunction::Constant(32, 2.0));
    EXPECT_NEAR(m.mesh().weights()[5], 8.0, 1e-15);
}

TEST(ScalWarped, ConstantWarps) {
    const auto round = warped(64, 3, 6.0, [](double) { return 1.0; });
    EXPECT_LT((scal_warped(round).array() - 6.0).abs().maxCoeff(), 1e-12);
    const auto flat = warped(64, 3, 0.0, [](double) { return 1.0; });
    EXPECT_LT(scal_warped(flat).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScalWarped, MatchesClosedFormSecondOrder) {
    // f = 1 + 0.1 sin r: f' = 0.1 cos r, f'' = -0.1 sin r.
    auto exact = [](double r) {
        const double f = 1.0 + 0.1 * std::sin(r), fp = 0.1 * std::cos(r), fpp = -0.1 * std::sin(r);
        return 6.0 / (f * f) - 6.0 * fpp / f - 6.0 * fp * fp / (f * f);
    };
    double prev = 0.0;
    for (int n : {64, 128, 256}) {
        const auto m = warped(n, 3, 6.0, [](double r) { return 1.0 + 0.1 * std::sin(r); });
        const double err = (scal_warped(m) - sample(m.mesh(), exact)).cwiseAbs().maxCoeff();
        EXPECT_LT(err, m.mesh().spacing() * m.mesh().spacing());
        if (prev > 0.0) EXPECT_NEAR(prev / err, 4.0, 0.5);
        prev = err;
    }
}

TEST(ScalWarped, ReflectionInvariance) {
    const int n = 64;
    const auto m = warped(n, 3, 2.0, [](double r) { return 1.2 + 0.3 * std::sin(r) + 0.1 * std::cos(2 * r); });
    DiscreteFunction reflected(n);
    for (int j = 0; j < n; ++j) reflected[j] = m.warp()[(n - j) % n];
    const WarpedProductMetric mr(m.mesh(), 3, 2.0, reflected);
    const auto s = scal_warped(m), sr = scal_warped(mr);
    for (int j = 0; j < n; ++j) EXPECT_NEAR(sr[j], s[(n - j) % n], 1e-11);
}

TEST(ScalWarped, ScalingLaw) {
    const auto m = warped(128, 3, 6.0, [](double r) { return 1.0 + 0.2 * std::sin(r); });
    for (double c : {0.25, 4.0}) {
        const auto mc = m.scaled(c);
        EXPECT_NEAR(mc.mesh().length(), std::sqrt(c) * kTwoPi, 1e-12);
        EXPECT_LT((scal_warped(mc) - scal_warped(m) / c).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(RicciWarped, ProductValuesAndTrace) {
    const auto flat = warped(64, 3, 0.0, [](double) { return 1.0; });
    const auto rf = ricci_warped(flat);
    EXPECT_LT(rf.radial.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(rf.fiber.cwiseAbs().maxCoeff(), 1e-12);

    const auto round = warped(64, 3, 6.0, [](double) { return 1.0; });
    const auto rr = ricci_warped(round);
    EXPECT_LT(rr.radial.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((rr.fiber.array() - 2.0).abs().maxCoeff(), 1e-12);

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ud(-0.2, 0.2);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = ud(rng), b = ud(rng), c = ud(rng);
        const auto m = warped(96, 4, 12.0, [&](double r) { return 1.0 + a * std::sin(r) + b * std::cos(2 * r) + c * std::sin(3 * r); });
        const auto ric = ricci_warped(m);
        const DiscreteFunction trace = 4.0 * ric.fiber + ric.radial;
        EXPECT_LT((trace - scal_warped(m)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(LieAlgebra, Su2Structure) {
    const auto su2 = LieAlgebra::su2();
    EXPECT_LT(su2.jacobi_residual(), 1e-15);
    EXPECT_LT(su2.invariance_residual(), 1e-15);
    EXPECT_FALSE(su2.is_abelian());
    EXPECT_TRUE(LieAlgebra::abelian(3).is_abelian());
    const Eigen::VectorXd e3 = su2.bracket(Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY());
    EXPECT_NEAR((e3 - Eigen::Vector3d::UnitZ()).norm(), 0.0, 1e-15);
}

TEST(LeftInvariant, RejectsInvalidData) {
    EXPECT_THROW(LeftInvariantMetric(LieAlgebra::su2(), -Eigen::Matrix3d::Identity()), PreconditionError);
    LieAlgebra bad(3);
    bad.set_bracket(0, 1, 0, 1.0);  // [e1, e2] = e1: not Q-invariant
    EXPECT_THROW(LeftInvariantMetric(bad, Eigen::Matrix3d::Identity()), PreconditionError);
}

TEST(ScalLeftInvariant, BiInvariantSu2) {
    EXPECT_NEAR(scal_left_invariant(diag_su2(1, 1, 1)), 1.5, 1e-14);
}

TEST(ScalLeftInvariant, AbelianIsFlat) {
    Eigen::Matrix3d p;
    p << 2, 0.3, 0, 0.3, 1, 0.1, 0, 0.1, 0.7;
    EXPECT_NEAR(scal_left_invariant(LeftInvariantMetric(LieAlgebra::abelian(3), p)), 0.0, 1e-15);
}

TEST(ScalLeftInvariant, MatchesMilnorAndSectionalContraction) {
    for (double l : {0.5, 2.0}) {
        const auto m = diag_su2(l, 1, 1);
        const double s = scal_left_invariant(m);
        EXPECT_NEAR(s, oracle::milnor_su2(l, 1, 1), 1e-10);
        // Full contraction of the curvature tensor over a g-orthonormal frame.
        double contraction = 0.0;
        const Eigen::Vector3d scale(1.0 / std::sqrt(l), 1.0, 1.0);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j)
                    contraction += sectional_left_invariant(m, Eigen::Vector3d::Unit(i) * scale[i],
                                                            Eigen::Vector3d::Unit(j) * scale[j]);
        EXPECT_NEAR(s, contraction, 1e-10);
    }
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> ud(0.2, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = ud(rng), b = ud(rng), c = ud(rng);
        EXPECT_NEAR(scal_left_invariant(diag_su2(a, b, c)), oracle::milnor_su2(a, b, c), 1e-10);
    }
}

TEST(ScalLeftInvariant, PositiveIffNonAbelianAtIdentity) {
    EXPECT_GT(scal_left_invariant(LeftInvariantMetric(LieAlgebra::su2(), Eigen::Matrix3d::Identity())), 0.0);
    const auto so3_r = LieAlgebra::direct_sum(LieAlgebra::su2(), LieAlgebra::abelian(1));
    EXPECT_GT(scal_left_invariant(LeftInvariantMetric(so3_r, Eigen::Matrix4d::Identity())), 0.0);
    EXPECT_EQ(scal_left_invariant(LeftInvariantMetric(LieAlgebra::abelian(2), Eigen::Matrix2d::Identity())), 0.0);
}

TEST(SectionalLeftInvariant, BiInvariantQuarterBracket) {
    const auto m = diag_su2(1, 1, 1);
    EXPECT_NEAR(sectional_left_invariant(m, Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()), 0.25, 1e-14);
    const Eigen::Vector3d x(0.3, -1.0, 2.0);
    EXPECT_NEAR(sectional_left_invariant(m, x, 2.5 * x), 0.0, 1e-13);
    std::mt19937 rng(23);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Vector3d a(nd(rng), nd(rng), nd(rng)), b(nd(rng), nd(rng), nd(rng));
        const double expected = 0.25 * m.algebra().bracket(a, b).squaredNorm();
        EXPECT_NEAR(sectional_left_invariant(m, a, b), expected, 1e-12);
        EXPECT_NEAR(sectional_left_invariant(m, a, b), sectional_left_invariant(m, b, a), 1e-12);
    }
}

TEST(DeformedGroupMetric, EigenvalueMap) {
    EXPECT_NEAR((deformed_group_metric(diag_su2(1, 1, 1), 1.0).metric_tensor() - 0.5 * Eigen::Matrix3d::Identity()).norm(),
                0.0, 1e-15);
    EXPECT_EQ(deformed_group_metric(diag_su2(0.5, 1, 2), 0.0).metric_tensor(), diag_su2(0.5, 1, 2).metric_tensor());
    std::mt19937 rng(31);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::Matrix3d a;
        for (int i = 0; i < 9; ++i) a(i) = nd(rng);
        const Eigen::Matrix3d p = a * a.transpose() + 0.1 * Eigen::Matrix3d::Identity();
        const double t = std::exp(nd(rng));
        const LeftInvariantMetric m(LieAlgebra::su2(), p);
        const Eigen::Vector3d lam = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(p).eigenvalues();
        const Eigen::Vector3d lam_t =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(deformed_group_metric(m, t).metric_tensor()).eigenvalues();
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(lam_t[i], lam[i] / (1.0 + t * lam[i]), 1e-12);
    }
}

TEST(Presets, NamedModels) {
    EXPECT_LT((scal_warped(warped_preset("round-fiber", 64)).array() - 6.0).abs().maxCoeff(), 1e-12);
    EXPECT_LT(scal_warped(warped_preset("flat-torus", 64)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((scal_warped(warped_preset("hyperbolic-fiber", 64)).array() + 2.0).abs().maxCoeff(), 1e-12);
    EXPECT_THROW(warped_preset("no-such-model", 64), ConfigError);
    EXPECT_NEAR(scal_left_invariant(group_preset("su2-biinvariant")), 1.5, 1e-14);
    EXPECT_NEAR(scal_left_invariant(group_preset("su2-berger(2)")), oracle::milnor_su2(2, 1, 1), 1e-12);
    EXPECT_THROW(group_preset("su2-berger(-1)"), std::exception);
}
