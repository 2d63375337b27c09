#include "psc/cheeger.hpp"
#include "psc/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace psc;

namespace {

Eigen::MatrixXd random_spd(std::mt19937& rng, int d) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d * d; ++i) a(i) = nd(rng);
    return a * a.transpose() / d + 0.2 * Eigen::MatrixXd::Identity(d, d);
}

SplitVector random_split(std::mt19937& rng, const OrbitData& o) {
    std::normal_distribution<double> nd;
    SplitVector x{Eigen::VectorXd(o.normal_dim), Eigen::VectorXd(o.orbit_dim)};
    for (int i = 0; i < o.normal_dim; ++i) x.normal[i] = nd(rng);
    for (int i = 0; i < o.orbit_dim; ++i) x.orbit[i] = nd(rng);
    return x;
}

IsotropyData rotation_isotropy(double s) {
    Eigen::MatrixXd gen(2, 2);
    gen << 0.0, -s, s, 0.0;
    return IsotropyData::from_generators({gen});
}

}  // namespace

TEST(PEigen, AscendingAndReconstructing) {
    auto o = make_orbit_data(LieAlgebra::su2(), 3, Eigen::Vector3d(2.0, 0.5, 1.0).asDiagonal().toDenseMatrix(), 0);
    const auto pe = p_eigendecomposition(o);
    EXPECT_NEAR(pe.values[0], 0.5, 1e-15);
    EXPECT_NEAR(pe.values[1], 1.0, 1e-15);
    EXPECT_NEAR(pe.values[2], 2.0, 1e-15);

    o.p = Eigen::Matrix3d::Identity();
    EXPECT_NEAR((p_eigendecomposition(o).values.array() - 1.0).abs().maxCoeff(), 0.0, 1e-15);

    std::mt19937 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        o.p = random_spd(rng, 3);
        const auto e = p_eigendecomposition(o);
        const Eigen::MatrixXd rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
        EXPECT_LT((rec - o.p).norm(), 1e-12);
        EXPECT_LT((e.vectors.transpose() * e.vectors - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    }

    o.p = Eigen::Vector3d(1.0, -0.1, 1.0).asDiagonal();
    EXPECT_THROW(p_eigendecomposition(o), PreconditionError);
    EXPECT_THROW(validate(o), PreconditionError);
}

TEST(CtApply, IdentityHalvingAndEigenvectors) {
    std::mt19937 rng(2);
    auto o = make_orbit_data(LieAlgebra::su2(), 3, Eigen::Matrix3d::Identity(), 2);
    const SplitVector x = random_split(rng, o);
    const auto x0 = c_t_apply(o, 0.0, x);
    EXPECT_EQ(x0.normal, x.normal);
    EXPECT_LT((x0.orbit - x.orbit).norm(), 1e-15);
    const auto x1 = c_t_apply(o, 1.0, x);
    EXPECT_EQ(x1.normal, x.normal);
    EXPECT_LT((x1.orbit - 0.5 * x.orbit).norm(), 1e-15);

    o.p = random_spd(rng, 3);
    const auto pe = p_eigendecomposition(o);
    for (int a = 0; a < 3; ++a) {
        const double t = 0.7;
        const auto y = c_t_apply(o, t, {Eigen::VectorXd::Zero(2), pe.vectors.col(a)});
        EXPECT_LT((y.orbit - pe.vectors.col(a) / (1.0 + t * pe.values[a])).norm(), 1e-13);
    }
    EXPECT_THROW(c_t_apply(o, -1.0, x), PreconditionError);
}

TEST(ZtTerm, VanishesAtZeroTimeAndForAbelian) {
    std::mt19937 rng(3);
    const auto pt = cheeger_preset("singular-point");
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_split(rng, pt.orbit), y = random_split(rng, pt.orbit);
        EXPECT_EQ(z_t_term(pt.orbit, &*pt.isotropy, 0.0, x, y), 0.0);
    }
    const auto ab = make_orbit_data(LieAlgebra::abelian(3), 3, random_spd(rng, 3), 0);
    const SplitVector u{Eigen::VectorXd(0), Eigen::Vector3d(1, 2, 3)};
    const SplitVector v{Eigen::VectorXd(0), Eigen::Vector3d(-1, 0.5, 2)};
    EXPECT_EQ(z_t_term(ab, nullptr, 5.0, u, v), 0.0);
}

TEST(ZtTerm, ClosedFormDominatesDenseSampling) {
    std::mt19937 rng(4);
    auto o = make_orbit_data(LieAlgebra::su2(), 3, Eigen::Matrix3d::Identity(), 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_split(rng, o), y = random_split(rng, o);
        const double t = 0.5 + trial;
        const auto best = z_t_maximize(o, nullptr, t, x, y);
        const double lower = oracle::sampled_z_t(o, nullptr, t, x, y, 100000, rng);
        EXPECT_GE(best.value, lower * (1.0 - 1e-12));
        EXPECT_NEAR(best.value, lower, 1e-6 * best.value);
        EXPECT_NEAR(best.maximizer.norm(), 1.0, 1e-14);
    }
}

TEST(ZtTerm, SymmetricNonnegativeAndLinearlyBounded) {
    std::mt19937 rng(5);
    const auto pt = cheeger_preset("singular-point");
    const IsotropyData* iso = &*pt.isotropy;
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_split(rng, pt.orbit), y = random_split(rng, pt.orbit);
        for (double t : {0.01, 1.0, 100.0}) {
            const double zxy = z_t_term(pt.orbit, iso, t, x, y);
            EXPECT_GE(zxy, 0.0);
            EXPECT_NEAR(zxy, z_t_term(pt.orbit, iso, t, y, x), 1e-12 * (1.0 + zxy));
        }
        // With the t/2 bracket absent (normal inputs), z_t / t <= 3 |a|^2.
        const SplitVector xn{x.normal, Eigen::VectorXd::Zero(3)}, yn{y.normal, Eigen::VectorXd::Zero(3)};
        const double bound = 3.0 * dw_vector(pt.orbit, iso, xn, yn).squaredNorm();
        for (double t : {1.0, 1e2, 1e4}) EXPECT_LE(z_t_term(pt.orbit, iso, t, xn, yn) / t, bound * (1 + 1e-12));
    }
}

TEST(ScalCheeger, UndeformedIsSectionalSum) {
    const auto pt = cheeger_preset("free-point");
    const auto& o = pt.orbit;
    const double expected =
        o.normal_sectionals.sum() + 2.0 * o.mixed_sectionals.sum() + o.orbit_sectionals.sum();
    EXPECT_NEAR(scal_cheeger(o, nullptr, 0.0), expected, 1e-14);
}

TEST(ScalCheeger, MatchesDeformedGroupOracle) {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> ud(0.2, 3.0);
    std::vector<LeftInvariantMetric> metrics{group_preset("su2-biinvariant"), group_preset("su2-berger(0.3)"),
                                             group_preset("su2-berger(9)")};
    for (int i = 0; i < 5; ++i) metrics.emplace_back(LieAlgebra::su2(), random_spd(rng, 3));
    for (const auto& m : metrics) {
        const auto o = orbit_data_from_group(m);
        for (double t : {0.0, 0.1, 1.0, 10.0, 100.0}) {
            const double oracle = scal_left_invariant(deformed_group_metric(m, t));
            EXPECT_NEAR(scal_cheeger(o, nullptr, t), oracle, 1e-8 * std::max(1.0, std::abs(oracle)));
        }
    }
}

TEST(ScalCheeger, AbelianHomogeneousPointIsConstant) {
    std::mt19937 rng(7);
    const auto m = LeftInvariantMetric(LieAlgebra::abelian(3), random_spd(rng, 3));
    const auto o = orbit_data_from_group(m);
    for (double t : {0.0, 1.0, 1e3}) {
        const auto terms = scal_cheeger_terms(o, nullptr, t);
        EXPECT_EQ(terms.bracket, 0.0);
        EXPECT_EQ(terms.z, 0.0);
        EXPECT_NEAR(terms.total(), 0.0, 1e-14);
    }
}

TEST(ScalCheeger, ThirdSumAsymptotics) {
    const auto pt = cheeger_preset("free-point");
    const double t = 1e4;
    const double third = scal_cheeger_terms(pt.orbit, nullptr, t).bracket;
    EXPECT_NEAR(third / t / scal_bar(pt.orbit), 1.0, 1e-2);
}

TEST(ScalCheeger, BlowUpDirectionMatchesPinchingDensity) {
    for (const char* name : {"free-point", "singular-point"}) {
        const auto pt = cheeger_preset(name);
        const IsotropyData* iso = pt.isotropy ? &*pt.isotropy : nullptr;
        const double t = 1e4;
        const double predicted = pinching_density(pt);
        EXPECT_NEAR(scal_cheeger(pt.orbit, iso, t) / t / predicted, 1.0, 1e-2) << name;
    }
}

TEST(ScalCheeger, RejectsInconsistentTables) {
    auto pt = cheeger_preset("free-point");
    pt.orbit.mixed_sectionals.resize(1, 1);
    EXPECT_THROW(scal_cheeger(pt.orbit, nullptr, 1.0), PreconditionError);

    auto asym = cheeger_preset("free-point");
    asym.orbit.dw_normal[1] = Eigen::Vector3d(1, 0, 0);
    EXPECT_THROW(scal_cheeger(asym.orbit, nullptr, 1.0), PreconditionError);
}

TEST(ScalCheeger, PositiveAfterFiniteDeformation) {
    for (const char* name : {"su2-biinvariant", "su2-berger(0.3)", "su2-berger(9)", "free-point", "singular-point"}) {
        const auto pt = cheeger_preset(name);
        const IsotropyData* iso = pt.isotropy ? &*pt.isotropy : nullptr;
        const auto t0 = positivity_onset(pt.orbit, iso, 1e4);
        ASSERT_TRUE(t0.has_value()) << name;
        EXPECT_TRUE(std::isfinite(*t0));
        EXPECT_GT(scal_cheeger(pt.orbit, iso, *t0), 0.0);
    }
    // The Berger sphere with lambda = 9 starts negative.
    const auto berger = cheeger_preset("su2-berger(9)");
    EXPECT_LT(scal_cheeger(berger.orbit, nullptr, 0.0), 0.0);
    EXPECT_GT(*positivity_onset(berger.orbit, nullptr, 1e4), 0.0);
}

TEST(ScalBar, BracketsOnly) {
    EXPECT_EQ(scal_bar(make_orbit_data(LieAlgebra::abelian(3), 3, Eigen::Matrix3d::Identity(), 0)), 0.0);
    const auto a = make_orbit_data(LieAlgebra::su2(), 3, Eigen::Matrix3d::Identity(), 0);
    EXPECT_NEAR(scal_bar(a), 1.5, 1e-15);
    const auto b = make_orbit_data(LieAlgebra::su2(), 3, Eigen::Vector3d(0.5, 1, 2).asDiagonal(), 0);
    EXPECT_EQ(scal_bar(a), scal_bar(b));
}

TEST(Xi, TrivialIsometricAndScaling) {
    IsotropyData zero;
    zero.isotropy_dim = 1;
    zero.rho.assign(2, Eigen::MatrixXd::Zero(2, 1));
    EXPECT_EQ(xi(zero, 2), 0.0);
    EXPECT_EQ(xi(IsotropyData{}, 3), 0.0);

    IsotropyData single;
    single.isotropy_dim = 1;
    single.rho = {Eigen::Vector2d(0.0, 1.0), Eigen::MatrixXd::Zero(2, 1)};
    EXPECT_NEAR(xi(single, 2), 1.0, 1e-15);
    for (double s : {0.5, 3.0}) {
        IsotropyData scaled = single;
        scaled.rho[0] *= s;
        EXPECT_NEAR(xi(scaled, 2), s * s, 1e-13);
    }
    EXPECT_NEAR(xi(rotation_isotropy(1.0), 2), 2.0, 1e-14);
    EXPECT_NEAR(xi(rotation_isotropy(0.5), 2), 0.5, 1e-14);
}

TEST(Isotropy, RejectsNonSkewOrMismatchedData) {
    auto pt = cheeger_preset("singular-point");
    IsotropyData bad = *pt.isotropy;
    bad.rho[0](0, 0) = 1.0;
    EXPECT_THROW(validate(pt.orbit, bad), PreconditionError);
    EXPECT_THROW(scal_cheeger(pt.orbit, &bad, 1.0), PreconditionError);
    IsotropyData wrong_dim;
    EXPECT_THROW(validate(pt.orbit, wrong_dim), PreconditionError);
}

TEST(PinchingLimit, Examples) {
    const auto free_pt = cheeger_preset("free-point");
    EXPECT_EQ(pinching_limit({free_pt, free_pt, free_pt}), 1.0);

    // Semi-free: xi = 0 and equal orbit algebras, different metrics.
    std::vector<PinchingPoint> semi_free;
    std::mt19937 rng(8);
    for (int i = 0; i < 4; ++i) {
        PinchingPoint p = free_pt;
        p.orbit.p = random_spd(rng, 3);
        p.orbit.normal_sectionals *= (1.0 + i);
        semi_free.push_back(p);
    }
    EXPECT_EQ(pinching_limit(semi_free), 1.0);

    PinchingPoint a = cheeger_preset("singular-point");
    a.isotropy = IsotropyData::from_generators({Eigen::Matrix2d::Zero()});
    PinchingPoint b = cheeger_preset("singular-point");
    b.isotropy = rotation_isotropy(0.5);  // xi = 1/2
    EXPECT_NEAR(pinching_density(a), 1.5, 1e-15);
    EXPECT_NEAR(pinching_density(b), 3.0, 1e-14);
    EXPECT_NEAR(pinching_limit({a, b}), 2.0, 1e-14);

    PinchingPoint ab{make_orbit_data(LieAlgebra::abelian(3), 3, Eigen::Matrix3d::Identity(), 0), std::nullopt};
    EXPECT_THROW(pinching_limit({ab}), PreconditionError);
    EXPECT_THROW(pinching_limit({}), PreconditionError);
}

TEST(Presets, UnknownNameRejected) {
    EXPECT_THROW(cheeger_preset("nowhere"), ConfigError);
}
