#include "psc/errors.hpp"
#include "psc/yamabe.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace psc;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

WarpedProductMetric warped(int n, int k, double c_f, const std::function<double(double)>& f, double len = kTwoPi) {
    const auto mesh = QuotientMesh::build(Topology::circle, n, len, [](double) { return 1.0; });
    return WarpedProductMetric(mesh, k, c_f, sample(mesh, f));
}

// Round fiber with a mild warp: scal > 0 but not constant.
WarpedProductMetric bumpy_round(int n) {
    return warped(n, 3, 6.0, [](double r) { return 1.0 + 0.1 * std::sin(r); });
}

}  // namespace

TEST(FunctionalJ, ZeroAndConstants) {
    const ConformalProblem p{warped_preset("round-fiber", 64), 6.0, 1.0};
    EXPECT_EQ(functional_J(p, DiscreteFunction::Zero(64)), 0.0);
    const double a = 1.7, vol = p.metric.mesh().volume();
    const double expected = 0.5 * 6.0 * a * a * vol - 6.0 / 4.0 * std::pow(a, 4) * vol;
    EXPECT_NEAR(functional_J(p, DiscreteFunction::Constant(64, a)), expected, 1e-10);
}

TEST(FunctionalJ, GradientMatchesFiniteDifferences) {
    const ConformalProblem p{bumpy_round(96), 2.0, 1.0};
    const auto& mesh = p.metric.mesh();
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> ud(0.5, 1.5), vd(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        DiscreteFunction u(96), v(96);
        for (int j = 0; j < 96; ++j) {
            u[j] = ud(rng);
            v[j] = vd(rng);
        }
        const double tau = 1e-6;
        const double fd = (functional_J(p, u + tau * v) - functional_J(p, u - tau * v)) / (2.0 * tau);
        const double analytic = inner(mesh, gradient_J(p, u), v);
        EXPECT_NEAR(fd, analytic, 1e-6 * std::max(1.0, std::abs(analytic)));
    }
}

TEST(ProjectToConstraint, FixedPointsAndClamping) {
    const ConformalProblem p{warped_preset("round-fiber", 64), 4.0, kTwoPi};
    // u = 1, c = 2* = 4, vol = 2 pi, eps = 2 pi: already on the constraint.
    const DiscreteFunction one = DiscreteFunction::Ones(64);
    EXPECT_LT((project_to_constraint(p, one) - one).cwiseAbs().maxCoeff(), 1e-14);
    const auto& mesh = p.metric.mesh();
    DiscreteFunction dip = sample(mesh, [](double r) { return std::sin(r) + 0.3; });
    const auto q = project_to_constraint(p, dip);
    EXPECT_GE(q.minCoeff(), 0.0);
    EXPECT_NEAR(p.c / 4.0 * integrate(mesh, q.array().pow(4.0).matrix()), p.epsilon, 1e-12);
    EXPECT_LT((project_to_constraint(p, q) - q).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_THROW(project_to_constraint(p, -one), PreconditionError);
}

TEST(ElResidual, RootsAndDefinition) {
    const auto m = warped_preset("round-fiber", 64);
    // scal = 6, n = 4, gamma = 3: u = (6/c)^{1/2}.
    const double c = 2.0;
    const auto root = constant_root(6.0, c, 4);
    ASSERT_TRUE(root.has_value());
    EXPECT_LT(el_residual(m, DiscreteFunction::Constant(64, *root), c).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT(el_residual(m, DiscreteFunction::Ones(64), 6.0).cwiseAbs().maxCoeff(), 1e-13);

    const auto b = bumpy_round(64);
    DiscreteFunction u = sample(b.mesh(), [](double r) { return 1.0 + 0.2 * std::cos(2 * r); });
    const DiscreteFunction expected = 4.0 * 1.5 * laplacian(b.mesh(), u) - scal_warped(b).cwiseProduct(u) +
                                      3.0 * u.array().pow(3.0).matrix();
    EXPECT_EQ(el_residual(b, u, 3.0), expected);
}

TEST(ElResidual, FlatObstruction) {
    // scal == 0 with c != 0: no positive constant root.
    EXPECT_FALSE(constant_root(0.0, 1.0, 4).has_value());
    EXPECT_FALSE(constant_root(0.0, -1.0, 4).has_value());
    EXPECT_TRUE(constant_root(-2.0, -2.0, 3).has_value());
    EXPECT_FALSE(constant_root(6.0, -1.0, 4).has_value());
}

TEST(ConformalScal, ConstantFactors) {
    const auto m = bumpy_round(64);
    const DiscreteFunction s = scal_warped(m);
    EXPECT_LT((conformal_scal(m, DiscreteFunction::Ones(64)) - s).cwiseAbs().maxCoeff(), 1e-13);
    const double a = 1.6;
    EXPECT_LT((conformal_scal(m, DiscreteFunction::Constant(64, a)) - s / std::pow(a, 2.0)).cwiseAbs().maxCoeff(),
              1e-12);
    EXPECT_THROW(conformal_scal(m, DiscreteFunction::Zero(64)), PreconditionError);
}

TEST(ConformalScal, ReparametrizationOracle) {
    auto f = [](double r) { return 1.0 + 0.15 * std::sin(r); };
    auto u = [](double r) { return 1.0 + 0.2 * std::cos(r) + 0.05 * std::sin(2 * r); };
    double prev = 0.0;
    for (int n : {64, 128, 256}) {
        const auto m = warped(n, 3, 6.0, f);
        const DiscreteFunction uu = sample(m.mesh(), u);
        const auto re = conformal_metric(m, uu, n);
        // Both curvature fields, compared at matching points of the original circle.
        const PeriodicInterpolant back(scal_warped(re.metric), re.metric.mesh().length());
        // n = 4: dr~ = u dr.
        const PeriodicInterpolant speed(uu, m.mesh().length());
        const DiscreteFunction direct = conformal_scal(m, uu);
        double err = 0.0;
        for (int j = 0; j < n; ++j) err = std::max(err, std::abs(direct[j] - back(speed.antiderivative(m.mesh().node(j)))));
        if (prev > 0.0) EXPECT_NEAR(prev / err, 4.0, 0.5);
        prev = err;
    }
}

TEST(Minimize, RoundFiberConstantStart) {
    const ConformalProblem p{warped_preset("round-fiber", 64), 6.0, 1.0};
    SolverConfig cfg;
    const auto sol = minimize_on_constraint(p, cfg, DiscreteFunction::Constant(64, 1.3));
    EXPECT_LT(sol.residual_norm, 1e-8);
    EXPECT_GT(1.0 + sol.lagrange, 0.0);
    EXPECT_LT(sol.u.maxCoeff() - sol.u.minCoeff(), 1e-12);
    const DiscreteFunction s = conformal_scal(p.metric, sol.u);
    EXPECT_LT((s.array() - sol.c_prime).abs().maxCoeff(), 1e-6);
}

TEST(Minimize, ScaleAbsorbedByMultiplier) {
    const ConformalProblem p{warped_preset("round-fiber", 64), 1.0, 1.0};
    const auto sol = minimize_on_constraint(p, SolverConfig{});
    EXPECT_LT(sol.residual_norm, 1e-8);
    // u^{4/(n-2)} g has scal c'; rescaling by c' gives scal 1.
    const DiscreteFunction s = conformal_scal(p.metric, sol.u);
    EXPECT_LT((s / sol.c_prime).array().unaryExpr([](double v) { return std::abs(v - 1.0); }).maxCoeff(), 1e-8);
    const auto re = conformal_metric(p.metric, sol.u, 64).metric.scaled(sol.c_prime);
    EXPECT_LT((scal_warped(re).array() - 1.0).abs().maxCoeff(), 1e-8);
}

TEST(Minimize, NonConstantScalDescends) {
    const ConformalProblem p{bumpy_round(96), 6.0, 1.0};
    const auto sol = minimize_on_constraint(p, SolverConfig{});
    EXPECT_LT(sol.residual_norm, 1e-10);
    EXPECT_GT(sol.u.minCoeff(), 0.0);
    EXPECT_GT(sol.c_prime, 0.0);
    EXPECT_GT(sol.u.maxCoeff() - sol.u.minCoeff(), 1e-4);
    for (size_t i = 1; i < sol.history.size(); ++i)
        EXPECT_LE(sol.history[i], sol.history[i - 1] + 1e-13 * std::abs(sol.history[i - 1]));
    const DiscreteFunction s = conformal_scal(p.metric, sol.u);
    EXPECT_LT((s.array() - sol.c_prime).abs().maxCoeff(), 1e-8);
    EXPECT_LT(sol.spectral_tail, 1e-6);
}

TEST(Minimize, RejectsOutsidePositiveRegime) {
    EXPECT_THROW(minimize_on_constraint({warped_preset("flat-torus", 64), 1.0, 1.0}, SolverConfig{}), PreconditionError);
    EXPECT_THROW(minimize_on_constraint({warped_preset("hyperbolic-fiber", 64), 1.0, 1.0}, SolverConfig{}),
                 PreconditionError);
    EXPECT_THROW(minimize_on_constraint({warped_preset("round-fiber", 64), -1.0, 1.0}, SolverConfig{}),
                 PreconditionError);
}

TEST(Minimize, ReportsNonConvergence) {
    SolverConfig cfg;
    cfg.max_iter = 1;
    cfg.tol_residual = 1e-14;
    EXPECT_THROW(minimize_on_constraint({bumpy_round(64), 6.0, 1.0}, cfg), SolverError);
}

TEST(Coercivity, ConstrainedFunctionalGrows) {
    const ConformalProblem p{bumpy_round(64), 2.0, 1.0};
    const auto profile = project_to_constraint(p, sample(p.metric.mesh(), [](double r) { return 1.2 + std::sin(3 * r); }));
    double prev = -1e300;
    for (double a : {1.0, 10.0, 100.0, 1000.0}) {
        const double j = functional_J_on_constraint(p, a * profile);
        EXPECT_GT(j, prev);
        prev = j;
    }
    EXPECT_GT(prev, 1e5);
}

TEST(NegativeConstant, HyperbolicFiberIsFixed) {
    const auto m = warped_preset("hyperbolic-fiber", 64);
    const auto out = solve_negative_constant(m, SolverConfig{});
    EXPECT_LT((out.solution.u.array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_NEAR(out.solution.c_prime, 2.0, 1e-12);
}

TEST(NegativeConstant, BumpyHyperbolicNewton) {
    const auto m = warped_preset("bumpy-hyperbolic", 128);
    const DiscreteFunction start = sample(m.mesh(), [](double r) { return 1.0 + 0.2 * std::cos(r); });
    SolverConfig cfg;
    cfg.tol_residual = 1e-10;
    const auto out = solve_negative_constant(m, cfg, std::nullopt, start);
    EXPECT_LT(out.solution.residual_norm, 1e-10);
    EXPECT_GT(out.solution.u.minCoeff(), 0.0);
    EXPECT_LT((conformal_scal(m, out.solution.u).array() + out.solution.c_prime).abs().maxCoeff(), 1e-8);
    EXPECT_NEAR(out.c_used * (1.0 + out.solution.lagrange), out.solution.c_prime, 1e-12);
}

TEST(NegativeConstant, BoundIsEnforced) {
    const auto m = warped_preset("hyperbolic-fiber", 64);
    const double bound = negative_constant_bound(m);
    // min scal = -2, n = 3 (2* = 6), vol = 2 pi: 3 * 2 * (2 pi)^{-2}.
    EXPECT_NEAR(bound, 6.0 / (kTwoPi * kTwoPi), 1e-12);
    try {
        solve_negative_constant(m, SolverConfig{}, 0.5 * bound);
        FAIL() << "expected rejection";
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("0.15198"), std::string::npos) << e.what();
    }
    EXPECT_NO_THROW(solve_negative_constant(m, SolverConfig{}, bound));
}

TEST(NegativeConstant, FlatClassHasNoNegativeConstant) {
    const auto m = warped_preset("flat-torus", 64);
    const DiscreteFunction start = sample(m.mesh(), [](double r) { return 1.0 + 0.2 * std::cos(r); });
    EXPECT_THROW(solve_negative_constant(m, SolverConfig{}, std::nullopt, start), PreconditionError);
}

TEST(Classifier, Trichotomy) {
    const auto flat = classify_conformal_class(warped_preset("flat-torus", 64));
    EXPECT_EQ(flat.verdict, ConformalClass::Z_G);
    EXPECT_LT(std::abs(flat.lambda1), 1e-8);
    EXPECT_EQ(classify_conformal_class(warped_preset("round-fiber", 64)).verdict, ConformalClass::P_G);
    EXPECT_EQ(classify_conformal_class(warped_preset("hyperbolic-fiber", 64)).verdict, ConformalClass::N_G);
    EXPECT_EQ(classify_conformal_class(warped_preset("bumpy-hyperbolic", 64)).verdict, ConformalClass::N_G);
    EXPECT_EQ(classify_conformal_class(bumpy_round(64)).verdict, ConformalClass::P_G);
    EXPECT_EQ(to_string(ConformalClass::Z_G), "Z_G");
}

TEST(Classifier, ScalingInvariance) {
    for (const char* name : {"flat-torus", "round-fiber", "hyperbolic-fiber", "bumpy-hyperbolic"}) {
        const auto m = warped_preset(name, 64);
        const auto base = classify_conformal_class(m).verdict;
        for (double c : {0.1, 10.0}) EXPECT_EQ(classify_conformal_class(m.scaled(c)).verdict, base) << name;
    }
}

TEST(Classifier, ConstantFunctionIsFlatEigenvector) {
    const auto c = classify_conformal_class(warped_preset("flat-torus", 64));
    EXPECT_LT((c.eigenfunction.array() - c.eigenfunction.mean()).abs().maxCoeff(), 1e-8);
}
