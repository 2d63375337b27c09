#pragma once

// Constant scalar curvature in a conformal class of invariant metrics.
//
// For g~ = u^{4/(n-2)} g the scalar curvature is u^{-gamma}(-4 b_n Lap u + scal u),
// so constant curvature c' amounts to 4 b_n Lap u - scal u + c' u^gamma = 0.
// The positive case minimizes
//   J(u) = 2 b_n int |u'|^2 + 1/2 int scal u^2 - (c/2*) int |u|^{2*}
// on the set (c/2*) int u^{2*} = eps, u >= 0, where the multiplier lambda of
// the constraint yields c' = (1 + lambda) c. All integrals are over the
// quotient with orbit-volume weights.

#include "psc/models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace psc {

struct ConformalProblem {
    WarpedProductMetric metric;
    double c = 1.0;
    double epsilon = 1.0;

    YamabeConstants constants() const { return metric.constants(); }
};

struct SolverConfig {
    double step = 1.0;                // initial step of the projected gradient
    double tol_residual = 1e-10;      // weighted L2 norm of the Euler-Lagrange defect
    int max_iter = 5000;
    double positivity_floor = 1e-8;   // converged u must stay above this
};

struct ConformalSolution {
    DiscreteFunction u;
    double lagrange = 0.0;       // lambda
    double c_prime = 0.0;        // (1 + lambda) c, or the negative-case constant
    double residual_norm = 0.0;
    int iterations = 0;
    std::vector<double> history;  // J per accepted step (positive case) or residual per Newton step
    double spectral_tail = 0.0;   // share of Fourier energy in the upper half of the modes
};

double functional_J(const ConformalProblem& p, const DiscreteFunction& u);

/// J restricted to the constraint set, extended off it by homogeneity:
/// 2 b_n int |u'|^2 + 1/2 int scal u^2 - eps.
double functional_J_on_constraint(const ConformalProblem& p, const DiscreteFunction& u);

/// Nodal gradient of J for the weighted pairing: -4 b_n Lap u + scal u - c |u|^{gamma-1} u.
DiscreteFunction gradient_J(const ConformalProblem& p, const DiscreteFunction& u);

/// Positive multiple of max(u, 0) with (c/2*) int u^{2*} = eps.
DiscreteFunction project_to_constraint(const ConformalProblem& p, const DiscreteFunction& u);

/// 4 b_n Lap u - scal u + constant u^gamma.
DiscreteFunction el_residual(const WarpedProductMetric& metric, const DiscreteFunction& u, double constant);

/// Scalar curvature of u^{4/(n-2)} g.
DiscreteFunction conformal_scal(const WarpedProductMetric& metric, const DiscreteFunction& u);

/// Positive constant u with el_residual(u, c) = 0 when scal == s0, i.e.
/// (s0/c)^{1/(gamma-1)}; nullopt when no positive root exists.
std::optional<double> constant_root(double s0, double c, int n);

/// Projected gradient descent with H^1 preconditioning on the constraint set.
/// Requires scal >= 0, scal not identically 0, c > 0.
ConformalSolution minimize_on_constraint(const ConformalProblem& p, const SolverConfig& cfg,
                                         std::optional<DiscreteFunction> start = std::nullopt);

/// The lower bound -(2*/2) min scal vol^{1 - 2*/2} (clamped at 0) that the
/// constant of the negative-curvature functional must meet.
double negative_constant_bound(const WarpedProductMetric& metric);

struct NegativeSolve {
    ConformalSolution solution;
    double c_used = 0.0;
};

/// Newton on 4 b_n Lap u - scal u - c' u^gamma = 0 with int u^{2*} = vol.
/// `c` (default max(bound, 1)) is checked against negative_constant_bound and
/// reported as c_used; lagrange = c'/c_used - 1.
NegativeSolve solve_negative_constant(const WarpedProductMetric& metric, const SolverConfig& cfg,
                                      std::optional<double> c = std::nullopt,
                                      std::optional<DiscreteFunction> start = std::nullopt);

/// The conformal metric u^{4/(n-2)} g written again as an arc-length warped
/// product: r~ = int u^{2/(n-2)} dr, f~ = u^{2/(n-2)} f, resampled spectrally
/// on `nodes` uniform points of the new circle.
struct ConformalReparametrization {
    WarpedProductMetric metric;
    Eigen::VectorXd source_points;  // r(r~_i) on the original circle
};

ConformalReparametrization conformal_metric(const WarpedProductMetric& metric, const DiscreteFunction& u,
                                            int nodes);

enum class ConformalClass { P_G, Z_G, N_G };

std::string to_string(ConformalClass c);

struct Classification {
    ConformalClass verdict;
    double lambda1 = 0.0;
    DiscreteFunction eigenfunction;
};

/// Sign of the smallest eigenvalue of u -> -4 b_n Lap u + scal u for the
/// weighted pairing; |lambda1| < tol gives Z_G.
Classification classify_conformal_class(const WarpedProductMetric& metric, double tol = 1e-8);

}  // namespace psc
