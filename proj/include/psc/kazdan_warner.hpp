#pragma once

// Prescribing scalar curvature on the warped family by the direct method.
//
// F(g) = scal_g. Its linearization A and formal adjoint
//   A* u = -(Lap u) g + Hess u - u Ric
// act between basic functions and invariant diagonal 2-tensors
// h = a dr^2 + b f^2 g_F. In a g-orthonormal frame h = diag(alpha, beta, ..., beta)
// with alpha = a/lapse^2 and beta = b, so the pairing induced by g is
//   <h1, h2> = int (alpha1 alpha2 + k beta1 beta2) w.
// MetricPerturbation stores (alpha, beta); g + h then has lapse^2 (1 + alpha)
// and warp^2 (1 + beta).

#include "psc/models.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace psc {

struct MetricPerturbation {
    DiscreteFunction a;  // radial coefficient, relative to lapse^2
    DiscreteFunction b;  // fiber coefficient, relative to warp^2

    static MetricPerturbation zero(int n);
    MetricPerturbation operator+(const MetricPerturbation& o) const;
    MetricPerturbation operator*(double s) const;
};

/// Pairing of diagonal tensors induced by the metric.
double tensor_inner(const WarpedProductMetric& metric, const MetricPerturbation& h1,
                    const MetricPerturbation& h2);
double tensor_norm(const WarpedProductMetric& metric, const MetricPerturbation& h);

/// g + t h. Throws PreconditionError if the result leaves the positive cone.
WarpedProductMetric perturbed(const WarpedProductMetric& metric, const MetricPerturbation& h, double t = 1.0);

DiscreteFunction scal_operator_F(const WarpedProductMetric& metric);

/// Central difference of F along h, Richardson-extrapolated once.
DiscreteFunction apply_A(const WarpedProductMetric& metric, const MetricPerturbation& h);

/// Exact Jacobian of the discrete F with respect to (alpha, beta):
/// columns 0..N-1 for alpha, N..2N-1 for beta.
Eigen::MatrixXd linearization_matrix(const WarpedProductMetric& metric);

/// Matrix of the discrete adjoint u -> (alpha; beta), the transpose of
/// linearization_matrix() for the weighted pairings. Size 2N x N.
Eigen::MatrixXd adjoint_matrix(const WarpedProductMetric& metric);

/// Discrete A*: satisfies <A h, u>_w == <h, A* u>_tensor to rounding.
MetricPerturbation apply_A_star(const WarpedProductMetric& metric, const DiscreteFunction& u);

/// The continuum formula on an arc-length metric:
///   alpha = -Lap u + u'' - u Ric_rr,   beta = -Lap u + (f'/f) u' - u Ric_fiber.
/// Agrees with apply_A_star to O(h^2).
MetricPerturbation apply_A_star_formula(const WarpedProductMetric& metric, const DiscreteFunction& u);

/// Smallest singular value of the discrete A* between the weighted spaces.
double kernel_min_singular(const WarpedProductMetric& metric);

struct NewtonConfig {
    double tol = 1e-8;              // max-norm residual of F(g + A* u) - K; rounding floor ~ eps |u| / h^4
    int max_iter = 40;
    double kernel_threshold = 1e-6;  // minimum admissible kernel_min_singular
    double tikhonov_floor = 1e-12;   // shift the Jacobian when its smallest eigenvalue is below this
};

struct NewtonResult {
    WarpedProductMetric metric_out;
    DiscreteFunction u;
    std::vector<double> residuals;  // max-norm residual before each step and at the end
    int iterations = 0;
    bool regularized = false;
};

/// Newton iteration for Q(u) = F(g + A*_g u) = K. The Jacobian at u is
/// A_{g + A*u} A*_g, which is AA* at u = 0.
NewtonResult newton_prescribe(const WarpedProductMetric& metric, const DiscreteFunction& K,
                              const NewtonConfig& cfg = {});

/// Strict c min f < scal < c max f at every node.
bool pinching_check(const DiscreteFunction& f, const DiscreteFunction& scal, double c);

/// Smallest nodewise distance to the pinching bounds (negative when violated).
double pinching_margin(const DiscreteFunction& f, const DiscreteFunction& scal, double c);

/// Orientation-preserving circle diffeomorphism of degree one, given by a
/// monotone piecewise cubic through strictly increasing knots and extended
/// by phi(r + L) = phi(r) + L.
class Diffeo1D {
public:
    Diffeo1D(std::vector<double> x, std::vector<double> y, double period);

    static Diffeo1D identity(double period);
    /// Knots sampled from a smooth increasing map with fn(r + L) = fn(r) + L.
    static Diffeo1D from_function(const std::function<double(double)>& fn, double period, int knots);

    double operator()(double r) const;
    double derivative(double r) const;
    double inverse(double y) const;

    double period() const { return period_; }
    const std::vector<double>& knots_x() const { return x_; }
    const std::vector<double>& knots_y() const { return y_; }

    /// (phi(L) - phi(0)) / L.
    double winding() const;
    /// Samples phi_j and phi'_j at the nodes of a mesh.
    Eigen::VectorXd node_map(const QuotientMesh& mesh) const;
    Eigen::VectorXd node_derivative(const QuotientMesh& mesh) const;
    /// Minimum of phi' over `samples` points per knot interval.
    double min_derivative(int samples = 8) const;

private:
    std::pair<int, double> locate(double r, double& shift) const;

    std::vector<double> x_, y_, d_;
    double period_;
};

/// phi^* g: lapse (a o phi) phi', warp f o phi, with coefficients resampled
/// spectrally.
WarpedProductMetric pullback(const WarpedProductMetric& metric, const Diffeo1D& phi);
/// Pull-back by an arbitrary smooth degree-one map given with its derivative.
WarpedProductMetric pullback(const WarpedProductMetric& metric, const std::function<double(double)>& map,
                             const std::function<double(double)>& map_derivative);
/// (phi^{-1})^* g.
WarpedProductMetric pullback_inverse(const WarpedProductMetric& metric, const Diffeo1D& phi);

/// c g with the same parametrization of the circle.
WarpedProductMetric homothety(const WarpedProductMetric& metric, double c);

struct ApproximationResult {
    Diffeo1D phi;
    double error = 0.0;  // || f o phi - target ||_p
    int cells = 0;
    int jumps = 0;       // transitions across which f leaves the cell values
};

/// Monotone phi with || f o phi - target ||_p < eps (weights from the mesh).
/// The circle is cut into cells on which target is nearly constant; each cell
/// is squeezed onto a point where f takes that constant, and the cells are
/// joined by thin transitions.
ApproximationResult approximate_by_diffeo(const QuotientMesh& mesh, const DiscreteFunction& f,
                                          const DiscreteFunction& target, double p, double eps);

/// || f o phi - target ||_p by Gauss quadrature between the knots of phi.
double composition_error(const QuotientMesh& mesh, const DiscreteFunction& f, const DiscreteFunction& target,
                         const Diffeo1D& phi, double p);

struct PrescribeConfig {
    NewtonConfig newton;
    double p = 2.0;
    double eps = 1e-2;
    double tol = 1e-3;           // required max-norm accuracy of the final scal
    double perturbation = 1e-3;  // bump in f used to leave the kernel exceptions
};

struct PrescribeResult {
    WarpedProductMetric metric_out;
    Diffeo1D phi;
    double c = 1.0;
    double pinching_margin = 0.0;
    std::optional<ApproximationResult> approximation;
    std::optional<NewtonResult> newton;
    double final_error = 0.0;    // || scal(metric_out) - f ||_inf
    bool perturbed_base = false;
};

/// Scale, approximate, solve, pull back.
PrescribeResult full_prescribe(const WarpedProductMetric& metric, const DiscreteFunction& f,
                               const PrescribeConfig& cfg = {});

/// The log grid 10^{-3 .. 3} searched for the scale c.
std::vector<double> scale_grid();

}  // namespace psc
