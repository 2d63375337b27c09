#pragma once

// Weighted one-dimensional calculus on an orbit space.
//
// A G-invariant function on M is determined by its trace on the quotient
// M/G. When the quotient is one-dimensional (a circle, or an interval whose
// endpoints are singular orbits), integrals over M reduce to integrals over
// the quotient against w(r) dr, where w is the volume of the orbit through r.
// Every integral in this library goes through the single quadrature defined
// here, so discrete adjointness statements are exact matrix identities.

#include <Eigen/Dense>

#include <functional>
#include <string_view>

namespace psc {

/// Samples of a basic function, one value per mesh node.
using DiscreteFunction = Eigen::VectorXd;

enum class Topology { circle, interval };

std::string_view to_string(Topology t);

class QuotientMesh {
public:
    static constexpr int kMinNodes = 16;

    /// Uniform mesh of `node_count` nodes on a circle of circumference
    /// `length` (no duplicated endpoint) or on the closed interval [0, length].
    /// Throws PreconditionError if N < 16, length <= 0, or the weight is not
    /// positive away from the interval endpoints.
    static QuotientMesh build(Topology topology, int node_count, double length,
                              const std::function<double(double)>& weight);

    /// Same as build() with explicit weight samples.
    static QuotientMesh from_weights(Topology topology, double length,
                                     const Eigen::VectorXd& weights);

    Topology topology() const { return topology_; }
    bool periodic() const { return topology_ == Topology::circle; }
    int size() const { return static_cast<int>(weights_.size()); }
    double length() const { return length_; }
    double spacing() const { return spacing_; }
    double node(int j) const { return spacing_ * j; }
    Eigen::VectorXd nodes() const;

    /// Orbit-volume weights w_j.
    const Eigen::VectorXd& weights() const { return weights_; }

    /// Quadrature masses: w_j h in the interior (and everywhere on a circle);
    /// at interval endpoints, h/2 times the mean of w over the half cell.
    const Eigen::VectorXd& masses() const { return masses_; }

    /// Weights at the midpoints j + 1/2 (arithmetic mean of neighbours).
    /// Length N on a circle, N - 1 on an interval.
    const Eigen::VectorXd& edge_weights() const { return edge_weights_; }

    double volume() const { return masses_.sum(); }

    /// Mesh with the same nodes and new weights.
    QuotientMesh with_weights(const Eigen::VectorXd& weights) const;

private:
    QuotientMesh(Topology topology, double length, Eigen::VectorXd weights);

    Topology topology_;
    double length_;
    double spacing_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd masses_;
    Eigen::VectorXd edge_weights_;
};

double integrate(const QuotientMesh& mesh, const DiscreteFunction& u);

/// Weighted L2 pairing <u, v>_w.
double inner(const QuotientMesh& mesh, const DiscreteFunction& u, const DiscreteFunction& v);

double weighted_lp_norm(const QuotientMesh& mesh, const DiscreteFunction& u, double p);

/// Second-order central difference; one-sided second order at interval ends.
DiscreteFunction derivative(const QuotientMesh& mesh, const DiscreteFunction& u);

/// Unweighted second difference u'' (periodic, or one-sided at interval ends).
DiscreteFunction second_derivative(const QuotientMesh& mesh, const DiscreteFunction& u);

/// Divergence-form operator (1/w)(w u')' with zero flux at interval ends.
/// Self-adjoint for inner() and annihilates constants.
DiscreteFunction laplacian(const QuotientMesh& mesh, const DiscreteFunction& u);

/// Staggered Dirichlet pairing sum_j w_{j+1/2} (u_{j+1}-u_j)(v_{j+1}-v_j) / h,
/// satisfying inner(laplacian(u), v) == -dirichlet_form(u, v) exactly.
double dirichlet_form(const QuotientMesh& mesh, const DiscreteFunction& u,
                      const DiscreteFunction& v);

/// The dense matrix of laplacian().
Eigen::MatrixXd laplacian_matrix(const QuotientMesh& mesh);

DiscreteFunction sample(const QuotientMesh& mesh, const std::function<double(double)>& fn);

/// Trigonometric interpolant of uniform periodic samples on [0, L).
/// Exact for trigonometric polynomials below the Nyquist frequency.
class PeriodicInterpolant {
public:
    PeriodicInterpolant(const Eigen::VectorXd& samples, double period);

    double operator()(double x) const { return evaluate(x, 0); }
    double derivative(double x) const { return evaluate(x, 1); }
    double second_derivative(double x) const { return evaluate(x, 2); }

    double mean() const { return cos_[0]; }
    double period() const { return period_; }

    /// Antiderivative vanishing at x = 0 (includes the linear mean term).
    double antiderivative(double x) const;

private:
    double evaluate(double x, int order) const;

    double period_;
    int samples_;
    Eigen::VectorXd cos_;  // a_k
    Eigen::VectorXd sin_;  // b_k
};

}  // namespace psc
