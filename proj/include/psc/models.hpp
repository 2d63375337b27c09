#pragma once

// Invariant metric families with closed-form curvature.
//
//  * WarpedProductMetric: g = a(r)^2 dr^2 + f(r)^2 g_F over a circle, with a
//    fiber of dimension k >= 2 whose unit metric has constant scalar
//    curvature c_F. The lapse a is 1 for metrics written in arc length; it
//    is carried so that perturbations g + h of the radial coefficient stay in
//    the family.
//  * LeftInvariantMetric: Q(P., .) on a compact Lie algebra written in a
//    Q-orthonormal basis.

#include "psc/quotient_geometry.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace psc {

struct YamabeConstants {
    int n = 0;
    double b_n = 0.0;       // (n-1)/(n-2)
    double gamma_n = 0.0;   // (n+2)/(n-2)
    double two_star = 0.0;  // 2n/(n-2)

    static YamabeConstants for_dimension(int n);
};

class WarpedProductMetric {
public:
    /// Arc-length warped product over `mesh` (which must be a circle).
    WarpedProductMetric(const QuotientMesh& mesh, int fiber_dim, double fiber_scal,
                        Eigen::VectorXd warp);

    /// General diagonal invariant metric a^2 dr^2 + f^2 g_F.
    WarpedProductMetric(const QuotientMesh& mesh, int fiber_dim, double fiber_scal,
                        Eigen::VectorXd warp, Eigen::VectorXd lapse);

    /// Mesh whose weights are the orbit volumes a f^k.
    const QuotientMesh& mesh() const { return mesh_; }
    int fiber_dim() const { return fiber_dim_; }
    int dimension() const { return fiber_dim_ + 1; }
    double fiber_scal() const { return fiber_scal_; }
    const Eigen::VectorXd& warp() const { return warp_; }
    const Eigen::VectorXd& lapse() const { return lapse_; }
    bool is_arclength() const;
    YamabeConstants constants() const { return YamabeConstants::for_dimension(dimension()); }

    /// The metric c * g written in arc length (base circle stretched by sqrt(c)).
    WarpedProductMetric scaled(double c) const;

    /// Same mesh and fiber, different coefficients.
    WarpedProductMetric with_coefficients(Eigen::VectorXd warp, Eigen::VectorXd lapse) const;

private:
    QuotientMesh mesh_;
    int fiber_dim_;
    double fiber_scal_;
    Eigen::VectorXd warp_;
    Eigen::VectorXd lapse_;
};

/// Scalar curvature at node j from the three-point stencil of (a, f):
///   c_F/f^2 - 2k f_ss/f - k(k-1) f_s^2/f^2,   d/ds = (1/a) d/dr,
/// with f_ss in conservative form (1/a)((f'/a))' on the staggered grid.
/// Templated so that Jacobians can be taken with automatic differentiation.
template <class T>
T scal_stencil(const T& a_m, const T& a_0, const T& a_p, const T& f_m, const T& f_0, const T& f_p,
               double h, int k, double fiber_scal) {
    const T a_plus = 0.5 * (a_0 + a_p);
    const T a_minus = 0.5 * (a_0 + a_m);
    const T f_ss = ((f_p - f_0) / a_plus - (f_0 - f_m) / a_minus) / (h * h * a_0);
    const T f_s = (f_p - f_m) / (2.0 * h * a_0);
    return fiber_scal / (f_0 * f_0) - 2.0 * k * f_ss / f_0 - double(k) * (k - 1) * f_s * f_s / (f_0 * f_0);
}

DiscreteFunction scal_warped(const WarpedProductMetric& m);

struct RicciDiagonal {
    DiscreteFunction radial;  // Ric(d_r, d_r)
    DiscreteFunction fiber;   // Ric(V, V) for a unit fiber vector V
};

/// Ricci eigenvalues of an arc-length warped product with Einstein fiber.
RicciDiagonal ricci_warped(const WarpedProductMetric& m);

/// Real Lie algebra given by structure constants c^l_{ij} in a basis that is
/// orthonormal for a bi-invariant inner product Q.
class LieAlgebra {
public:
    explicit LieAlgebra(int dim);

    static LieAlgebra su2();
    static LieAlgebra abelian(int dim);
    /// Direct sum of two algebras (basis of `a` first).
    static LieAlgebra direct_sum(const LieAlgebra& a, const LieAlgebra& b);

    int dim() const { return dim_; }
    double& c(int i, int j, int l) { return c_[(i * dim_ + j) * dim_ + l]; }
    double c(int i, int j, int l) const { return c_[(i * dim_ + j) * dim_ + l]; }

    /// Sets [e_i, e_j] = value * e_l and the antisymmetric partner.
    void set_bracket(int i, int j, int l, double value);

    Eigen::VectorXd bracket(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    /// Matrix of ad_x.
    Eigen::MatrixXd ad(const Eigen::VectorXd& x) const;
    bool is_abelian() const;

    double jacobi_residual() const;
    /// max |c_{ijl} + c_{ilj}|: ad-invariance of Q.
    double invariance_residual() const;

private:
    int dim_;
    std::vector<double> c_;
};

class LeftInvariantMetric {
public:
    /// Validates the Jacobi identity, Q-invariance, and that P is SPD.
    LeftInvariantMetric(LieAlgebra algebra, Eigen::MatrixXd metric_tensor);

    const LieAlgebra& algebra() const { return algebra_; }
    const Eigen::MatrixXd& metric_tensor() const { return p_; }
    int dim() const { return algebra_.dim(); }

private:
    LieAlgebra algebra_;
    Eigen::MatrixXd p_;
};

/// Scalar curvature from the closed form
///   scal = -1/4 sum |[f_i, f_j]|^2 - 1/2 sum B(f_i, f_i)
/// over a g-orthonormal frame f_i (B the Killing form; compact => unimodular).
double scal_left_invariant(const LeftInvariantMetric& m);

/// Unnormalized sectional curvature g(R(X,Y)Y, X) from the Levi-Civita
/// connection of left-invariant fields.
double sectional_left_invariant(const LeftInvariantMetric& m, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y);

/// Cheeger deformation of a left-invariant metric: P_t = (1 + tP)^{-1} P.
LeftInvariantMetric deformed_group_metric(const LeftInvariantMetric& m, double t);

// Named model presets.

struct WarpedPreset {
    int fiber_dim;
    double fiber_scal;
    double length;
    std::string description;
};

/// "round-fiber" (k=3, c_F=6), "flat-torus" (k=3, c_F=0), "bumpy"
/// (k=3, c_F=0, f = 1 + 0.2 sin r), "hyperbolic-fiber" (k=2, c_F=-2),
/// "bumpy-hyperbolic" (k=2, c_F=-2, f = 1 + 0.1 sin r).
/// Throws ConfigError for unknown names.
WarpedProductMetric warped_preset(const std::string& name, int nodes);

/// "su2-biinvariant" or "su2-berger(lambda)".
LeftInvariantMetric group_preset(const std::string& name);

std::vector<std::string> warped_preset_names();

}  // namespace psc
