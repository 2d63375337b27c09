#pragma once

// Scalar curvature of Cheeger deformations, evaluated pointwise.
//
// At a point x the Lie algebra splits Q-orthogonally as g = m_x + g_x. The
// first `orbit_dim` basis vectors span m_x and the rest span the isotropy
// algebra g_x. P is the endomorphism of m_x with Q(PU, V) = g(U*, V*), and
// C_t is (1 + tP)^{-1} on orbit directions and the identity on the normal
// space. Curvature tables refer to the g-orthonormal frame made of a normal
// frame e_1..e_m followed by the orbit frame v_a* / sqrt(lambda_a), where
// (lambda_a, v_a) is the ascending eigendecomposition of P.

#include "psc/models.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace psc {

struct PEigen {
    Eigen::VectorXd values;   // ascending, > 0
    Eigen::MatrixXd vectors;  // Q-orthonormal columns (coordinates in m_x)
};

struct OrbitData {
    LieAlgebra algebra{1};
    int orbit_dim = 0;   // dim m_x
    Eigen::MatrixXd p;   // orbit_dim x orbit_dim, symmetric positive definite
    int normal_dim = 0;  // dim of the normal space to the orbit

    Eigen::MatrixXd normal_sectionals;  // K_g(e_i, e_j), normal_dim^2
    Eigen::MatrixXd mixed_sectionals;   // K_g(e_i, orbit frame a), normal_dim x orbit_dim
    Eigen::MatrixXd orbit_sectionals;   // K_g(orbit frame a, orbit frame b)

    /// dw_Z(e_i, e_j) = Q(dw_normal[i * m + j], Z); antisymmetric in (i, j).
    /// Holds the m_x components; isotropy components come from IsotropyData.
    std::vector<Eigen::VectorXd> dw_normal;
    /// dw_Z(v_a*, e_i) = Q(dw_mixed[a * m + i], Z) for the Q-orthonormal basis v_a of m_x.
    std::vector<Eigen::VectorXd> dw_mixed;

    int algebra_dim() const { return algebra.dim(); }
    int isotropy_dim() const { return algebra.dim() - orbit_dim; }
    int dim() const { return normal_dim + orbit_dim; }
};

/// Orbit data with every table sized and zeroed.
OrbitData make_orbit_data(LieAlgebra algebra, int orbit_dim, Eigen::MatrixXd p, int normal_dim);

/// Throws PreconditionError on inconsistent dimensions, asymmetric tables, or
/// a P that is not positive definite.
void validate(const OrbitData& o);

/// Differential of the isotropy representation: rho[i] is the
/// normal_dim x isotropy_dim matrix of U -> rho_{e_i}(U).
struct IsotropyData {
    int isotropy_dim = 0;
    std::vector<Eigen::MatrixXd> rho;

    /// From skew-symmetric generators A_U (normal_dim^2 each), rho_{e_i}(U) = A_U e_i.
    static IsotropyData from_generators(const std::vector<Eigen::MatrixXd>& generators);
};

void validate(const OrbitData& o, const IsotropyData& iso);

/// Tangent vector X + U*: normal coordinates and m_x coordinates (Q-orthonormal).
struct SplitVector {
    Eigen::VectorXd normal;
    Eigen::VectorXd orbit;
};

PEigen p_eigendecomposition(const OrbitData& o);

SplitVector c_t_apply(const OrbitData& o, double t, const SplitVector& x);

/// dw_Z(Xbar, Ybar) as the vector a with dw_Z = Q(a, Z), Z in g.
Eigen::VectorXd dw_vector(const OrbitData& o, const IsotropyData* iso, const SplitVector& x,
                          const SplitVector& y);

struct ZtMaximum {
    double value = 0.0;
    Eigen::VectorXd maximizer;  // unit Z attaining the max (empty when the numerator vanishes)
};

/// z_t(Xbar, Ybar) = 3t max_{|Z|_Q = 1} (dw_Z(Xbar,Ybar) + t/2 Q([PU,PV], Z))^2 / (t g(Z*,Z*) + 1).
ZtMaximum z_t_maximize(const OrbitData& o, const IsotropyData* iso, double t, const SplitVector& x,
                       const SplitVector& y);

double z_t_term(const OrbitData& o, const IsotropyData* iso, double t, const SplitVector& x,
                const SplitVector& y);

struct CheegerScal {
    double sectional = 0.0;  // sum K_g(C_t^{1/2} e_i, C_t^{1/2} e_j)
    double z = 0.0;          // sum z_t(C_t^{1/2} e_i, C_t^{1/2} e_j)
    double bracket = 0.0;    // sum lambda_i lambda_j t^3 / ((1+t lambda_i)(1+t lambda_j)) |[v_i,v_j]|^2 / 4
    double total() const { return sectional + z + bracket; }
};

CheegerScal scal_cheeger_terms(const OrbitData& o, const IsotropyData* iso, double t);

double scal_cheeger(const OrbitData& o, const IsotropyData* iso, double t);

/// 1/4 sum |[v_i, v_j]|_Q^2 over a Q-orthonormal basis of m_x.
double scal_bar(const OrbitData& o);

/// sum_{i,j} |e_j^{H_{e_i}}|^4 / |rho_{e_i}^{-1}(e_j^{H_{e_i}})|_Q^2, with H_{e_i} the
/// image of rho_{e_i} and the inverse taken on that image.
double xi(const IsotropyData& iso, int normal_dim);

struct PinchingPoint {
    OrbitData orbit;
    std::optional<IsotropyData> isotropy;
};

/// scal_bar + 3 xi at one point.
double pinching_density(const PinchingPoint& point);

/// max_x (scal_bar + 3xi) / min_x (scal_bar + 3xi). Rejects abelian algebras
/// and a vanishing minimum.
double pinching_limit(const std::vector<PinchingPoint>& points);

/// Orbit data at the identity of a Lie group acting on itself by left
/// translations (no normal directions, trivial isotropy).
OrbitData orbit_data_from_group(const LeftInvariantMetric& m);

/// Smallest grid time t0 in [0, t_max] (log grid, `samples` points) such that
/// scal_cheeger > 0 at every later grid time; nullopt if positivity is not
/// reached by t_max.
std::optional<double> positivity_onset(const OrbitData& o, const IsotropyData* iso, double t_max,
                                       int samples = 200);

/// Named Cheeger points: "su2-biinvariant", "su2-berger(l)", "free-point",
/// "singular-point". Synthetic points carry fixed curvature and dw tables.
PinchingPoint cheeger_preset(const std::string& name);

}  // namespace psc
