#pragma once

// Canonical variation g~ = g|_H + s g|_V of a Riemannian submersion with
// totally geodesic fibers, evaluated pointwise from tables of sectional
// curvatures in a g-orthonormal frame adapted to H + V.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace psc {

struct SubmersionPointData {
    int base_dim = 0;
    int fiber_dim = 0;
    Eigen::MatrixXd K_base;    // n x n, K_h(dpi e_i, dpi e_j)
    Eigen::MatrixXd K_tot_HH;  // n x n, K_g(e_i, e_j)
    Eigen::MatrixXd K_mixed;   // n x k, K_g(e_i, v_j)
    double fiber_scal = 0.0;
    Eigen::MatrixXd K_fiber;   // optional k x k table of fiber sectionals; must sum to fiber_scal

    double base_scal() const;  // sum over ordered pairs of K_base
};

/// Throws PreconditionError on inconsistent tables.
void validate(const SubmersionPointData& d);

/// Base of dimension n with constant sectional curvature scal_h / (n(n-1)),
/// K_tot_HH = K_base, no mixed curvature, fiber of dimension k with the given scal.
SubmersionPointData submersion_from_scalars(int n, int k, double scal_h, double fiber_scal);

enum class PlaneType { HH, HV, VV };

struct Plane {
    PlaneType type;
    int i = 0;
    int j = 0;
    std::optional<double> fiber_K;  // VV only; defaults to the K_fiber table
};

double cv_sectional(const SubmersionPointData& d, double s, const Plane& plane);

/// scal_h (1 - s) + s sum K~_HH + 2 s sum K_mixed + fiber_scal / s.
double cv_scal(const SubmersionPointData& d, double s);

/// Largest s* with cv_scal > 0 on (0, s*); nullopt when positive up to 1e6.
std::optional<double> positivity_threshold(const SubmersionPointData& d);

struct SectionalExtremes {
    double hh_min, hh_max, hv_min, hv_max;
};

/// Extremes over the tabulated planes (HV is 0/0 when k or n is empty).
SectionalExtremes cv_sectional_extremes(const SubmersionPointData& d, double s);

SubmersionPointData submersion_preset(const std::string& name);
std::vector<std::string> submersion_preset_names();

}  // namespace psc
