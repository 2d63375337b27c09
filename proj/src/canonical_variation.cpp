#include "psc/canonical_variation.hpp"

#include "psc/errors.hpp"

#include <cmath>
#include <sstream>

namespace psc {

double SubmersionPointData::base_scal() const { return K_base.sum(); }

namespace {

void check_table(const Eigen::MatrixXd& t, int rows, int cols, const char* name, bool square) {
    if (t.rows() != rows || t.cols() != cols) {
        std::ostringstream os;
        os << name << " must be " << rows << " x " << cols;
        throw PreconditionError(os.str());
    }
    if (!t.allFinite()) throw PreconditionError(std::string(name) + " has non-finite entries");
    if (square) {
        if ((t - t.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + t.cwiseAbs().maxCoeff()))
            throw PreconditionError(std::string(name) + " must be symmetric");
        if (t.diagonal().cwiseAbs().maxCoeff() != 0.0)
            throw PreconditionError(std::string(name) + " must have a zero diagonal");
    }
}

}  // namespace

void validate(const SubmersionPointData& d) {
    if (d.base_dim < 1) throw PreconditionError("base dimension must be >= 1");
    if (d.fiber_dim < 1) throw PreconditionError("fiber dimension must be >= 1");
    if (!std::isfinite(d.fiber_scal)) throw PreconditionError("fiber scalar curvature must be finite");
    check_table(d.K_base, d.base_dim, d.base_dim, "K_base", true);
    check_table(d.K_tot_HH, d.base_dim, d.base_dim, "K_tot_HH", true);
    check_table(d.K_mixed, d.base_dim, d.fiber_dim, "K_mixed", false);
    if (d.K_fiber.size() != 0) {
        check_table(d.K_fiber, d.fiber_dim, d.fiber_dim, "K_fiber", true);
        if (std::abs(d.K_fiber.sum() - d.fiber_scal) > 1e-12 * (1.0 + std::abs(d.fiber_scal)))
            throw PreconditionError("K_fiber does not sum to fiber_scal");
    }
}

SubmersionPointData submersion_from_scalars(int n, int k, double scal_h, double fiber_scal) {
    SubmersionPointData d;
    d.base_dim = n;
    d.fiber_dim = k;
    const double kb = n > 1 ? scal_h / (n * (n - 1.0)) : 0.0;
    if (n == 1 && scal_h != 0.0) throw PreconditionError("a one-dimensional base is flat");
    d.K_base = Eigen::MatrixXd::Constant(n, n, kb);
    d.K_base.diagonal().setZero();
    d.K_tot_HH = d.K_base;
    d.K_mixed = Eigen::MatrixXd::Zero(n, k);
    d.fiber_scal = fiber_scal;
    if (k > 1) {
        d.K_fiber = Eigen::MatrixXd::Constant(k, k, fiber_scal / (k * (k - 1.0)));
        d.K_fiber.diagonal().setZero();
    } else if (fiber_scal != 0.0) {
        throw PreconditionError("a one-dimensional fiber is flat");
    }
    validate(d);
    return d;
}

double cv_sectional(const SubmersionPointData& d, double s, const Plane& plane) {
    if (!(s > 0.0)) throw PreconditionError("canonical variation needs s > 0");
    auto check = [](int v, int size, const char* what) {
        if (v < 0 || v >= size) {
            std::ostringstream os;
            os << "invalid plane index " << v << " for " << what;
            throw PreconditionError(os.str());
        }
    };
    switch (plane.type) {
        case PlaneType::HH:
            check(plane.i, d.base_dim, "horizontal vectors");
            check(plane.j, d.base_dim, "horizontal vectors");
            if (plane.i == plane.j) throw PreconditionError("a plane needs two distinct basis vectors");
            return d.K_base(plane.i, plane.j) * (1.0 - s) + s * d.K_tot_HH(plane.i, plane.j);
        case PlaneType::HV:
            check(plane.i, d.base_dim, "horizontal vectors");
            check(plane.j, d.fiber_dim, "vertical vectors");
            return s * s * d.K_mixed(plane.i, plane.j);
        case PlaneType::VV: {
            double k;
            if (plane.fiber_K) {
                k = *plane.fiber_K;
            } else {
                check(plane.i, d.fiber_dim, "vertical vectors");
                check(plane.j, d.fiber_dim, "vertical vectors");
                if (plane.i == plane.j) throw PreconditionError("a plane needs two distinct basis vectors");
                if (d.K_fiber.size() == 0) throw PreconditionError("no fiber sectional table available");
                k = d.K_fiber(plane.i, plane.j);
            }
            return s * k;
        }
    }
    throw PreconditionError("unknown plane type");
}

double cv_scal(const SubmersionPointData& d, double s) {
    if (!(s > 0.0)) throw PreconditionError("canonical variation needs s > 0");
    validate(d);
    const double hh = ((1.0 - s) * d.K_base + s * d.K_tot_HH).sum();
    return d.base_scal() * (1.0 - s) + s * hh + 2.0 * s * d.K_mixed.sum() + d.fiber_scal / s;
}

std::optional<double> positivity_threshold(const SubmersionPointData& d) {
    validate(d);
    if (!(d.fiber_scal > 0.0))
        throw PreconditionError("small-s positivity needs a fiber of positive scalar curvature");
    constexpr double s_lo = 1e-9, s_hi = 1e6;
    constexpr int steps = 3000;
    const double ratio = std::pow(s_hi / s_lo, 1.0 / steps);
    double a = s_lo;
    if (!(cv_scal(d, a) > 0.0)) {
        // Only when the other terms are enormous; bisect from 0 upwards.
        a = 0.0;
    }
    double b = s_lo;
    for (int i = 0; i <= steps; ++i) {
        b = s_lo * std::pow(ratio, i);
        if (b <= a) continue;
        if (!(cv_scal(d, b) > 0.0)) {
            double lo = a, hi = b;
            while (hi - lo > 1e-10 * std::max(1.0, hi) && hi - lo > 1e-300) {
                const double mid = 0.5 * (lo + hi);
                if (mid > 0.0 && cv_scal(d, mid) > 0.0) lo = mid; else hi = mid;
            }
            return 0.5 * (lo + hi);
        }
        a = b;
    }
    return std::nullopt;
}

SectionalExtremes cv_sectional_extremes(const SubmersionPointData& d, double s) {
    validate(d);
    SectionalExtremes e{0.0, 0.0, 0.0, 0.0};
    bool hh = false;
    for (int i = 0; i < d.base_dim; ++i)
        for (int j = 0; j < d.base_dim; ++j) {
            if (i == j) continue;
            const double v = cv_sectional(d, s, {PlaneType::HH, i, j, std::nullopt});
            e.hh_min = hh ? std::min(e.hh_min, v) : v;
            e.hh_max = hh ? std::max(e.hh_max, v) : v;
            hh = true;
        }
    bool hv = false;
    for (int i = 0; i < d.base_dim; ++i)
        for (int j = 0; j < d.fiber_dim; ++j) {
            const double v = cv_sectional(d, s, {PlaneType::HV, i, j, std::nullopt});
            e.hv_min = hv ? std::min(e.hv_min, v) : v;
            e.hv_max = hv ? std::max(e.hv_max, v) : v;
            hv = true;
        }
    return e;
}

std::vector<std::string> submersion_preset_names() {
    return {"flat-sphere", "hyperbolic-sphere", "twisted-sphere"};
}

SubmersionPointData submersion_preset(const std::string& name) {
    if (name == "flat-sphere") return submersion_from_scalars(2, 2, 0.0, 2.0);
    if (name == "hyperbolic-sphere") return submersion_from_scalars(2, 2, -4.0, 2.0);
    if (name == "twisted-sphere") {
        // Hyperbolic base, round S^2 fiber and O'Neill-type corrections in the tables.
        SubmersionPointData d = submersion_from_scalars(2, 2, -4.0, 2.0);
        d.K_tot_HH(0, 1) = d.K_tot_HH(1, 0) = -2.0 - 0.75;
        d.K_mixed << 0.25, 0.1, 0.1, 0.25;
        validate(d);
        return d;
    }
    throw ConfigError("unknown submersion preset '" + name + "'");
}

}  // namespace psc
