#include "psc/models.hpp"

#include "psc/errors.hpp"

#include <cmath>
#include <numbers>
#include <regex>
#include <sstream>

namespace psc {

YamabeConstants YamabeConstants::for_dimension(int n) {
    if (n < 3) throw PreconditionError("Yamabe constants need dimension n >= 3");
    YamabeConstants k;
    k.n = n;
    k.b_n = double(n - 1) / (n - 2);
    k.gamma_n = double(n + 2) / (n - 2);
    k.two_star = 2.0 * n / (n - 2);
    return k;
}

namespace {

Eigen::VectorXd orbit_volume(const Eigen::VectorXd& warp, const Eigen::VectorXd& lapse, int k) {
    return lapse.array() * warp.array().pow(k);
}

}  // namespace

WarpedProductMetric::WarpedProductMetric(const QuotientMesh& mesh, int fiber_dim, double fiber_scal,
                                         Eigen::VectorXd warp)
    : WarpedProductMetric(mesh, fiber_dim, fiber_scal, warp, Eigen::VectorXd::Ones(warp.size())) {}

WarpedProductMetric::WarpedProductMetric(const QuotientMesh& mesh, int fiber_dim, double fiber_scal,
                                         Eigen::VectorXd warp, Eigen::VectorXd lapse)
    : mesh_(mesh), fiber_dim_(fiber_dim), fiber_scal_(fiber_scal), warp_(std::move(warp)),
      lapse_(std::move(lapse)) {
    if (!mesh.periodic()) throw PreconditionError("warped products are built over a circle quotient");
    if (fiber_dim_ < 2) throw PreconditionError("fiber dimension must be >= 2 (total dimension n >= 3)");
    if (!std::isfinite(fiber_scal_)) throw PreconditionError("fiber scalar curvature must be finite");
    if (warp_.size() != mesh.size() || lapse_.size() != mesh.size())
        throw std::invalid_argument("metric coefficients do not match the mesh");
    for (int j = 0; j < warp_.size(); ++j) {
        if (!(warp_[j] > 0.0) || !std::isfinite(warp_[j])) {
            std::ostringstream os;
            os << "warping function must be positive (node " << j << ": " << warp_[j] << ")";
            throw PreconditionError(os.str());
        }
        if (!(lapse_[j] > 0.0) || !std::isfinite(lapse_[j])) {
            std::ostringstream os;
            os << "radial coefficient must be positive (node " << j << ": " << lapse_[j] << ")";
            throw PreconditionError(os.str());
        }
    }
    mesh_ = mesh.with_weights(orbit_volume(warp_, lapse_, fiber_dim_));
}

bool WarpedProductMetric::is_arclength() const {
    return (lapse_.array() == 1.0).all();
}

WarpedProductMetric WarpedProductMetric::scaled(double c) const {
    if (!(c > 0.0)) throw PreconditionError("metric scale factor must be positive");
    if (!is_arclength()) throw PreconditionError("scaled() expects an arc-length metric");
    const double s = std::sqrt(c);
    auto mesh = QuotientMesh::from_weights(Topology::circle, mesh_.length() * s, mesh_.weights());
    return WarpedProductMetric(mesh, fiber_dim_, fiber_scal_, warp_ * s);
}

WarpedProductMetric WarpedProductMetric::with_coefficients(Eigen::VectorXd warp, Eigen::VectorXd lapse) const {
    return WarpedProductMetric(mesh_, fiber_dim_, fiber_scal_, std::move(warp), std::move(lapse));
}

DiscreteFunction scal_warped(const WarpedProductMetric& m) {
    const int n = m.mesh().size();
    const double h = m.mesh().spacing();
    const auto& a = m.lapse();
    const auto& f = m.warp();
    DiscreteFunction s(n);
    for (int j = 0; j < n; ++j) {
        const int jm = (j + n - 1) % n;
        const int jp = (j + 1) % n;
        s[j] = scal_stencil(a[jm], a[j], a[jp], f[jm], f[j], f[jp], h, m.fiber_dim(), m.fiber_scal());
    }
    return s;
}

RicciDiagonal ricci_warped(const WarpedProductMetric& m) {
    if (!m.is_arclength()) throw PreconditionError("ricci_warped expects an arc-length metric");
    const auto& mesh = m.mesh();
    const auto& f = m.warp();
    const int k = m.fiber_dim();
    const DiscreteFunction fp = derivative(mesh, f);
    const DiscreteFunction fpp = second_derivative(mesh, f);
    RicciDiagonal ric;
    ric.radial = -k * fpp.cwiseQuotient(f);
    ric.fiber = (-fpp.array() / f.array() - (k - 1) * fp.array().square() / f.array().square() +
                 (m.fiber_scal() / k) / f.array().square())
                    .matrix();
    return ric;
}

// ---------------------------------------------------------------------------

LieAlgebra::LieAlgebra(int dim) : dim_(dim), c_(static_cast<size_t>(dim) * dim * dim, 0.0) {
    if (dim < 1) throw std::invalid_argument("Lie algebra dimension must be positive");
}

LieAlgebra LieAlgebra::su2() {
    LieAlgebra g(3);
    g.set_bracket(0, 1, 2, 1.0);
    g.set_bracket(1, 2, 0, 1.0);
    g.set_bracket(2, 0, 1, 1.0);
    return g;
}

LieAlgebra LieAlgebra::abelian(int dim) { return LieAlgebra(dim); }

LieAlgebra LieAlgebra::direct_sum(const LieAlgebra& a, const LieAlgebra& b) {
    LieAlgebra s(a.dim() + b.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j)
            for (int l = 0; l < a.dim(); ++l) s.c(i, j, l) = a.c(i, j, l);
    const int o = a.dim();
    for (int i = 0; i < b.dim(); ++i)
        for (int j = 0; j < b.dim(); ++j)
            for (int l = 0; l < b.dim(); ++l) s.c(o + i, o + j, o + l) = b.c(i, j, l);
    return s;
}

void LieAlgebra::set_bracket(int i, int j, int l, double value) {
    c(i, j, l) = value;
    c(j, i, l) = -value;
}

Eigen::VectorXd LieAlgebra::bracket(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim_);
    for (int i = 0; i < dim_; ++i) {
        if (x[i] == 0.0) continue;
        for (int j = 0; j < dim_; ++j) {
            const double xy = x[i] * y[j];
            if (xy == 0.0) continue;
            for (int l = 0; l < dim_; ++l) z[l] += xy * c(i, j, l);
        }
    }
    return z;
}

Eigen::MatrixXd LieAlgebra::ad(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int j = 0; j < dim_; ++j) m.col(j) = bracket(x, Eigen::VectorXd::Unit(dim_, j));
    return m;
}

bool LieAlgebra::is_abelian() const {
    for (double v : c_)
        if (v != 0.0) return false;
    return true;
}

double LieAlgebra::jacobi_residual() const {
    double worst = 0.0;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            for (int k = 0; k < dim_; ++k) {
                const auto ei = Eigen::VectorXd::Unit(dim_, i);
                const auto ej = Eigen::VectorXd::Unit(dim_, j);
                const auto ek = Eigen::VectorXd::Unit(dim_, k);
                const Eigen::VectorXd r = bracket(ei, bracket(ej, ek)) + bracket(ej, bracket(ek, ei)) +
                                          bracket(ek, bracket(ei, ej));
                worst = std::max(worst, r.cwiseAbs().maxCoeff());
            }
    return worst;
}

double LieAlgebra::invariance_residual() const {
    double worst = 0.0;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            for (int l = 0; l < dim_; ++l) worst = std::max(worst, std::abs(c(i, j, l) + c(i, l, j)));
    return worst;
}

LeftInvariantMetric::LeftInvariantMetric(LieAlgebra algebra, Eigen::MatrixXd metric_tensor)
    : algebra_(std::move(algebra)), p_(std::move(metric_tensor)) {
    const int d = algebra_.dim();
    if (p_.rows() != d || p_.cols() != d) throw PreconditionError("metric tensor has the wrong size");
    if ((p_ - p_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + p_.cwiseAbs().maxCoeff()))
        throw PreconditionError("metric tensor must be symmetric");
    p_ = 0.5 * (p_ + p_.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p_, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw PreconditionError("metric tensor must be positive definite");
    if (algebra_.jacobi_residual() > 1e-10) throw PreconditionError("structure constants violate the Jacobi identity");
    if (algebra_.invariance_residual() > 1e-10)
        throw PreconditionError("structure constants are not antisymmetric in a Q-orthonormal basis");
}

namespace {

// g-orthonormal frame, columns in Q-coordinates.
Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal();
}

}  // namespace

double scal_left_invariant(const LeftInvariantMetric& m) {
    const auto& alg = m.algebra();
    const auto& p = m.metric_tensor();
    const Eigen::MatrixXd frame = orthonormal_frame(p);
    const int d = m.dim();
    double brackets = 0.0;
    double killing = 0.0;
    for (int i = 0; i < d; ++i) {
        const Eigen::MatrixXd ad = alg.ad(frame.col(i));
        killing += (ad * ad).trace();
        for (int j = 0; j < d; ++j) {
            const Eigen::VectorXd b = alg.bracket(frame.col(i), frame.col(j));
            brackets += b.dot(p * b);
        }
    }
    return -0.25 * brackets - 0.5 * killing;
}

namespace {

struct Connection {
    const LeftInvariantMetric& m;
    Eigen::LLT<Eigen::MatrixXd> p_inv;

    explicit Connection(const LeftInvariantMetric& metric) : m(metric), p_inv(metric.metric_tensor()) {}

    // g(ad_x^* y, z) = g(y, [x, z])
    Eigen::VectorXd ad_adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        const Eigen::MatrixXd ad = m.algebra().ad(x);
        return p_inv.solve(ad.transpose() * (m.metric_tensor() * y));
    }

    Eigen::VectorXd nabla(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        return 0.5 * (m.algebra().bracket(x, y) - ad_adjoint(x, y) - ad_adjoint(y, x));
    }
};

}  // namespace

double sectional_left_invariant(const LeftInvariantMetric& m, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y) {
    const Connection nab(m);
    const Eigen::VectorXd ryy =
        nab.nabla(x, nab.nabla(y, y)) - nab.nabla(y, nab.nabla(x, y)) - nab.nabla(m.algebra().bracket(x, y), y);
    return ryy.dot(m.metric_tensor() * x);
}

LeftInvariantMetric deformed_group_metric(const LeftInvariantMetric& m, double t) {
    if (!(t >= 0.0)) throw PreconditionError("Cheeger time must be >= 0");
    const auto& p = m.metric_tensor();
    const int d = m.dim();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) + t * p;
    Eigen::MatrixXd pt = a.llt().solve(p);
    pt = 0.5 * (pt + pt.transpose()).eval();
    return LeftInvariantMetric(m.algebra(), pt);
}

// ---------------------------------------------------------------------------

std::vector<std::string> warped_preset_names() {
    return {"round-fiber", "flat-torus", "bumpy", "hyperbolic-fiber", "bumpy-hyperbolic"};
}

WarpedProductMetric warped_preset(const std::string& name, int nodes) {
    const double L = 2.0 * std::numbers::pi;
    auto mesh = QuotientMesh::build(Topology::circle, nodes, L, [](double) { return 1.0; });
    auto constant = [&](double v) { return Eigen::VectorXd::Constant(nodes, v); };
    if (name == "round-fiber") return WarpedProductMetric(mesh, 3, 6.0, constant(1.0));
    if (name == "flat-torus") return WarpedProductMetric(mesh, 3, 0.0, constant(1.0));
    if (name == "bumpy")
        return WarpedProductMetric(mesh, 3, 0.0, sample(mesh, [](double r) { return 1.0 + 0.2 * std::sin(r); }));
    if (name == "hyperbolic-fiber") return WarpedProductMetric(mesh, 2, -2.0, constant(1.0));
    if (name == "bumpy-hyperbolic")
        return WarpedProductMetric(mesh, 2, -2.0, sample(mesh, [](double r) { return 1.0 + 0.1 * std::sin(r); }));
    throw ConfigError("unknown model preset '" + name + "'");
}

LeftInvariantMetric group_preset(const std::string& name) {
    if (name == "su2-biinvariant") return LeftInvariantMetric(LieAlgebra::su2(), Eigen::MatrixXd::Identity(3, 3));
    static const std::regex berger(R"(su2-berger\(\s*([-+0-9.eE]+)\s*\))");
    std::smatch match;
    if (std::regex_match(name, match, berger)) {
        double lambda = 0.0;
        try {
            lambda = std::stod(match[1].str());
        } catch (const std::exception&) {
            throw ConfigError("bad Berger parameter in '" + name + "'");
        }
        Eigen::MatrixXd p = Eigen::MatrixXd::Identity(3, 3);
        p(0, 0) = lambda;
        return LeftInvariantMetric(LieAlgebra::su2(), p);
    }
    throw ConfigError("unknown group preset '" + name + "'");
}

}  // namespace psc
