#include "psc/quotient_geometry.hpp"

#include "psc/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace psc {

std::string_view to_string(Topology t) {
    return t == Topology::circle ? "circle" : "interval";
}

QuotientMesh::QuotientMesh(Topology topology, double length, Eigen::VectorXd weights)
    : topology_(topology), length_(length), weights_(std::move(weights)) {
    const int n = size();
    spacing_ = periodic() ? length_ / n : length_ / (n - 1);
    const double h = spacing_;

    if (periodic()) {
        edge_weights_.resize(n);
        for (int j = 0; j < n; ++j) edge_weights_[j] = 0.5 * (weights_[j] + weights_[(j + 1) % n]);
        masses_ = weights_ * h;
    } else {
        edge_weights_.resize(n - 1);
        for (int j = 0; j + 1 < n; ++j) edge_weights_[j] = 0.5 * (weights_[j] + weights_[j + 1]);
        masses_ = weights_ * h;
        // Half cells at the ends; the half-cell average stays positive when the
        // endpoint orbit is singular (w = 0 there).
        masses_[0] = 0.5 * h * 0.5 * (weights_[0] + edge_weights_[0]);
        masses_[n - 1] = 0.5 * h * 0.5 * (weights_[n - 1] + edge_weights_[n - 2]);
    }
}

QuotientMesh QuotientMesh::from_weights(Topology topology, double length,
                                        const Eigen::VectorXd& weights) {
    const int n = static_cast<int>(weights.size());
    if (n < kMinNodes) {
        std::ostringstream os;
        os << "mesh needs at least " << kMinNodes << " nodes, got " << n;
        throw PreconditionError(os.str());
    }
    if (!(length > 0.0) || !std::isfinite(length)) throw PreconditionError("mesh length must be positive");
    for (int j = 0; j < n; ++j) {
        const bool end = topology == Topology::interval && (j == 0 || j == n - 1);
        const double w = weights[j];
        if (!std::isfinite(w) || w < 0.0 || (!end && w <= 0.0)) {
            std::ostringstream os;
            os << "orbit-volume weight must be positive at interior node " << j << " (got " << w << ")";
            throw PreconditionError(os.str());
        }
    }
    QuotientMesh mesh(topology, length, weights);
    if (!(mesh.volume() > 0.0)) throw PreconditionError("mesh has zero total volume");
    return mesh;
}

QuotientMesh QuotientMesh::build(Topology topology, int node_count, double length,
                                 const std::function<double(double)>& weight) {
    if (node_count < kMinNodes) {
        std::ostringstream os;
        os << "mesh needs at least " << kMinNodes << " nodes, got " << node_count;
        throw PreconditionError(os.str());
    }
    if (!(length > 0.0)) throw PreconditionError("mesh length must be positive");
    const double h = topology == Topology::circle ? length / node_count : length / (node_count - 1);
    Eigen::VectorXd w(node_count);
    for (int j = 0; j < node_count; ++j) w[j] = weight(h * j);
    if (topology == Topology::interval) {
        // sin(pi) is 1e-16, not 0; snap endpoint round-off.
        for (int j : {0, node_count - 1})
            if (std::abs(w[j]) < 1e-14) w[j] = 0.0;
    }
    return from_weights(topology, length, w);
}

QuotientMesh QuotientMesh::with_weights(const Eigen::VectorXd& weights) const {
    return from_weights(topology_, length_, weights);
}

Eigen::VectorXd QuotientMesh::nodes() const {
    Eigen::VectorXd r(size());
    for (int j = 0; j < size(); ++j) r[j] = node(j);
    return r;
}

namespace {

void check_length(const QuotientMesh& mesh, const DiscreteFunction& u) {
    if (u.size() != mesh.size()) {
        std::ostringstream os;
        os << "function has " << u.size() << " samples, mesh has " << mesh.size() << " nodes";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

double integrate(const QuotientMesh& mesh, const DiscreteFunction& u) {
    check_length(mesh, u);
    return mesh.masses().dot(u);
}

double inner(const QuotientMesh& mesh, const DiscreteFunction& u, const DiscreteFunction& v) {
    check_length(mesh, u);
    check_length(mesh, v);
    return (mesh.masses().array() * u.array() * v.array()).sum();
}

double weighted_lp_norm(const QuotientMesh& mesh, const DiscreteFunction& u, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("Lp norm needs p >= 1");
    check_length(mesh, u);
    const double s = (mesh.masses().array() * u.array().abs().pow(p)).sum();
    return std::pow(s, 1.0 / p);
}

DiscreteFunction derivative(const QuotientMesh& mesh, const DiscreteFunction& u) {
    check_length(mesh, u);
    const int n = mesh.size();
    const double h = mesh.spacing();
    DiscreteFunction du(n);
    if (mesh.periodic()) {
        for (int j = 0; j < n; ++j) du[j] = (u[(j + 1) % n] - u[(j + n - 1) % n]) / (2.0 * h);
    } else {
        for (int j = 1; j + 1 < n; ++j) du[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
        du[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
        du[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    }
    return du;
}

DiscreteFunction second_derivative(const QuotientMesh& mesh, const DiscreteFunction& u) {
    check_length(mesh, u);
    const int n = mesh.size();
    const double h2 = mesh.spacing() * mesh.spacing();
    DiscreteFunction d2(n);
    if (mesh.periodic()) {
        for (int j = 0; j < n; ++j) d2[j] = (u[(j + 1) % n] - 2.0 * u[j] + u[(j + n - 1) % n]) / h2;
    } else {
        for (int j = 1; j + 1 < n; ++j) d2[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / h2;
        d2[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
        d2[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    }
    return d2;
}

DiscreteFunction laplacian(const QuotientMesh& mesh, const DiscreteFunction& u) {
    check_length(mesh, u);
    const int n = mesh.size();
    const double h = mesh.spacing();
    const auto& we = mesh.edge_weights();
    const auto& m = mesh.masses();
    DiscreteFunction lu = DiscreteFunction::Zero(n);
    const int edges = static_cast<int>(we.size());
    for (int e = 0; e < edges; ++e) {
        const int a = e;
        const int b = (e + 1) % n;
        const double flux = we[e] * (u[b] - u[a]) / h;
        lu[a] += flux;
        lu[b] -= flux;
    }
    return lu.cwiseQuotient(m);
}

double dirichlet_form(const QuotientMesh& mesh, const DiscreteFunction& u, const DiscreteFunction& v) {
    check_length(mesh, u);
    check_length(mesh, v);
    const int n = mesh.size();
    const double h = mesh.spacing();
    const auto& we = mesh.edge_weights();
    double s = 0.0;
    for (int e = 0; e < we.size(); ++e) {
        const int b = (e + 1) % n;
        s += we[e] * (u[b] - u[e]) * (v[b] - v[e]);
    }
    return s / h;
}

Eigen::MatrixXd laplacian_matrix(const QuotientMesh& mesh) {
    const int n = mesh.size();
    const double h = mesh.spacing();
    const auto& we = mesh.edge_weights();
    const auto& m = mesh.masses();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < we.size(); ++e) {
        const int a = e;
        const int b = (e + 1) % n;
        const double c = we[e] / h;
        lap(a, b) += c / m[a];
        lap(a, a) -= c / m[a];
        lap(b, a) += c / m[b];
        lap(b, b) -= c / m[b];
    }
    return lap;
}

DiscreteFunction sample(const QuotientMesh& mesh, const std::function<double(double)>& fn) {
    DiscreteFunction u(mesh.size());
    for (int j = 0; j < mesh.size(); ++j) u[j] = fn(mesh.node(j));
    return u;
}

PeriodicInterpolant::PeriodicInterpolant(const Eigen::VectorXd& samples, double period)
    : period_(period), samples_(static_cast<int>(samples.size())) {
    const int n = samples_;
    if (n < 2) throw std::invalid_argument("interpolant needs at least two samples");
    const int kmax = n / 2;
    cos_ = Eigen::VectorXd::Zero(kmax + 1);
    sin_ = Eigen::VectorXd::Zero(kmax + 1);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int k = 0; k <= kmax; ++k) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < n; ++j) {
            const double th = two_pi * static_cast<double>((static_cast<long>(k) * j) % n) / n;
            a += samples[j] * std::cos(th);
            b += samples[j] * std::sin(th);
        }
        const bool nyquist = (n % 2 == 0) && k == kmax;
        const double scale = (k == 0 || nyquist) ? 1.0 / n : 2.0 / n;
        cos_[k] = a * scale;
        sin_[k] = nyquist ? 0.0 : b * scale;
    }
}

double PeriodicInterpolant::evaluate(double x, int order) const {
    const double omega = 2.0 * std::numbers::pi / period_;
    const double th = omega * x;
    const double c1 = std::cos(th), s1 = std::sin(th);
    double ck = 1.0, sk = 0.0;  // cos(k th), sin(k th) by rotation
    double value = order == 0 ? cos_[0] : 0.0;
    for (int k = 1; k < cos_.size(); ++k) {
        const double cn = ck * c1 - sk * s1;
        sk = sk * c1 + ck * s1;
        ck = cn;
        const double kw = k * omega;
        switch (order) {
            case 0: value += cos_[k] * ck + sin_[k] * sk; break;
            case 1: value += kw * (-cos_[k] * sk + sin_[k] * ck); break;
            default: value += -kw * kw * (cos_[k] * ck + sin_[k] * sk); break;
        }
    }
    return value;
}

double PeriodicInterpolant::antiderivative(double x) const {
    const double omega = 2.0 * std::numbers::pi / period_;
    const double th = omega * x;
    const double c1 = std::cos(th), s1 = std::sin(th);
    double ck = 1.0, sk = 0.0;
    double value = cos_[0] * x;
    for (int k = 1; k < cos_.size(); ++k) {
        const double cn = ck * c1 - sk * s1;
        sk = sk * c1 + ck * s1;
        ck = cn;
        const double kw = k * omega;
        value += (cos_[k] * sk - sin_[k] * (ck - 1.0)) / kw;
    }
    return value;
}

}  // namespace psc
