#include "psc/kazdan_warner.hpp"

#include "psc/errors.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace psc {

MetricPerturbation MetricPerturbation::zero(int n) {
    return {DiscreteFunction::Zero(n), DiscreteFunction::Zero(n)};
}

MetricPerturbation MetricPerturbation::operator+(const MetricPerturbation& o) const { return {a + o.a, b + o.b}; }

MetricPerturbation MetricPerturbation::operator*(double s) const { return {a * s, b * s}; }

namespace {

void check_sizes(const WarpedProductMetric& metric, const MetricPerturbation& h) {
    if (h.a.size() != metric.mesh().size() || h.b.size() != metric.mesh().size())
        throw std::invalid_argument("perturbation does not match the mesh");
}

// d scal_j / d a_i and d scal_j / d f_i as dense matrices (cyclic tridiagonal).
struct CoefficientJacobian {
    Eigen::MatrixXd da;
    Eigen::MatrixXd df;
};

CoefficientJacobian coefficient_jacobian(const WarpedProductMetric& m) {
    using Grad = Eigen::Matrix<double, 6, 1>;
    using AD = Eigen::AutoDiffScalar<Grad>;
    const int n = m.mesh().size();
    const double h = m.mesh().spacing();
    const auto& a = m.lapse();
    const auto& f = m.warp();
    CoefficientJacobian jac{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    for (int j = 0; j < n; ++j) {
        const int idx[3] = {(j + n - 1) % n, j, (j + 1) % n};
        AD av[3], fv[3];
        for (int s = 0; s < 3; ++s) {
            av[s] = AD(a[idx[s]], 6, s);
            fv[s] = AD(f[idx[s]], 6, 3 + s);
        }
        const AD s = scal_stencil(av[0], av[1], av[2], fv[0], fv[1], fv[2], h, m.fiber_dim(), m.fiber_scal());
        for (int t = 0; t < 3; ++t) {
            jac.da(j, idx[t]) += s.derivatives()[t];
            jac.df(j, idx[t]) += s.derivatives()[3 + t];
        }
    }
    return jac;
}

}  // namespace

double tensor_inner(const WarpedProductMetric& metric, const MetricPerturbation& h1, const MetricPerturbation& h2) {
    check_sizes(metric, h1);
    check_sizes(metric, h2);
    const auto& mesh = metric.mesh();
    return inner(mesh, h1.a, h2.a) + metric.fiber_dim() * inner(mesh, h1.b, h2.b);
}

double tensor_norm(const WarpedProductMetric& metric, const MetricPerturbation& h) {
    return std::sqrt(tensor_inner(metric, h, h));
}

WarpedProductMetric perturbed(const WarpedProductMetric& metric, const MetricPerturbation& h, double t) {
    check_sizes(metric, h);
    const Eigen::ArrayXd ra = 1.0 + t * h.a.array();
    const Eigen::ArrayXd rb = 1.0 + t * h.b.array();
    if (!(ra.minCoeff() > 0.0) || !(rb.minCoeff() > 0.0)) {
        std::ostringstream os;
        os << "g + h leaves the positive cone (min radial factor " << ra.minCoeff() << ", min fiber factor "
           << rb.minCoeff() << ")";
        throw PreconditionError(os.str());
    }
    return metric.with_coefficients((metric.warp().array() * rb.sqrt()).matrix(),
                                    (metric.lapse().array() * ra.sqrt()).matrix());
}

DiscreteFunction scal_operator_F(const WarpedProductMetric& metric) { return scal_warped(metric); }

DiscreteFunction apply_A(const WarpedProductMetric& metric, const MetricPerturbation& h) {
    check_sizes(metric, h);
    const double size = std::max(h.a.cwiseAbs().maxCoeff(), h.b.cwiseAbs().maxCoeff());
    if (size == 0.0) return DiscreteFunction::Zero(metric.mesh().size());
    const double tau = 1e-3 / std::max(1.0, size);
    auto central = [&](double t) {
        return ((scal_warped(perturbed(metric, h, t)) - scal_warped(perturbed(metric, h, -t))) / (2.0 * t)).eval();
    };
    return (4.0 * central(0.5 * tau) - central(tau)) / 3.0;
}

Eigen::MatrixXd linearization_matrix(const WarpedProductMetric& metric) {
    const int n = metric.mesh().size();
    const auto jac = coefficient_jacobian(metric);
    // a = lapse sqrt(1 + alpha), f = warp sqrt(1 + beta): derivatives lapse/2, warp/2 at 0.
    Eigen::MatrixXd lin(n, 2 * n);
    lin.leftCols(n) = jac.da * (0.5 * metric.lapse()).asDiagonal();
    lin.rightCols(n) = jac.df * (0.5 * metric.warp()).asDiagonal();
    return lin;
}

Eigen::MatrixXd adjoint_matrix(const WarpedProductMetric& metric) {
    const int n = metric.mesh().size();
    const Eigen::VectorXd& m = metric.mesh().masses();
    const Eigen::MatrixXd lin = linearization_matrix(metric);
    const Eigen::VectorXd inv_m = m.cwiseInverse();
    Eigen::MatrixXd adj(2 * n, n);
    adj.topRows(n) = inv_m.asDiagonal() * lin.leftCols(n).transpose() * m.asDiagonal();
    adj.bottomRows(n) =
        (inv_m / metric.fiber_dim()).asDiagonal() * lin.rightCols(n).transpose() * m.asDiagonal();
    return adj;
}

MetricPerturbation apply_A_star(const WarpedProductMetric& metric, const DiscreteFunction& u) {
    const int n = metric.mesh().size();
    if (u.size() != n) throw std::invalid_argument("function does not match the mesh");
    const Eigen::VectorXd v = adjoint_matrix(metric) * u;
    return {v.head(n), v.tail(n)};
}

MetricPerturbation apply_A_star_formula(const WarpedProductMetric& metric, const DiscreteFunction& u) {
    const auto& mesh = metric.mesh();
    if (u.size() != mesh.size()) throw std::invalid_argument("function does not match the mesh");
    const RicciDiagonal ric = ricci_warped(metric);
    const DiscreteFunction lap = laplacian(mesh, u);
    const DiscreteFunction du = derivative(mesh, u);
    const DiscreteFunction ddu = second_derivative(mesh, u);
    const DiscreteFunction df = derivative(mesh, metric.warp());
    MetricPerturbation h;
    h.a = -lap + ddu - u.cwiseProduct(ric.radial);
    h.b = -lap + df.cwiseQuotient(metric.warp()).cwiseProduct(du) - u.cwiseProduct(ric.fiber);
    return h;
}

double kernel_min_singular(const WarpedProductMetric& metric) {
    const int n = metric.mesh().size();
    const Eigen::VectorXd sm = metric.mesh().masses().cwiseSqrt();
    Eigen::MatrixXd b = adjoint_matrix(metric);
    b.topRows(n) = sm.asDiagonal() * b.topRows(n);
    b.bottomRows(n) = (sm * std::sqrt(double(metric.fiber_dim()))).asDiagonal() * b.bottomRows(n);
    b = b * sm.cwiseInverse().asDiagonal();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(b);
    if (svd.info() != Eigen::Success) throw SolverError("singular value decomposition of A* failed");
    return svd.singularValues().minCoeff();
}

NewtonResult newton_prescribe(const WarpedProductMetric& metric, const DiscreteFunction& K, const NewtonConfig& cfg) {
    const int n = metric.mesh().size();
    if (K.size() != n) throw std::invalid_argument("target does not match the mesh");

    NewtonResult out{metric, DiscreteFunction::Zero(n), {}, 0, false};
    double res = (scal_warped(metric) - K).cwiseAbs().maxCoeff();
    out.residuals.push_back(res);
    if (res < cfg.tol) return out;

    const double sigma = kernel_min_singular(metric);
    if (sigma < cfg.kernel_threshold) {
        std::ostringstream os;
        os << "A* is (nearly) singular: smallest singular value " << sigma << " < " << cfg.kernel_threshold
           << "; the metric is in the exceptional case (F(g) constant or Ricci-flat)";
        throw PreconditionError(os.str());
    }

    const Eigen::MatrixXd adj = adjoint_matrix(metric);
    const Eigen::MatrixXd ax = adj.topRows(n);
    const Eigen::MatrixXd ay = adj.bottomRows(n);
    const Eigen::VectorXd sm = metric.mesh().masses().cwiseSqrt();
    const Eigen::ArrayXd a2 = metric.lapse().array().square();
    const Eigen::ArrayXd f2 = metric.warp().array().square();

    auto at = [&](const DiscreteFunction& u) { return perturbed(metric, {ax * u, ay * u}); };

    WarpedProductMetric current = metric;
    DiscreteFunction u = DiscreteFunction::Zero(n);
    for (int it = 0; it < cfg.max_iter; ++it) {
        const DiscreteFunction r = scal_warped(current) - K;
        const auto jac = coefficient_jacobian(current);
        const Eigen::VectorXd ca = (a2 / (2.0 * current.lapse().array())).matrix();
        const Eigen::VectorXd cf = (f2 / (2.0 * current.warp().array())).matrix();
        Eigen::MatrixXd q = jac.da * ca.asDiagonal() * ax + jac.df * cf.asDiagonal() * ay;

        const Eigen::MatrixXd sym = sm.asDiagonal() * q * sm.cwiseInverse().asDiagonal();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(sym);
        const double smin = svd.singularValues().minCoeff();
        if (smin < cfg.tikhonov_floor) {
            q.diagonal().array() += cfg.tikhonov_floor * std::max(1.0, svd.singularValues().maxCoeff());
            out.regularized = true;
        }
        const DiscreteFunction step = -Eigen::PartialPivLU<Eigen::MatrixXd>(q).solve(r);

        double s = 1.0;
        bool accepted = false;
        while (s > 1e-6) {
            const DiscreteFunction trial = u + s * step;
            try {
                WarpedProductMetric g = at(trial);
                const double tr = (scal_warped(g) - K).cwiseAbs().maxCoeff();
                if (std::isfinite(tr) && tr < (1.0 - 1e-4 * s) * res) {
                    u = trial;
                    current = std::move(g);
                    res = tr;
                    accepted = true;
                    break;
                }
            } catch (const PreconditionError&) {
                // positive cone left; shorten the step
            }
            s *= 0.5;
        }
        out.iterations = it + 1;
        if (!accepted) {
            std::ostringstream os;
            os << "Newton stalled at residual " << res << " after " << it << " iterations";
            throw SolverError(os.str());
        }
        out.residuals.push_back(res);
        if (res < cfg.tol) break;
    }
    if (!(res < cfg.tol)) {
        std::ostringstream os;
        os << "Newton did not reach residual " << cfg.tol << " in " << cfg.max_iter << " iterations (residual "
           << res << ")";
        throw SolverError(os.str());
    }
    out.u = u;
    out.metric_out = current;
    return out;
}

bool pinching_check(const DiscreteFunction& f, const DiscreteFunction& scal, double c) {
    return pinching_margin(f, scal, c) > 0.0;
}

double pinching_margin(const DiscreteFunction& f, const DiscreteFunction& scal, double c) {
    if (!(c > 0.0)) throw PreconditionError("pinching constant c must be positive");
    if (f.size() == 0 || scal.size() == 0) throw std::invalid_argument("empty function");
    const double lo = c * f.minCoeff();
    const double hi = c * f.maxCoeff();
    return std::min((scal.array() - lo).minCoeff(), (hi - scal.array()).minCoeff());
}

// ---------------------------------------------------------------------------

Diffeo1D::Diffeo1D(std::vector<double> x, std::vector<double> y, double period)
    : x_(std::move(x)), y_(std::move(y)), period_(period) {
    const int k = static_cast<int>(x_.size());
    if (k < 1 || y_.size() != x_.size()) throw std::invalid_argument("diffeomorphism needs matching knots");
    if (!(period_ > 0.0)) throw PreconditionError("period must be positive");
    for (int i = 0; i < k; ++i) {
        const double xn = i + 1 < k ? x_[i + 1] : x_[0] + period_;
        const double yn = i + 1 < k ? y_[i + 1] : y_[0] + period_;
        if (!(xn > x_[i]) || !(yn > y_[i]))
            throw PreconditionError("diffeomorphism knots must be strictly increasing within one period");
    }
    // Monotone cubic Hermite slopes (weighted harmonic mean), periodic.
    std::vector<double> h(k), delta(k);
    for (int i = 0; i < k; ++i) {
        const double xn = i + 1 < k ? x_[i + 1] : x_[0] + period_;
        const double yn = i + 1 < k ? y_[i + 1] : y_[0] + period_;
        h[i] = xn - x_[i];
        delta[i] = (yn - y_[i]) / h[i];
    }
    d_.resize(k);
    for (int i = 0; i < k; ++i) {
        const int p = (i + k - 1) % k;
        const double w1 = 2.0 * h[i] + h[p];
        const double w2 = h[i] + 2.0 * h[p];
        d_[i] = (w1 + w2) / (w1 / delta[p] + w2 / delta[i]);
    }
}

Diffeo1D Diffeo1D::identity(double period) { return Diffeo1D({0.0}, {0.0}, period); }

Diffeo1D Diffeo1D::from_function(const std::function<double(double)>& fn, double period, int knots) {
    if (knots < 1) throw std::invalid_argument("need at least one knot");
    std::vector<double> x(knots), y(knots);
    for (int i = 0; i < knots; ++i) {
        x[i] = period * i / knots;
        y[i] = fn(x[i]);
    }
    return Diffeo1D(std::move(x), std::move(y), period);
}

std::pair<int, double> Diffeo1D::locate(double r, double& shift) const {
    const double turns = std::floor((r - x_[0]) / period_);
    shift = turns * period_;
    double rr = r - shift;
    if (rr >= x_[0] + period_) {  // rounding at the seam
        rr -= period_;
        shift += period_;
    }
    const int i = static_cast<int>(std::upper_bound(x_.begin(), x_.end(), rr) - x_.begin()) - 1;
    return {std::max(i, 0), rr};
}

double Diffeo1D::operator()(double r) const {
    double shift = 0.0;
    const auto [i, rr] = locate(r, shift);
    const int k = static_cast<int>(x_.size());
    const double x1 = i + 1 < k ? x_[i + 1] : x_[0] + period_;
    const double y1 = i + 1 < k ? y_[i + 1] : y_[0] + period_;
    const double h = x1 - x_[i];
    const double t = (rr - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double v = (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * y1 +
                     (t3 - t2) * h * d_[(i + 1) % k];
    return v + shift;
}

double Diffeo1D::derivative(double r) const {
    double shift = 0.0;
    const auto [i, rr] = locate(r, shift);
    const int k = static_cast<int>(x_.size());
    const double x1 = i + 1 < k ? x_[i + 1] : x_[0] + period_;
    const double y1 = i + 1 < k ? y_[i + 1] : y_[0] + period_;
    const double h = x1 - x_[i];
    const double t = (rr - x_[i]) / h;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y_[i] + (6 * t - 6 * t2) * y1) / h + (3 * t2 - 4 * t + 1) * d_[i] +
           (3 * t2 - 2 * t) * d_[(i + 1) % k];
}

double Diffeo1D::inverse(double y) const {
    const double turns = std::floor((y - y_[0]) / period_);
    double shift = turns * period_;
    double yy = y - shift;
    if (yy >= y_[0] + period_) {
        yy -= period_;
        shift += period_;
    }
    const int k = static_cast<int>(y_.size());
    const int i = std::max(0, static_cast<int>(std::upper_bound(y_.begin(), y_.end(), yy) - y_.begin()) - 1);
    double lo = x_[i];
    double hi = i + 1 < k ? x_[i + 1] : x_[0] + period_;
    // Safeguarded Newton on the monotone cubic.
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double v = (*this)(x) - yy;
        if (v > 0.0) hi = x; else lo = x;
        const double d = derivative(x);
        double next = d > 0.0 ? x - v / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x)) || hi - lo <= 1e-15 * (1.0 + std::abs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return x + shift;
}

double Diffeo1D::winding() const { return ((*this)(x_[0] + period_) - (*this)(x_[0])) / period_; }

Eigen::VectorXd Diffeo1D::node_map(const QuotientMesh& mesh) const {
    Eigen::VectorXd v(mesh.size());
    for (int j = 0; j < mesh.size(); ++j) v[j] = (*this)(mesh.node(j));
    return v;
}

Eigen::VectorXd Diffeo1D::node_derivative(const QuotientMesh& mesh) const {
    Eigen::VectorXd v(mesh.size());
    for (int j = 0; j < mesh.size(); ++j) v[j] = derivative(mesh.node(j));
    return v;
}

double Diffeo1D::min_derivative(int samples) const {
    const int k = static_cast<int>(x_.size());
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        const double x1 = i + 1 < k ? x_[i + 1] : x_[0] + period_;
        for (int s = 0; s <= samples; ++s) {
            // stay strictly inside so the segment is not confused with its neighbour
            const double t = (s + 0.5) / (samples + 1.0);
            best = std::min(best, derivative(x_[i] + t * (x1 - x_[i])));
        }
        best = std::min(best, d_[i]);
    }
    return best;
}

WarpedProductMetric pullback(const WarpedProductMetric& metric, const std::function<double(double)>& map,
                             const std::function<double(double)>& map_derivative) {
    const auto& mesh = metric.mesh();
    const PeriodicInterpolant a(metric.lapse(), mesh.length());
    const PeriodicInterpolant f(metric.warp(), mesh.length());
    const int n = mesh.size();
    Eigen::VectorXd lapse(n), warp(n);
    for (int j = 0; j < n; ++j) {
        const double y = map(mesh.node(j));
        lapse[j] = a(y) * map_derivative(mesh.node(j));
        warp[j] = f(y);
    }
    return metric.with_coefficients(std::move(warp), std::move(lapse));
}

namespace {

void check_period(const WarpedProductMetric& metric, const Diffeo1D& phi) {
    if (std::abs(phi.period() - metric.mesh().length()) > 1e-12 * metric.mesh().length())
        throw PreconditionError("diffeomorphism period differs from the circle length");
}

}  // namespace

WarpedProductMetric pullback(const WarpedProductMetric& metric, const Diffeo1D& phi) {
    check_period(metric, phi);
    return pullback(metric, [&](double r) { return phi(r); }, [&](double r) { return phi.derivative(r); });
}

WarpedProductMetric pullback_inverse(const WarpedProductMetric& metric, const Diffeo1D& phi) {
    check_period(metric, phi);
    return pullback(
        metric, [&](double r) { return phi.inverse(r); },
        [&](double r) { return 1.0 / phi.derivative(phi.inverse(r)); });
}

WarpedProductMetric homothety(const WarpedProductMetric& metric, double c) {
    if (!(c > 0.0)) throw PreconditionError("metric scale factor must be positive");
    const double s = std::sqrt(c);
    return metric.with_coefficients(metric.warp() * s, metric.lapse() * s);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kGaussX[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                               0.9061798459386640};
constexpr double kGaussW[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};

double composition_error_impl(const PeriodicInterpolant& f, const PeriodicInterpolant& target,
                              const PeriodicInterpolant& w, const Diffeo1D& phi, double p, int nodes) {
    const auto& x = phi.knots_x();
    const int k = static_cast<int>(x.size());
    const double L = phi.period();
    const double max_piece = L / (4.0 * nodes);
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        const double a = x[i];
        const double b = i + 1 < k ? x[i + 1] : x[0] + L;
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / max_piece)));
        const double len = (b - a) / pieces;
        for (int s = 0; s < pieces; ++s) {
            const double mid = a + (s + 0.5) * len;
            for (int g = 0; g < 5; ++g) {
                const double r = mid + 0.5 * len * kGaussX[g];
                const double e = std::abs(f(phi(r)) - target(r));
                total += 0.5 * len * kGaussW[g] * std::pow(e, p) * w(r);
            }
        }
    }
    return std::pow(total, 1.0 / p);
}

// Smallest s in [from, limit] with f(s) = level, searching the dense table
// fs (spacing ds, periodic with `count` samples per lap).
std::optional<double> first_passage(const PeriodicInterpolant& f, const std::vector<double>& fs, double ds,
                                    double from, double value_at_from, double level, double limit, double hit) {
    const int count = static_cast<int>(fs.size());
    auto table = [&](long k) { return fs[static_cast<size_t>(((k % count) + count) % count)]; };
    double s0 = from, v0 = value_at_from - level;
    if (std::abs(v0) <= hit) return from;
    long k = static_cast<long>(std::floor(from / ds)) + 1;
    while (s0 < limit) {
        const double s1 = std::min(k * ds, limit);
        const double v1 = (s1 == k * ds ? table(k) : f(s1)) - level;
        if (v0 * v1 <= 0.0) {
            // Illinois regula falsi on [s0, s1].
            double a = s0, fa = v0, b = s1, fb = v1;
            if (fb == 0.0) return b;
            int side = 0;
            for (int it = 0; it < 80 && b - a > 1e-15 * (1.0 + std::abs(b)); ++it) {
                const double c = (a * fb - b * fa) / (fb - fa);
                const double fc = f(c) - level;
                if (fc == 0.0) return c;
                if (fa * fc < 0.0) {
                    b = c;
                    fb = fc;
                    if (side == -1) fa *= 0.5;
                    side = -1;
                } else {
                    a = c;
                    fa = fc;
                    if (side == 1) fb *= 0.5;
                    side = 1;
                }
            }
            return std::abs(fa) < std::abs(fb) ? a : b;
        }
        s0 = s1;
        v0 = v1;
        ++k;
    }
    return std::nullopt;
}

struct Path {
    std::vector<double> s;      // image of each dense x point
    std::vector<char> jump;     // jump[q]: transition entering x_q (jump[0]: closing the lap)
    int jumps = 0;
};

}  // namespace

double composition_error(const QuotientMesh& mesh, const DiscreteFunction& f, const DiscreteFunction& target,
                         const Diffeo1D& phi, double p) {
    if (!mesh.periodic()) throw PreconditionError("composition error is defined on a circle quotient");
    const PeriodicInterpolant fi(f, mesh.length()), ti(target, mesh.length()), wi(mesh.weights(), mesh.length());
    return composition_error_impl(fi, ti, wi, phi, p, mesh.size());
}

ApproximationResult approximate_by_diffeo(const QuotientMesh& mesh, const DiscreteFunction& f,
                                          const DiscreteFunction& target, double p, double eps) {
    if (!mesh.periodic()) throw PreconditionError("the approximation lemma is built on a circle quotient");
    if (!(p >= 1.0)) throw PreconditionError("approximation needs p >= 1");
    if (!(eps > 0.0)) throw PreconditionError("approximation needs eps > 0");
    const int n = mesh.size();
    if (f.size() != n || target.size() != n) throw std::invalid_argument("functions do not match the mesh");
    const double L = mesh.length();
    const double fmin = f.minCoeff(), fmax = f.maxCoeff();
    const double slack = 1e-12 * (1.0 + std::max(std::abs(fmin), std::abs(fmax)));
    if (target.minCoeff() < fmin - slack || target.maxCoeff() > fmax + slack) {
        std::ostringstream os;
        os << "approximation needs min f <= target <= max f (f in [" << fmin << ", " << fmax << "], target in ["
           << target.minCoeff() << ", " << target.maxCoeff() << "])";
        throw PreconditionError(os.str());
    }

    const PeriodicInterpolant fi(f, L), ti(target, L), wi(mesh.weights(), L);
    if ((f - target).cwiseAbs().maxCoeff() <= slack) {
        const Diffeo1D id = Diffeo1D::identity(L);
        return {id, composition_error_impl(fi, ti, wi, id, p, n), 1, 0};
    }

    // Dense table of f for the passage search.
    const int fcount = 64 * n;
    const double ds = L / fcount;
    std::vector<double> fs(fcount);
    for (int k = 0; k < fcount; ++k) fs[k] = fi(k * ds);
    const double fdmin = *std::min_element(fs.begin(), fs.end());
    const double fdmax = *std::max_element(fs.begin(), fs.end());
    const double range = std::max(fdmax - fdmin, 1e-300);
    const double wmax = mesh.weights().maxCoeff();
    const double hit = 1e-13 * range;

    double best_error = std::numeric_limits<double>::infinity();
    std::optional<ApproximationResult> best;

    for (int refine = 0; refine < 3; ++refine) {
        const int xcount = (16 << (2 * refine)) * n;
        const double dx = L / xcount;
        std::vector<double> tx(xcount);
        for (int q = 0; q < xcount; ++q) tx[q] = std::clamp(ti(q * dx), fdmin, fdmax);
        const int q0 = static_cast<int>(std::min_element(tx.begin(), tx.end()) - tx.begin());
        const double x0 = q0 * dx;
        auto level = [&](int q) { return tx[(q0 + q) % xcount]; };
        const double step_min = 1e-9 * dx;

        // Candidate images of x0: every crossing of its level within one lap.
        std::vector<double> starts;
        {
            double s = 0.0, v = fs[0];
            while (true) {
                auto r = first_passage(fi, fs, ds, s, v, level(0), L, hit);
                if (!r) break;
                if (starts.empty() || *r - starts.back() > 4.0 * ds) starts.push_back(*r);
                s = *r + ds;
                if (s >= L) break;
                v = fi(s);
            }
        }

        std::optional<Path> chosen;
        for (double s0 : starts) {
            Path path;
            path.s.assign(xcount, 0.0);
            path.jump.assign(xcount, 0);
            path.s[0] = s0;
            bool ok = true;
            double cur = s0, cur_val = level(0);
            const double limit = s0 + L;
            for (int q = 1; q < xcount && ok; ++q) {
                const double lev = level(q);
                auto r = first_passage(fi, fs, ds, cur, cur_val, lev, limit, hit);
                if (!r) {
                    ok = false;
                    break;
                }
                const double next = *r;
                if (next >= limit - step_min) {
                    ok = false;
                    break;
                }
                // f must stay between the two levels on the way, else this is a jump.
                const double lo = std::min(lev, level(q - 1)), hi = std::max(lev, level(q - 1));
                const double band = hi - lo + 1e-9 * range;
                for (long k = static_cast<long>(std::floor(cur / ds)) + 1; k * ds < next; ++k) {
                    const double v = fs[static_cast<size_t>(k % fcount)];
                    if (v < lo - band || v > hi + band) {
                        path.jump[q] = 1;
                        break;
                    }
                }
                path.s[q] = next;
                cur = next;
                cur_val = lev;  // f(next) up to the root tolerance; avoids drift on flat targets
            }
            if (!ok) continue;
            {
                const double lo = std::min(level(0), level(xcount - 1)), hi = std::max(level(0), level(xcount - 1));
                const double band = hi - lo + 1e-9 * range;
                for (long k = static_cast<long>(std::floor(cur / ds)) + 1; k * ds < s0 + L; ++k) {
                    const double v = fs[static_cast<size_t>(k % fcount)];
                    if (v < lo - band || v > hi + band) {
                        path.jump[0] = 1;
                        break;
                    }
                }
            }
            path.jumps = static_cast<int>(std::count(path.jump.begin(), path.jump.end(), 1));
            if (!chosen || path.jumps < chosen->jumps) chosen = std::move(path);
        }
        if (!chosen) {
            throw PreconditionError(
                "no monotone map of degree one carries f onto the target: the target oscillates more often than f");
        }

        // Transition width from the budget (eps/2)^p for the jumps.
        double tau = dx / 4.0;
        if (chosen->jumps > 0)
            tau = std::min(tau, std::pow(0.5 * eps, p) / (chosen->jumps * std::pow(range, p) * wmax));
        tau = std::max(tau, 1e-13 * L);

        std::vector<double> kx, ky;
        kx.reserve(xcount + chosen->jumps + 1);
        ky.reserve(xcount + chosen->jumps + 1);
        for (int q = 0; q < xcount; ++q) {
            const double xq = x0 + q * dx;
            if (q > 0 && chosen->jump[q]) {
                kx.push_back(xq - tau);
                ky.push_back(chosen->s[q - 1] + step_min);
            }
            kx.push_back(xq);
            ky.push_back(chosen->s[q]);
        }
        if (chosen->jump[0]) {
            kx.push_back(x0 + L - tau);
            ky.push_back(chosen->s[xcount - 1] + step_min);
        }
        for (size_t i = 1; i < ky.size(); ++i) ky[i] = std::max(ky[i], ky[i - 1] + step_min);
        if (!(ky.back() < ky.front() + L)) continue;

        Diffeo1D phi(std::move(kx), std::move(ky), L);
        const double err = composition_error_impl(fi, ti, wi, phi, p, n);
        if (err < best_error) {
            best_error = err;
            best = ApproximationResult{phi, err, xcount, chosen->jumps};
        }
        if (err < eps) return *best;
    }
    std::ostringstream os;
    os << "eps = " << eps << " is too small for the mesh resolution; achievable ||f o phi - target||_" << p
       << " ~ " << best_error;
    throw PreconditionError(os.str());
}

// ---------------------------------------------------------------------------

std::vector<double> scale_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 60; ++i) grid.push_back(std::pow(10.0, -3.0 + 0.1 * i));
    return grid;
}

PrescribeResult full_prescribe(const WarpedProductMetric& metric, const DiscreteFunction& f,
                               const PrescribeConfig& cfg) {
    const auto& mesh = metric.mesh();
    const int n = mesh.size();
    if (f.size() != n) throw std::invalid_argument("prescribed function does not match the mesh");
    const double L = mesh.length();

    PrescribeResult out{metric, Diffeo1D::identity(L), 1.0, 0.0, std::nullopt, std::nullopt, 0.0, false};
    DiscreteFunction scal = scal_warped(metric);
    if ((scal - f).cwiseAbs().maxCoeff() < cfg.newton.tol) {
        out.final_error = (scal - f).cwiseAbs().maxCoeff();
        return out;
    }

    WarpedProductMetric base = metric;
    if (kernel_min_singular(base) < cfg.newton.kernel_threshold) {
        // Leave the exceptional set by an invariant bump of the warping function.
        DiscreteFunction bump(n);
        for (int j = 0; j < n; ++j)
            bump[j] = 1.0 + cfg.perturbation * std::sin(2.0 * std::numbers::pi * mesh.node(j) / L);
        base = metric.with_coefficients(metric.warp().cwiseProduct(bump), metric.lapse());
        out.perturbed_base = true;
        scal = scal_warped(base);
    }

    double best_c = 0.0, best_margin = 0.0;
    for (double c : scale_grid()) {
        const double m = pinching_margin(f, scal, c);
        if (m > best_margin) {
            best_margin = m;
            best_c = c;
        }
    }
    if (best_c == 0.0) {
        std::ostringstream os;
        os << "(condition1) pinching fails: no c in [1e-3, 1e3] gives c min f < scal_g < c max f (min f = "
           << f.minCoeff() << ", max f = " << f.maxCoeff() << ", scal in [" << scal.minCoeff() << ", "
           << scal.maxCoeff() << "])";
        throw PreconditionError(os.str());
    }
    out.c = best_c;
    out.pinching_margin = best_margin;

    // Newton towards c f o phi, first with phi = id, then with finer approximations.
    std::optional<NewtonResult> solved;
    std::string last_error;
    const PeriodicInterpolant fi(f, L);
    std::vector<double> levels = {0.0, cfg.eps, cfg.eps / 3.0, cfg.eps / 10.0, cfg.eps / 30.0, cfg.eps / 100.0};
    for (double eps : levels) {
        DiscreteFunction K(n);
        std::optional<ApproximationResult> approx;
        if (eps == 0.0) {
            K = best_c * f;
        } else {
            try {
                approx = approximate_by_diffeo(base.mesh(), f, scal / best_c, cfg.p, eps);
            } catch (const PreconditionError& e) {
                last_error = e.what();
                continue;
            }
            for (int j = 0; j < n; ++j) K[j] = best_c * fi(approx->phi(mesh.node(j)));
        }
        try {
            solved = newton_prescribe(base, K, cfg.newton);
        } catch (const SolverError& e) {
            last_error = e.what();
            continue;
        }
        if (approx) {
            out.phi = approx->phi;
            out.approximation = approx;
        }
        break;
    }
    if (!solved) throw SolverError("no approximation level led to a Newton solution: " + last_error);

    const WarpedProductMetric scaled = homothety(solved->metric_out, best_c);
    out.metric_out = out.approximation ? pullback_inverse(scaled, out.phi) : scaled;
    out.newton = std::move(solved);
    out.final_error = (scal_warped(out.metric_out) - f).cwiseAbs().maxCoeff();
    if (!(out.final_error < cfg.tol)) {
        std::ostringstream os;
        os << "assembled metric misses the target: ||scal - f||_inf = " << out.final_error << " >= " << cfg.tol;
        throw SolverError(os.str());
    }
    return out;
}

}  // namespace psc
