#include "psc/yamabe.hpp"

#include "psc/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace psc {

namespace {

// Symmetric stiffness matrix S with u^T S v = dirichlet_form(u, v).
Eigen::MatrixXd stiffness(const QuotientMesh& mesh) {
    const Eigen::MatrixXd lap = laplacian_matrix(mesh);
    Eigen::MatrixXd s = -(mesh.masses().asDiagonal() * lap);
    return 0.5 * (s + s.transpose());
}

Eigen::ArrayXd pow_abs(const DiscreteFunction& u, double p) {
    return u.array().abs().pow(p);
}

double weighted_l2(const QuotientMesh& mesh, const DiscreteFunction& r) {
    return std::sqrt(inner(mesh, r, r));
}

double spectral_tail(const DiscreteFunction& u) {
    const int n = static_cast<int>(u.size());
    double total = 0.0, tail = 0.0;
    for (int k = 1; k <= n / 2; ++k) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < n; ++j) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>((static_cast<long>(k) * j) % n) / n;
            a += u[j] * std::cos(th);
            b += u[j] * std::sin(th);
        }
        const double e = a * a + b * b;
        total += e;
        if (k > n / 4) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

void check_size(const WarpedProductMetric& m, const DiscreteFunction& u) {
    if (u.size() != m.mesh().size()) throw std::invalid_argument("conformal factor does not match the mesh");
}

}  // namespace

double functional_J(const ConformalProblem& p, const DiscreteFunction& u) {
    check_size(p.metric, u);
    const auto k = p.constants();
    const auto& mesh = p.metric.mesh();
    const DiscreteFunction scal = scal_warped(p.metric);
    return 2.0 * k.b_n * dirichlet_form(mesh, u, u) + 0.5 * inner(mesh, scal, u.cwiseProduct(u)) -
           p.c / k.two_star * integrate(mesh, pow_abs(u, k.two_star).matrix());
}

double functional_J_on_constraint(const ConformalProblem& p, const DiscreteFunction& u) {
    check_size(p.metric, u);
    const auto k = p.constants();
    const auto& mesh = p.metric.mesh();
    const DiscreteFunction scal = scal_warped(p.metric);
    return 2.0 * k.b_n * dirichlet_form(mesh, u, u) + 0.5 * inner(mesh, scal, u.cwiseProduct(u)) - p.epsilon;
}

DiscreteFunction gradient_J(const ConformalProblem& p, const DiscreteFunction& u) {
    check_size(p.metric, u);
    const auto k = p.constants();
    const DiscreteFunction scal = scal_warped(p.metric);
    const Eigen::ArrayXd nonlinear = pow_abs(u, k.gamma_n - 1.0) * u.array();
    return -4.0 * k.b_n * laplacian(p.metric.mesh(), u) + scal.cwiseProduct(u) - p.c * nonlinear.matrix();
}

DiscreteFunction project_to_constraint(const ConformalProblem& p, const DiscreteFunction& u) {
    check_size(p.metric, u);
    if (!(p.c > 0.0)) throw PreconditionError("constraint (c/2*) int u^{2*} = eps needs c > 0");
    if (!(p.epsilon > 0.0)) throw PreconditionError("constraint level eps must be positive");
    const auto k = p.constants();
    const DiscreteFunction clamped = u.cwiseMax(0.0);
    const double level = p.c / k.two_star * integrate(p.metric.mesh(), pow_abs(clamped, k.two_star).matrix());
    if (!(level > 0.0)) throw PreconditionError("cannot project u = 0 onto the constraint set");
    return clamped * std::pow(p.epsilon / level, 1.0 / k.two_star);
}

DiscreteFunction el_residual(const WarpedProductMetric& metric, const DiscreteFunction& u, double constant) {
    check_size(metric, u);
    const auto k = metric.constants();
    const DiscreteFunction scal = scal_warped(metric);
    return 4.0 * k.b_n * laplacian(metric.mesh(), u) - scal.cwiseProduct(u) +
           constant * pow_abs(u, k.gamma_n).matrix();
}

DiscreteFunction conformal_scal(const WarpedProductMetric& metric, const DiscreteFunction& u) {
    check_size(metric, u);
    if (!(u.minCoeff() > 0.0)) throw PreconditionError("conformal factor must be positive");
    const auto k = metric.constants();
    const DiscreteFunction scal = scal_warped(metric);
    const DiscreteFunction top = -4.0 * k.b_n * laplacian(metric.mesh(), u) + scal.cwiseProduct(u);
    return (top.array() / u.array().pow(k.gamma_n)).matrix();
}

std::optional<double> constant_root(double s0, double c, int n) {
    const auto k = YamabeConstants::for_dimension(n);
    if (c == 0.0 || !(s0 / c > 0.0)) return std::nullopt;
    return std::pow(s0 / c, 1.0 / (k.gamma_n - 1.0));
}

ConformalSolution minimize_on_constraint(const ConformalProblem& p, const SolverConfig& cfg,
                                         std::optional<DiscreteFunction> start) {
    const auto& mesh = p.metric.mesh();
    const int n = mesh.size();
    const auto k = p.constants();
    const DiscreteFunction scal = scal_warped(p.metric);
    const double scale = scal.cwiseAbs().maxCoeff();
    if (scal.minCoeff() < -1e-12 * std::max(1.0, scale))
        throw PreconditionError("positive-constant solve needs scal_g >= 0 (min scal = " +
                                std::to_string(scal.minCoeff()) + ")");
    if (scale <= 1e-12) throw PreconditionError("positive-constant solve needs scal_g not identically 0");
    if (!(p.c > 0.0)) throw PreconditionError("positive-constant solve needs c > 0");

    const Eigen::VectorXd& m = mesh.masses();
    const double sigma = integrate(mesh, scal) / mesh.volume();
    const Eigen::MatrixXd precond = 4.0 * k.b_n * stiffness(mesh) + Eigen::MatrixXd(sigma * m.asDiagonal());
    const Eigen::LLT<Eigen::MatrixXd> llt(precond);
    if (llt.info() != Eigen::Success) throw SolverError("preconditioner factorization failed");

    DiscreteFunction u = project_to_constraint(p, start.value_or(DiscreteFunction::Ones(n)));
    ConformalSolution sol;
    double j = functional_J(p, u);
    sol.history.push_back(j);
    double alpha = cfg.step;

    auto multiplier = [&](const DiscreteFunction& v) {
        const double top = 4.0 * k.b_n * dirichlet_form(mesh, v, v) + inner(mesh, scal, v.cwiseProduct(v));
        const double bottom = p.c * integrate(mesh, pow_abs(v, k.two_star).matrix());
        return top / bottom - 1.0;
    };

    for (int it = 0;; ++it) {
        sol.lagrange = multiplier(u);
        sol.c_prime = (1.0 + sol.lagrange) * p.c;
        sol.residual_norm = weighted_l2(mesh, el_residual(p.metric, u, sol.c_prime));
        sol.iterations = it;
        if (sol.residual_norm < cfg.tol_residual) break;
        if (it >= cfg.max_iter) {
            std::ostringstream os;
            os << "projected gradient did not converge in " << cfg.max_iter
               << " iterations (Euler-Lagrange residual " << sol.residual_norm << ")";
            throw SolverError(os.str());
        }

        const DiscreteFunction g = gradient_J(p, u);
        const DiscreteFunction normal = p.c * pow_abs(u, k.gamma_n).matrix();
        const DiscreteFunction pg = llt.solve(m.cwiseProduct(g));
        const DiscreteFunction q = llt.solve(m.cwiseProduct(normal));
        const DiscreteFunction d = pg - (inner(mesh, normal, pg) / inner(mesh, normal, q)) * q;
        const double slope = inner(mesh, g, d);

        bool accepted = false;
        alpha = std::min(2.0 * alpha, cfg.step);
        while (alpha > 1e-14) {
            const DiscreteFunction trial = project_to_constraint(p, u - alpha * d);
            const double jt = functional_J(p, trial);
            // Near convergence the Armijo decrease drops below rounding of J;
            // then the Euler-Lagrange residual decides.
            const bool armijo = jt <= j - 1e-4 * alpha * slope;
            const bool rounding = alpha * slope < 1e-13 * std::max(1.0, std::abs(j)) &&
                                  jt <= j + 1e-14 * std::max(1.0, std::abs(j)) &&
                                  weighted_l2(mesh, el_residual(p.metric, trial, (1.0 + multiplier(trial)) * p.c)) <
                                      sol.residual_norm;
            if (armijo || rounding) {
                u = trial;
                j = jt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            std::ostringstream os;
            os << "line search stalled at iteration " << it << " (Euler-Lagrange residual " << sol.residual_norm
               << ")";
            throw SolverError(os.str());
        }
        sol.history.push_back(j);
    }

    if (!(u.minCoeff() > cfg.positivity_floor)) {
        std::ostringstream os;
        os << "positivity floor breached: min u = " << u.minCoeff() << " <= " << cfg.positivity_floor;
        throw SolverError(os.str());
    }
    if (!(1.0 + sol.lagrange > 0.0)) throw SolverError("multiplier identity violated: 1 + lambda <= 0");
    sol.u = u;
    sol.spectral_tail = spectral_tail(u);
    return sol;
}

double negative_constant_bound(const WarpedProductMetric& metric) {
    const auto k = metric.constants();
    const double vol = metric.mesh().volume();
    const double min_scal = scal_warped(metric).minCoeff();
    return std::max(0.0, -(k.two_star / 2.0) * min_scal * std::pow(vol, 1.0 - k.two_star / 2.0));
}

NegativeSolve solve_negative_constant(const WarpedProductMetric& metric, const SolverConfig& cfg,
                                      std::optional<double> c, std::optional<DiscreteFunction> start) {
    const auto& mesh = metric.mesh();
    const int n = mesh.size();
    const auto k = metric.constants();
    const double vol = mesh.volume();
    const double bound = negative_constant_bound(metric);
    NegativeSolve out;
    out.c_used = c.value_or(std::max(bound, 1.0));
    if (out.c_used < bound) {
        std::ostringstream os;
        os.precision(17);
        os << "c = " << out.c_used << " is below the bound -(2*/2) min scal vol^(1-2*/2) = " << bound;
        throw PreconditionError(os.str());
    }

    const DiscreteFunction scal = scal_warped(metric);
    const Eigen::MatrixXd lap = laplacian_matrix(mesh);
    const Eigen::VectorXd& m = mesh.masses();

    auto normalize = [&](DiscreteFunction v) {
        return (v * std::pow(vol / integrate(mesh, pow_abs(v, k.two_star).matrix()), 1.0 / k.two_star)).eval();
    };
    DiscreteFunction u = start.value_or(DiscreteFunction::Ones(n));
    if (u.size() != n || !(u.minCoeff() > 0.0)) throw PreconditionError("Newton start must be positive on the mesh");
    u = normalize(u);
    double cp = -(4.0 * k.b_n * dirichlet_form(mesh, u, u) + inner(mesh, scal, u.cwiseProduct(u))) /
                integrate(mesh, pow_abs(u, k.two_star).matrix());

    auto residual = [&](const DiscreteFunction& v, double cv) {
        Eigen::VectorXd r(n + 1);
        r.head(n) = el_residual(metric, v, -cv);
        r[n] = integrate(mesh, pow_abs(v, k.two_star).matrix()) - vol;
        return r;
    };
    auto merit = [&](const Eigen::VectorXd& r) {
        return std::sqrt(inner(mesh, r.head(n), r.head(n)) + r[n] * r[n]);
    };

    ConformalSolution& sol = out.solution;
    Eigen::VectorXd r = residual(u, cp);
    const int max_newton = std::min(cfg.max_iter, 200);
    for (int it = 0;; ++it) {
        sol.residual_norm = std::sqrt(inner(mesh, r.head(n), r.head(n)));
        sol.history.push_back(merit(r));
        sol.iterations = it;
        if (sol.residual_norm < cfg.tol_residual && std::abs(r[n]) < 1e-12 * vol) break;
        if (it >= max_newton) {
            std::ostringstream os;
            os << "Newton did not converge in " << max_newton << " iterations (residual " << sol.residual_norm << ")";
            throw SolverError(os.str());
        }
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + 1, n + 1);
        jac.topLeftCorner(n, n) = 4.0 * k.b_n * lap;
        const Eigen::ArrayXd diag = scal.array() + cp * k.gamma_n * pow_abs(u, k.gamma_n - 1.0);
        jac.topLeftCorner(n, n).diagonal() -= diag.matrix();
        jac.block(0, n, n, 1) = -pow_abs(u, k.gamma_n).matrix();
        jac.block(n, 0, 1, n) = (k.two_star * m.array() * pow_abs(u, k.two_star - 1.0)).matrix().transpose();
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const Eigen::VectorXd step = lu.solve(-r);
        if (!step.allFinite()) throw SolverError("Newton step is not finite (singular Jacobian)");

        double t = 1.0;
        const double current = merit(r);
        bool accepted = false;
        while (t > 1e-10) {
            const DiscreteFunction ut = u + t * step.head(n);
            if (ut.minCoeff() > 0.0) {
                const double ct = cp + t * step[n];
                const Eigen::VectorXd rt = residual(ut, ct);
                if (merit(rt) < (1.0 - 1e-4 * t) * current || (t == 1.0 && merit(rt) < current)) {
                    u = ut;
                    cp = ct;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!accepted) throw SolverError("Newton line search failed (divergence or loss of positivity)");
        if (u.cwiseAbs().maxCoeff() < cfg.positivity_floor) throw SolverError("trivial-solution collapse: u -> 0");
    }

    if (!(u.minCoeff() > cfg.positivity_floor)) {
        std::ostringstream os;
        os << "positivity floor breached: min u = " << u.minCoeff();
        throw SolverError(os.str());
    }
    if (!(cp > 1e-10)) {
        std::ostringstream os;
        os << "no negative constant scalar curvature in this conformal class (Theorem B): converged c' = " << cp;
        throw PreconditionError(os.str());
    }
    sol.u = u;
    sol.c_prime = cp;
    sol.lagrange = cp / out.c_used - 1.0;
    sol.spectral_tail = spectral_tail(u);
    return out;
}

ConformalReparametrization conformal_metric(const WarpedProductMetric& metric, const DiscreteFunction& u,
                                            int nodes) {
    check_size(metric, u);
    if (!metric.is_arclength()) throw PreconditionError("conformal_metric expects an arc-length metric");
    if (!(u.minCoeff() > 0.0)) throw PreconditionError("conformal factor must be positive");
    const int n = metric.dimension();
    const double len = metric.mesh().length();
    const DiscreteFunction phi = u.array().pow(2.0 / (n - 2)).matrix();
    const PeriodicInterpolant speed(phi, len);
    const PeriodicInterpolant warp(phi.cwiseProduct(metric.warp()), len);
    const double new_len = speed.antiderivative(len);

    Eigen::VectorXd source(nodes), f(nodes);
    const double h = new_len / nodes;
    for (int i = 0; i < nodes; ++i) {
        const double target = h * i;
        double lo = 0.0, hi = len;
        double r = target / new_len * len;
        for (int iter = 0; iter < 100; ++iter) {
            const double g = speed.antiderivative(r) - target;
            if (std::abs(g) < 1e-15 * new_len) break;
            if (g > 0.0) hi = r;
            else lo = r;
            const double next = r - g / speed(r);
            r = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
        }
        source[i] = r;
        f[i] = warp(r);
    }
    const auto mesh = QuotientMesh::build(Topology::circle, nodes, new_len, [](double) { return 1.0; });
    return {WarpedProductMetric(mesh, metric.fiber_dim(), metric.fiber_scal(), f), source};
}

std::string to_string(ConformalClass c) {
    switch (c) {
        case ConformalClass::P_G: return "P_G";
        case ConformalClass::Z_G: return "Z_G";
        default: return "N_G";
    }
}

Classification classify_conformal_class(const WarpedProductMetric& metric, double tol) {
    const auto& mesh = metric.mesh();
    const auto k = metric.constants();
    const Eigen::VectorXd& m = mesh.masses();
    const Eigen::VectorXd inv_sqrt = m.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd a = 4.0 * k.b_n * stiffness(mesh);
    a.diagonal() += m.cwiseProduct(scal_warped(metric));
    a = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
    if (es.info() != Eigen::Success) throw SolverError("eigen-solver failure in the conformal classifier");
    Classification c;
    c.lambda1 = es.eigenvalues()[0];
    c.eigenfunction = inv_sqrt.cwiseProduct(es.eigenvectors().col(0));
    if (c.eigenfunction.sum() < 0.0) c.eigenfunction = -c.eigenfunction;
    c.verdict = std::abs(c.lambda1) < tol ? ConformalClass::Z_G
              : c.lambda1 > 0.0          ? ConformalClass::P_G
                                         : ConformalClass::N_G;
    return c;
}

}  // namespace psc
