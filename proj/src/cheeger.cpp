#include "psc/cheeger.hpp"

#include "psc/errors.hpp"

#include <cmath>
#include <sstream>

namespace psc {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw PreconditionError("invalid orbit data: " + what);
}

Eigen::VectorXd embed_orbit(const OrbitData& o, const Eigen::VectorXd& u) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(o.algebra_dim());
    z.head(o.orbit_dim) = u;
    return z;
}

// P extended by zero on the isotropy algebra.
Eigen::VectorXd apply_p_full(const OrbitData& o, const Eigen::VectorXd& z) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(o.algebra_dim());
    out.head(o.orbit_dim) = o.p * z.head(o.orbit_dim);
    return out;
}

}  // namespace

OrbitData make_orbit_data(LieAlgebra algebra, int orbit_dim, Eigen::MatrixXd p, int normal_dim) {
    OrbitData o;
    o.algebra = std::move(algebra);
    o.orbit_dim = orbit_dim;
    o.p = std::move(p);
    o.normal_dim = normal_dim;
    const int d = o.algebra.dim();
    o.normal_sectionals = Eigen::MatrixXd::Zero(normal_dim, normal_dim);
    o.mixed_sectionals = Eigen::MatrixXd::Zero(normal_dim, orbit_dim);
    o.orbit_sectionals = Eigen::MatrixXd::Zero(orbit_dim, orbit_dim);
    o.dw_normal.assign(static_cast<size_t>(normal_dim) * normal_dim, Eigen::VectorXd::Zero(d));
    o.dw_mixed.assign(static_cast<size_t>(orbit_dim) * normal_dim, Eigen::VectorXd::Zero(d));
    return o;
}

void validate(const OrbitData& o) {
    const int d = o.algebra_dim();
    const int k = o.orbit_dim;
    const int m = o.normal_dim;
    require(k >= 1 && k <= d, "orbit dimension out of range");
    require(m >= 0, "negative normal dimension");
    require(o.p.rows() == k && o.p.cols() == k, "P must be orbit_dim x orbit_dim");
    require((o.p - o.p.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + o.p.cwiseAbs().maxCoeff()),
            "P must be symmetric");
    require(o.normal_sectionals.rows() == m && o.normal_sectionals.cols() == m, "normal_sectionals size");
    require(o.mixed_sectionals.rows() == m && o.mixed_sectionals.cols() == k, "mixed_sectionals size");
    require(o.orbit_sectionals.rows() == k && o.orbit_sectionals.cols() == k, "orbit_sectionals size");
    auto symmetric = [](const Eigen::MatrixXd& a) {
        return a.size() == 0 || (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + a.cwiseAbs().maxCoeff());
    };
    require(symmetric(o.normal_sectionals), "normal sectional table must be symmetric");
    require(symmetric(o.orbit_sectionals), "orbit sectional table must be symmetric");
    require(static_cast<int>(o.dw_normal.size()) == m * m, "dw_normal size");
    require(static_cast<int>(o.dw_mixed.size()) == k * m, "dw_mixed size");
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const auto& w = o.dw_normal[i * m + j];
            require(w.size() == d, "dw_normal entries must live in g");
            require((w + o.dw_normal[j * m + i]).cwiseAbs().maxCoeff() <= 1e-12, "dw_normal must be antisymmetric");
        }
    for (const auto& w : o.dw_mixed) require(w.size() == d, "dw_mixed entries must live in g");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(o.p, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() > 0.0, "P must be positive definite");
}

IsotropyData IsotropyData::from_generators(const std::vector<Eigen::MatrixXd>& generators) {
    IsotropyData iso;
    iso.isotropy_dim = static_cast<int>(generators.size());
    if (generators.empty()) return iso;
    const int m = static_cast<int>(generators.front().rows());
    iso.rho.assign(m, Eigen::MatrixXd::Zero(m, iso.isotropy_dim));
    for (int u = 0; u < iso.isotropy_dim; ++u)
        for (int i = 0; i < m; ++i) iso.rho[i].col(u) = generators[u].col(i);
    return iso;
}

void validate(const OrbitData& o, const IsotropyData& iso) {
    validate(o);
    const int m = o.normal_dim;
    require(iso.isotropy_dim == o.isotropy_dim(), "isotropy dimension does not match the algebra splitting");
    if (iso.isotropy_dim == 0) return;
    require(static_cast<int>(iso.rho.size()) == m, "one rho map per normal basis vector");
    for (const auto& r : iso.rho) require(r.rows() == m && r.cols() == iso.isotropy_dim, "rho map size");
    // rho_{e_i}(U) = A_U e_i with A_U skew: g(e_j, rho_{e_i} U) = -g(e_i, rho_{e_j} U).
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            require((iso.rho[i].row(j) + iso.rho[j].row(i)).cwiseAbs().maxCoeff() <= 1e-10,
                    "rho maps must come from skew-symmetric isotropy generators");
}

PEigen p_eigendecomposition(const OrbitData& o) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(o.p);
    if (es.info() != Eigen::Success) throw SolverError("eigendecomposition of P failed");
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw PreconditionError("invalid orbit data: P has a non-positive eigenvalue");
    return {es.eigenvalues(), es.eigenvectors()};
}

SplitVector c_t_apply(const OrbitData& o, double t, const SplitVector& x) {
    if (!(t >= 0.0)) throw PreconditionError("Cheeger time must be >= 0");
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(o.orbit_dim, o.orbit_dim) + t * o.p;
    return {x.normal, a.llt().solve(x.orbit)};
}

Eigen::VectorXd dw_vector(const OrbitData& o, const IsotropyData* iso, const SplitVector& x,
                          const SplitVector& y) {
    const int d = o.algebra_dim();
    const int m = o.normal_dim;
    const int k = o.orbit_dim;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d);

    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double c = x.normal[i] * y.normal[j];
            if (c != 0.0) a += c * o.dw_normal[i * m + j];
        }
    if (iso != nullptr && iso->isotropy_dim > 0) {
        // dw_Z(e_i, e_j) = g(e_i, rho_{e_j} Z) for Z in the isotropy algebra.
        Eigen::VectorXd iso_part = Eigen::VectorXd::Zero(iso->isotropy_dim);
        for (int j = 0; j < m; ++j)
            if (y.normal[j] != 0.0) iso_part += y.normal[j] * (iso->rho[j].transpose() * x.normal);
        a.tail(iso->isotropy_dim) += iso_part;
    }
    for (int b = 0; b < k; ++b)
        for (int i = 0; i < m; ++i) {
            const double c = x.orbit[b] * y.normal[i] - y.orbit[b] * x.normal[i];
            if (c != 0.0) a += c * o.dw_mixed[b * m + i];
        }
    // dw_Z(U*, V*) = 1/2 Q([PU,V] + [U,PV] - P[U,V], Z), with w_Z = 1/2 g(., Z*).
    const Eigen::VectorXd u = embed_orbit(o, x.orbit);
    const Eigen::VectorXd v = embed_orbit(o, y.orbit);
    const Eigen::VectorXd pu = apply_p_full(o, u);
    const Eigen::VectorXd pv = apply_p_full(o, v);
    const auto& alg = o.algebra;
    a += 0.5 * (alg.bracket(pu, v) + alg.bracket(u, pv) - apply_p_full(o, alg.bracket(u, v)));
    return a;
}

ZtMaximum z_t_maximize(const OrbitData& o, const IsotropyData* iso, double t, const SplitVector& x,
                       const SplitVector& y) {
    if (!(t >= 0.0)) throw PreconditionError("Cheeger time must be >= 0");
    ZtMaximum out;
    if (t == 0.0) return out;
    const int d = o.algebra_dim();
    const Eigen::VectorXd pu = apply_p_full(o, embed_orbit(o, x.orbit));
    const Eigen::VectorXd pv = apply_p_full(o, embed_orbit(o, y.orbit));
    const Eigen::VectorXd a = dw_vector(o, iso, x, y) + 0.5 * t * o.algebra.bracket(pu, pv);
    if (a.squaredNorm() == 0.0) return out;
    // On |Z| = 1 the denominator is Z^T (I + t P) Z, so the ratio is a
    // generalized Rayleigh quotient of the rank-one form a a^T; its maximum is
    // a^T (I + tP)^{-1} a, attained at Z proportional to (I + tP)^{-1} a.
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(d, d);
    b.topLeftCorner(o.orbit_dim, o.orbit_dim) += t * o.p;
    const Eigen::LLT<Eigen::MatrixXd> llt(b);
    const Eigen::VectorXd z = llt.solve(a);
    out.value = 3.0 * t * a.dot(z);
    out.maximizer = z.normalized();
    return out;
}

double z_t_term(const OrbitData& o, const IsotropyData* iso, double t, const SplitVector& x,
                const SplitVector& y) {
    return z_t_maximize(o, iso, t, x, y).value;
}

CheegerScal scal_cheeger_terms(const OrbitData& o, const IsotropyData* iso, double t) {
    if (!(t >= 0.0)) throw PreconditionError("Cheeger time must be >= 0");
    if (iso != nullptr) validate(o, *iso);
    else validate(o);
    const PEigen pe = p_eigendecomposition(o);
    const int m = o.normal_dim;
    const int k = o.orbit_dim;

    // C_t^{1/2} on the g-orthonormal frame: 1 on normals, (1 + t lambda)^{-1/2} on orbits.
    Eigen::VectorXd shrink(k);
    for (int a = 0; a < k; ++a) shrink[a] = 1.0 / std::sqrt(1.0 + t * pe.values[a]);

    CheegerScal s;
    s.sectional = o.normal_sectionals.sum();
    for (int i = 0; i < m; ++i)
        for (int a = 0; a < k; ++a) s.sectional += 2.0 * o.mixed_sectionals(i, a) * shrink[a] * shrink[a];
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            s.sectional += o.orbit_sectionals(a, b) * shrink[a] * shrink[a] * shrink[b] * shrink[b];

    if (t > 0.0) {
        std::vector<SplitVector> frame;
        frame.reserve(m + k);
        for (int i = 0; i < m; ++i) frame.push_back({Eigen::VectorXd::Unit(m, i), Eigen::VectorXd::Zero(k)});
        for (int a = 0; a < k; ++a)
            frame.push_back({Eigen::VectorXd::Zero(m), pe.vectors.col(a) * (shrink[a] / std::sqrt(pe.values[a]))});
        for (const auto& x : frame)
            for (const auto& y : frame) s.z += z_t_term(o, iso, t, x, y);

        const double t3 = t * t * t;
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) {
                const Eigen::VectorXd br =
                    o.algebra.bracket(embed_orbit(o, pe.vectors.col(a)), embed_orbit(o, pe.vectors.col(b)));
                const double la = pe.values[a], lb = pe.values[b];
                s.bracket += la * lb * t3 / ((1.0 + t * la) * (1.0 + t * lb)) * 0.25 * br.squaredNorm();
            }
    }
    return s;
}

double scal_cheeger(const OrbitData& o, const IsotropyData* iso, double t) {
    return scal_cheeger_terms(o, iso, t).total();
}

double scal_bar(const OrbitData& o) {
    double s = 0.0;
    for (int a = 0; a < o.orbit_dim; ++a)
        for (int b = 0; b < o.orbit_dim; ++b) {
            const Eigen::VectorXd br = o.algebra.bracket(Eigen::VectorXd::Unit(o.algebra_dim(), a),
                                                         Eigen::VectorXd::Unit(o.algebra_dim(), b));
            s += br.squaredNorm();
        }
    return 0.25 * s;
}

double xi(const IsotropyData& iso, int normal_dim) {
    if (iso.isotropy_dim == 0) return 0.0;
    double total = 0.0;
    for (int i = 0; i < normal_dim; ++i) {
        const Eigen::MatrixXd& rho = iso.rho[i];
        if (rho.cwiseAbs().maxCoeff() == 0.0) continue;
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(rho, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double cutoff = 1e-12 * svd.singularValues()[0];
        int rank = 0;
        while (rank < svd.singularValues().size() && svd.singularValues()[rank] > cutoff) ++rank;
        const Eigen::MatrixXd range = svd.matrixU().leftCols(rank);
        for (int j = 0; j < normal_dim; ++j) {
            const Eigen::VectorXd e = Eigen::VectorXd::Unit(normal_dim, j);
            const Eigen::VectorXd horizontal = range * (range.transpose() * e);
            const double h2 = horizontal.squaredNorm();
            if (h2 <= 1e-28) continue;
            // Minimal-norm preimage of the projection inside g_x.
            Eigen::VectorXd coeffs = range.transpose() * horizontal;
            for (int r = 0; r < rank; ++r) coeffs[r] /= svd.singularValues()[r];
            const Eigen::VectorXd pre = svd.matrixV().leftCols(rank) * coeffs;
            total += h2 * h2 / pre.squaredNorm();
        }
    }
    return total;
}

double pinching_density(const PinchingPoint& point) {
    const double x = point.isotropy ? xi(*point.isotropy, point.orbit.normal_dim) : 0.0;
    return scal_bar(point.orbit) + 3.0 * x;
}

double pinching_limit(const std::vector<PinchingPoint>& points) {
    if (points.empty()) throw PreconditionError("pinching limit needs at least one point");
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& p : points) {
        if (p.orbit.algebra.is_abelian())
            throw PreconditionError("pinching limit requires a non-abelian Lie algebra");
        const double v = pinching_density(p);
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo > 0.0)) throw PreconditionError("pinching limit undefined: min(scal_bar + 3 xi) is zero");
    return hi / lo;
}

OrbitData orbit_data_from_group(const LeftInvariantMetric& m) {
    OrbitData o = make_orbit_data(m.algebra(), m.dim(), m.metric_tensor(), 0);
    const PEigen pe = p_eigendecomposition(o);
    for (int a = 0; a < m.dim(); ++a)
        for (int b = 0; b < m.dim(); ++b) {
            const Eigen::VectorXd x = pe.vectors.col(a) / std::sqrt(pe.values[a]);
            const Eigen::VectorXd y = pe.vectors.col(b) / std::sqrt(pe.values[b]);
            o.orbit_sectionals(a, b) = a == b ? 0.0 : sectional_left_invariant(m, x, y);
        }
    o.orbit_sectionals = 0.5 * (o.orbit_sectionals + o.orbit_sectionals.transpose()).eval();
    return o;
}

std::optional<double> positivity_onset(const OrbitData& o, const IsotropyData* iso, double t_max, int samples) {
    if (!(t_max > 0.0) || samples < 2) throw PreconditionError("positivity search needs t_max > 0 and >= 2 samples");
    std::vector<double> grid{0.0};
    const double lo = std::log10(t_max) - 8.0;
    for (int i = 0; i < samples; ++i) grid.push_back(std::pow(10.0, lo + (8.0 * i) / (samples - 1)));
    std::optional<double> onset;
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
        if (scal_cheeger(o, iso, *it) > 0.0) onset = *it;
        else break;
    }
    return onset;
}

namespace {

// Fixed synthetic tables: bounded sectionals and m_x-valued dw data.
void fill_synthetic_tables(OrbitData& o) {
    const int m = o.normal_dim;
    const int k = o.orbit_dim;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) o.normal_sectionals(i, j) = 0.3 + 0.1 * (i + j);
    for (int i = 0; i < m; ++i)
        for (int a = 0; a < k; ++a) o.mixed_sectionals(i, a) = 0.2 - 0.05 * (i + 2 * a);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            if (a != b) o.orbit_sectionals(a, b) = 0.25;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(o.algebra_dim());
            for (int a = 0; a < k; ++a) w[a] = 0.1 * (a + 1) - 0.05 * (i + j);
            o.dw_normal[i * m + j] = w;
            o.dw_normal[j * m + i] = -w;
        }
    for (int a = 0; a < k; ++a)
        for (int i = 0; i < m; ++i) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(o.algebra_dim());
            w[(a + i) % k] = 0.15;
            o.dw_mixed[a * m + i] = w;
        }
}

}  // namespace

PinchingPoint cheeger_preset(const std::string& name) {
    if (name == "free-point") {
        Eigen::MatrixXd p(3, 3);
        p << 1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.1;
        OrbitData o = make_orbit_data(LieAlgebra::su2(), 3, p, 2);
        fill_synthetic_tables(o);
        return {o, std::nullopt};
    }
    if (name == "singular-point") {
        // g = su(2) + R, the R factor is the isotropy algebra rotating the normal plane.
        Eigen::MatrixXd p(3, 3);
        p << 0.7, 0.0, 0.1, 0.0, 1.3, 0.0, 0.1, 0.0, 0.9;
        OrbitData o = make_orbit_data(LieAlgebra::direct_sum(LieAlgebra::su2(), LieAlgebra::abelian(1)), 3, p, 2);
        fill_synthetic_tables(o);
        Eigen::MatrixXd gen(2, 2);
        gen << 0.0, -1.0, 1.0, 0.0;
        return {o, IsotropyData::from_generators({gen})};
    }
    const LeftInvariantMetric g = group_preset(name);
    return {orbit_data_from_group(g), std::nullopt};
}

}  // namespace psc
