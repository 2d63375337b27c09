#include "psc/cli.hpp"

#include "psc/canonical_variation.hpp"
#include "psc/cheeger.hpp"
#include "psc/errors.hpp"
#include "psc/kazdan_warner.hpp"
#include "psc/yamabe.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace psc {

namespace fs = std::filesystem;

std::string to_string(Command c) {
    switch (c) {
        case Command::classify: return "classify";
        case Command::yamabe: return "yamabe";
        case Command::prescribe: return "prescribe";
        case Command::cheeger: return "cheeger";
        case Command::canonical: return "canonical";
        case Command::approx: return "approx";
    }
    return "?";
}

Command parse_command(const std::string& name) {
    for (Command c : {Command::classify, Command::yamabe, Command::prescribe, Command::cheeger, Command::canonical,
                      Command::approx})
        if (to_string(c) == name) return c;
    throw ConfigError("unknown command '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
    return x;
}

int to_int(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError("config key '" + key + "' expects an integer");
    return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "' expects true or false");
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::ostringstream os;
            os << "config line " << number << ": expected 'key = value'";
            throw ConfigError(os.str());
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            std::ostringstream os;
            os << "config line " << number << ": empty key";
            throw ConfigError(os.str());
        }
        map[key] = trim(line.substr(eq + 1));
    }
    return map;
}

ConfigMap load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string default_preset(Command c) {
    switch (c) {
        case Command::cheeger: return "su2-berger(0.5)";
        case Command::canonical: return "twisted-sphere";
        default: return "round-fiber";
    }
}

ScenarioConfig ScenarioConfig::from_map(const ConfigMap& map) {
    ScenarioConfig c;
    if (const auto it = map.find("command"); it != map.end()) c.command = parse_command(it->second);
    c.preset = default_preset(c.command);
    for (const auto& [key, v] : map) {
        if (key == "command") continue;
        if (key == "model.preset") c.preset = v;
        else if (key == "model.N") c.N = to_int(key, v);
        else if (key == "model.L") c.L = to_double(key, v);
        else if (key == "model.k") c.k = to_int(key, v);
        else if (key == "model.cF") c.cF = to_double(key, v);
        else if (key == "model.f") c.f_expr = v;
        else if (key == "solver.tol") c.tol = to_double(key, v);
        else if (key == "solver.max_iter") c.max_iter = to_int(key, v);
        else if (key == "run.seed") c.seed = static_cast<unsigned>(to_int(key, v));
        else if (key == "run.outdir") c.outdir = v;
        else if (key == "yamabe.c") c.yamabe_c = to_double(key, v);
        else if (key == "yamabe.negative") c.yamabe_negative = to_bool(key, v);
        else if (key == "prescribe.target") c.prescribe_target = v;
        else if (key == "prescribe.p" || key == "approx.p") c.p = to_double(key, v);
        else if (key == "prescribe.eps" || key == "approx.eps") c.eps = to_double(key, v);
        else if (key == "cheeger.t_max") c.t_max = to_double(key, v);
        else if (key == "canonical.sweep") c.sweep = v;
        else if (key == "approx.f") c.approx_f = v;
        else if (key == "approx.target") c.approx_target = v;
        else throw ConfigError("unknown config key '" + key + "'");
    }
    if (c.N < QuotientMesh::kMinNodes) throw ConfigError("model.N must be >= 16");
    return c;
}

ConfigMap ScenarioConfig::to_map() const {
    ConfigMap m;
    m["command"] = to_string(command);
    m["model.preset"] = preset;
    m["model.N"] = std::to_string(N);
    if (L) m["model.L"] = format_double(*L);
    if (k) m["model.k"] = std::to_string(*k);
    if (cF) m["model.cF"] = format_double(*cF);
    if (f_expr) m["model.f"] = *f_expr;
    if (tol) m["solver.tol"] = format_double(*tol);
    if (max_iter) m["solver.max_iter"] = std::to_string(*max_iter);
    m["run.seed"] = std::to_string(seed);
    m["run.outdir"] = outdir.string();
    switch (command) {
        case Command::yamabe:
            if (yamabe_c) m["yamabe.c"] = format_double(*yamabe_c);
            m["yamabe.negative"] = yamabe_negative ? "true" : "false";
            break;
        case Command::prescribe:
            m["prescribe.target"] = prescribe_target;
            m["prescribe.p"] = format_double(p);
            m["prescribe.eps"] = format_double(eps);
            break;
        case Command::cheeger: m["cheeger.t_max"] = format_double(t_max); break;
        case Command::canonical: m["canonical.sweep"] = sweep; break;
        case Command::approx:
            m["approx.f"] = approx_f;
            m["approx.target"] = approx_target;
            m["approx.p"] = format_double(p);
            m["approx.eps"] = format_double(eps);
            break;
        case Command::classify: break;
    }
    return m;
}

// ---------------------------------------------------------------------------
// f-expressions

struct FExpression::Node {
    enum Kind { number, var, neg, add, sub, mul, div, pow, sin, cos } kind;
    double value = 0.0;
    std::shared_ptr<const Node> a, b;

    double eval(double r) const {
        switch (kind) {
            case number: return value;
            case var: return r;
            case neg: return -a->eval(r);
            case add: return a->eval(r) + b->eval(r);
            case sub: return a->eval(r) - b->eval(r);
            case mul: return a->eval(r) * b->eval(r);
            case div: return a->eval(r) / b->eval(r);
            case pow: return std::pow(a->eval(r), b->eval(r));
            case sin: return std::sin(a->eval(r));
            case cos: return std::cos(a->eval(r));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const FExpression::Node>;

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    using Node = FExpression::Node;

    [[noreturn]] void fail(const std::string& why) const {
        std::ostringstream os;
        os << "unparseable f-expression '" << s_ << "' at position " << pos_ << ": " << why;
        throw ConfigError(os.str());
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    static NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr, double v = 0.0) {
        return std::make_shared<const Node>(Node{k, v, std::move(a), std::move(b)});
    }

    NodePtr expr() {
        NodePtr left = term();
        while (true) {
            if (accept('+')) left = make(Node::add, left, term());
            else if (accept('-')) left = make(Node::sub, left, term());
            else return left;
        }
    }
    NodePtr term() {
        NodePtr left = unary();
        while (true) {
            if (accept('*')) left = make(Node::mul, left, unary());
            else if (accept('/')) left = make(Node::div, left, unary());
            else return left;
        }
    }
    NodePtr unary() {
        if (accept('-')) return make(Node::neg, unary());
        if (accept('+')) return unary();
        return power();
    }
    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Node::pow, base, unary());
        return base;
    }
    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        if (accept('(')) {
            NodePtr e = expr();
            if (!accept(')')) fail("missing ')'");
            return e;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s_.substr(pos_), &used);
            } catch (const std::exception&) {
                fail("bad number");
            }
            pos_ += used;
            return make(Node::number, nullptr, nullptr, v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t end = pos_;
            while (end < s_.size() && std::isalpha(static_cast<unsigned char>(s_[end]))) ++end;
            const std::string word = s_.substr(pos_, end - pos_);
            pos_ = end;
            if (word == "r") return make(Node::var);
            if (word == "pi") return make(Node::number, nullptr, nullptr, std::numbers::pi);
            if (word == "sin" || word == "cos") {
                if (!accept('(')) fail("expected '(' after " + word);
                NodePtr arg = expr();
                if (!accept(')')) fail("missing ')'");
                return make(word == "sin" ? Node::sin : Node::cos, arg);
            }
            fail("unknown name '" + word + "'");
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

FExpression FExpression::parse(const std::string& text) {
    FExpression e;
    e.text_ = text;
    e.root_ = Parser(text).parse();
    return e;
}

double FExpression::operator()(double r) const { return root_->eval(r); }

// ---------------------------------------------------------------------------

namespace {

struct WarpedDefaults {
    int k;
    double cF;
    const char* f;
};

WarpedDefaults warped_defaults(const std::string& preset) {
    if (preset == "round-fiber") return {3, 6.0, "1"};
    if (preset == "flat-torus") return {3, 0.0, "1"};
    if (preset == "bumpy") return {3, 0.0, "1+0.2*sin(r)"};
    if (preset == "hyperbolic-fiber") return {2, -2.0, "1"};
    if (preset == "bumpy-hyperbolic") return {2, -2.0, "1+0.1*sin(r)"};
    throw ConfigError("unknown model preset '" + preset + "'");
}

}  // namespace

WarpedProductMetric build_warped_model(const ScenarioConfig& cfg) {
    const WarpedDefaults d = warped_defaults(cfg.preset);
    if (!cfg.L && !cfg.k && !cfg.cF && !cfg.f_expr) return warped_preset(cfg.preset, cfg.N);
    const double L = cfg.L.value_or(2.0 * std::numbers::pi);
    if (!(L > 0.0)) throw ConfigError("model.L must be positive");
    const FExpression f = FExpression::parse(cfg.f_expr.value_or(d.f));
    const auto mesh = QuotientMesh::build(Topology::circle, cfg.N, L, [](double) { return 1.0; });
    return WarpedProductMetric(mesh, cfg.k.value_or(d.k), cfg.cF.value_or(d.cF), sample(mesh, f));
}

void emit_csv(const fs::path& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw std::invalid_argument("CSV row width differs from the header");
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
    if (!out) throw ConfigError("write failed for " + path.string());
}

std::vector<double> CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) {
            std::vector<double> c;
            c.reserve(rows.size());
            for (const auto& r : rows) c.push_back(r[i]);
            return c;
        }
    throw ConfigError("CSV has no column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) return t;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != t.header.size()) throw ConfigError("ragged CSV " + path.string());
        t.rows.push_back(std::move(row));
    }
    return t;
}

void emit_plotdata(const fs::path& path, const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("plot columns differ in length");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    for (std::size_t i = 0; i < x.size(); ++i) out << format_double(x[i]) << ' ' << format_double(y[i]) << '\n';
}

void RunReport::add(const std::string& key, double value) { entries.emplace_back(key, format_double(value)); }

void RunReport::add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }

std::optional<std::string> RunReport::get(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return v;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<std::vector<double>> columns_to_rows(const std::vector<std::vector<double>>& cols) {
    std::vector<std::vector<double>> rows(cols.empty() ? 0 : cols[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (const auto& c : cols) rows[i].push_back(c[i]);
    return rows;
}

DiscreteFunction target_function(const std::string& source, const QuotientMesh& mesh) {
    if (fs::is_regular_file(source)) {
        std::ifstream in(source);
        std::vector<double> values;
        double v;
        while (in >> v) values.push_back(v);
        if (static_cast<int>(values.size()) != mesh.size()) {
            std::ostringstream os;
            os << "target file " << source << " has " << values.size() << " values, expected " << mesh.size();
            throw ConfigError(os.str());
        }
        return to_eigen(values);
    }
    return sample(mesh, FExpression::parse(source));
}

SolverConfig solver_config(const ScenarioConfig& cfg) {
    SolverConfig s;
    if (cfg.tol) s.tol_residual = *cfg.tol;
    if (cfg.max_iter) s.max_iter = *cfg.max_iter;
    return s;
}

void run_classify(const ScenarioConfig& cfg, RunReport& rep) {
    const WarpedProductMetric metric = build_warped_model(cfg);
    rep.add("stage", "classify.eigen");
    const double tol = cfg.tol.value_or(1e-8);
    const Classification c = classify_conformal_class(metric, tol);
    const auto& mesh = metric.mesh();
    const Eigen::VectorXd r = mesh.nodes();
    emit_csv(cfg.outdir / "classify.csv", {"r", "scal", "eigenfunction"},
             columns_to_rows({to_std(r), to_std(scal_warped(metric)), to_std(c.eigenfunction)}));
    emit_plotdata(cfg.outdir / "plotdata" / "eigenfunction.dat", to_std(r), to_std(c.eigenfunction));

    // Recompute lambda1 as the Rayleigh quotient of the emitted eigenfunction.
    const CsvTable t = read_csv(cfg.outdir / "classify.csv");
    const DiscreteFunction phi = to_eigen(t.column("eigenfunction"));
    const DiscreteFunction scal = to_eigen(t.column("scal"));
    const double b = metric.constants().b_n;
    const double lambda =
        (4.0 * b * dirichlet_form(mesh, phi, phi) + inner(mesh, scal, phi.cwiseProduct(phi))) / inner(mesh, phi, phi);
    const ConformalClass verdict =
        std::abs(lambda) < tol ? ConformalClass::Z_G : (lambda > 0.0 ? ConformalClass::P_G : ConformalClass::N_G);
    rep.add("verdict", to_string(verdict));
    rep.add("lambda1", lambda);
    rep.add("lambda1_tolerance", tol);
    rep.add("dimension", static_cast<double>(metric.dimension()));
}

void run_yamabe(const ScenarioConfig& cfg, RunReport& rep) {
    const WarpedProductMetric metric = build_warped_model(cfg);
    const auto& mesh = metric.mesh();
    const SolverConfig scfg = solver_config(cfg);
    const Classification cls = classify_conformal_class(metric);
    const bool negative = cfg.yamabe_negative || cls.verdict == ConformalClass::N_G;
    rep.add("class", to_string(cls.verdict));
    rep.add("mode", negative ? "negative" : "positive");

    ConformalSolution sol;
    double constant_sign = 1.0;
    if (negative) {
        rep.add("stage", "yamabe.negative_newton");
        const NegativeSolve ns = solve_negative_constant(metric, scfg, cfg.yamabe_c);
        sol = ns.solution;
        rep.add("c", ns.c_used);
        constant_sign = -1.0;
    } else {
        rep.add("stage", "yamabe.minimize");
        const double c = cfg.yamabe_c.value_or(1.0);
        sol = minimize_on_constraint(ConformalProblem{metric, c, 1.0}, scfg);
        rep.add("c", c);
    }
    const Eigen::VectorXd r = mesh.nodes();
    emit_csv(cfg.outdir / "yamabe.csv", {"r", "u", "scal_out"},
             columns_to_rows({to_std(r), to_std(sol.u), to_std(conformal_scal(metric, sol.u))}));
    emit_plotdata(cfg.outdir / "plotdata" / "u.dat", to_std(r), to_std(sol.u));
    {
        std::vector<double> it, h;
        for (std::size_t i = 0; i < sol.history.size(); ++i) {
            it.push_back(static_cast<double>(i));
            h.push_back(sol.history[i]);
        }
        emit_plotdata(cfg.outdir / "plotdata" / "history.dat", it, h);
    }

    const CsvTable t = read_csv(cfg.outdir / "yamabe.csv");
    const DiscreteFunction u = to_eigen(t.column("u"));
    const DiscreteFunction so = to_eigen(t.column("scal_out"));
    const DiscreteFunction res = el_residual(metric, u, constant_sign * sol.c_prime);
    rep.add("lambda", sol.lagrange);
    rep.add("c_prime", sol.c_prime);
    rep.add("residual", std::sqrt(inner(mesh, res, res)));
    rep.add("iterations", static_cast<double>(sol.iterations));
    rep.add("u_min", u.minCoeff());
    rep.add("scal_out_mean", so.mean());
    rep.add("scal_out_spread", so.maxCoeff() - so.minCoeff());
}

void run_prescribe(const ScenarioConfig& cfg, RunReport& rep) {
    const WarpedProductMetric metric = build_warped_model(cfg);
    const auto& mesh = metric.mesh();
    const DiscreteFunction f = target_function(cfg.prescribe_target, mesh);
    PrescribeConfig pc;
    pc.p = cfg.p;
    pc.eps = cfg.eps;
    if (cfg.tol) pc.newton.tol = *cfg.tol;
    if (cfg.max_iter) pc.newton.max_iter = *cfg.max_iter;
    rep.add("stage", "prescribe.full");
    const PrescribeResult res = full_prescribe(metric, f, pc);

    const Eigen::VectorXd r = mesh.nodes();
    emit_csv(cfg.outdir / "phi.csv", {"r", "phi", "phi_prime"},
             columns_to_rows({to_std(r), to_std(res.phi.node_map(mesh)), to_std(res.phi.node_derivative(mesh))}));
    const DiscreteFunction u = res.newton ? res.newton->u : DiscreteFunction::Zero(mesh.size());
    emit_csv(cfg.outdir / "solution.csv", {"r", "u", "scal_out", "target"},
             columns_to_rows({to_std(r), to_std(u), to_std(scal_warped(res.metric_out)), to_std(f)}));
    std::vector<std::vector<double>> hist;
    if (res.newton)
        for (std::size_t i = 0; i < res.newton->residuals.size(); ++i)
            hist.push_back({static_cast<double>(i), res.newton->residuals[i]});
    emit_csv(cfg.outdir / "residuals.csv", {"iteration", "residual"}, hist);
    emit_plotdata(cfg.outdir / "plotdata" / "scal_out.dat", to_std(r), to_std(scal_warped(res.metric_out)));

    const CsvTable t = read_csv(cfg.outdir / "solution.csv");
    const DiscreteFunction so = to_eigen(t.column("scal_out"));
    const DiscreteFunction tg = to_eigen(t.column("target"));
    rep.add("c", res.c);
    rep.add("pinching_margin", res.pinching_margin);
    rep.add("perturbed_base", res.perturbed_base ? "true" : "false");
    rep.add("approximation", res.approximation ? "diffeomorphism" : "identity");
    if (res.approximation) rep.add("approximation_error", res.approximation->error);
    const CsvTable h = read_csv(cfg.outdir / "residuals.csv");
    rep.add("newton_iterations", static_cast<double>(h.rows.empty() ? 0 : h.rows.size() - 1));
    if (!h.rows.empty()) rep.add("newton_residual", h.rows.back()[1]);
    rep.add("final_error", (so - tg).cwiseAbs().maxCoeff());
}

void run_cheeger(const ScenarioConfig& cfg, RunReport& rep) {
    if (!(cfg.t_max > 0.0)) throw ConfigError("cheeger.t_max must be positive");
    const PinchingPoint point = cheeger_preset(cfg.preset);
    rep.add("stage", "cheeger.sweep");
    const IsotropyData* iso = point.isotropy ? &*point.isotropy : nullptr;
    const double limit = pinching_density(point);
    std::vector<std::vector<double>> rows;
    const int samples = 60;
    rows.push_back({0.0, scal_cheeger(point.orbit, iso, 0.0), std::nan(""), limit, std::nan("")});
    for (int i = 0; i < samples; ++i) {
        const double t = cfg.t_max * std::pow(10.0, -6.0 + 6.0 * i / (samples - 1.0));
        const double s = scal_cheeger(point.orbit, iso, t);
        rows.push_back({t, s, s / t, limit, s / t / limit});
    }
    emit_csv(cfg.outdir / "cheeger.csv", {"t", "scal", "scal_over_t", "predicted_limit", "ratio"}, rows);

    const CsvTable tab = read_csv(cfg.outdir / "cheeger.csv");
    const auto t = tab.column("t");
    const auto ratio = tab.column("ratio");
    emit_plotdata(cfg.outdir / "plotdata" / "ratio.dat", std::vector<double>(t.begin() + 1, t.end()),
                  std::vector<double>(ratio.begin() + 1, ratio.end()));
    rep.add("predicted_limit", limit);
    rep.add("scal_bar", scal_bar(point.orbit));
    rep.add("xi", iso ? xi(*iso, point.orbit.normal_dim) : 0.0);
    rep.add("t_max", t.back());
    rep.add("ratio_at_t_max", ratio.back());
    const auto onset = positivity_onset(point.orbit, iso, cfg.t_max);
    rep.add("positivity_onset", onset ? format_double(*onset) : std::string("none"));
}

void run_canonical(const ScenarioConfig& cfg, RunReport& rep) {
    const SubmersionPointData d = submersion_preset(cfg.preset);
    double s_min = 0.0, s_max = 0.0;
    int steps = 0;
    {
        std::stringstream ss(cfg.sweep);
        std::string a, b, c;
        if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
            throw ConfigError("canonical.sweep must be s_min:s_max:steps");
        s_min = to_double("canonical.sweep", trim(a));
        s_max = to_double("canonical.sweep", trim(b));
        steps = to_int("canonical.sweep", trim(c));
    }
    if (!(s_min > 0.0) || !(s_max > s_min) || steps < 2) throw ConfigError("canonical.sweep needs 0 < s_min < s_max, steps >= 2");
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < steps; ++i) {
        const double s = s_min + (s_max - s_min) * i / (steps - 1.0);
        const SectionalExtremes e = cv_sectional_extremes(d, s);
        rows.push_back({s, cv_scal(d, s), e.hh_min, e.hh_max, e.hv_min, e.hv_max});
    }
    emit_csv(cfg.outdir / "canonical.csv", {"s", "scal", "hh_min", "hh_max", "hv_min", "hv_max"}, rows);
    const CsvTable t = read_csv(cfg.outdir / "canonical.csv");
    const auto s = t.column("s");
    const auto scal = t.column("scal");
    emit_plotdata(cfg.outdir / "plotdata" / "scal.dat", s, scal);
    std::string sign_change = "none";
    for (std::size_t i = 1; i < s.size(); ++i)
        if (scal[i - 1] > 0.0 && !(scal[i] > 0.0)) {
            sign_change = format_double(s[i - 1]) + ":" + format_double(s[i]);
            break;
        }
    rep.add("sweep_sign_change", sign_change);
    rep.add("stage", "canonical.threshold");
    const auto th = positivity_threshold(d);
    rep.add("threshold", th ? format_double(*th) : std::string("unbounded"));
}

void run_approx(const ScenarioConfig& cfg, RunReport& rep) {
    const double L = cfg.L.value_or(2.0 * std::numbers::pi);
    const auto mesh = QuotientMesh::build(Topology::circle, cfg.N, L, [](double) { return 1.0; });
    DiscreteFunction f, target;
    if (cfg.approx_f == "random") {
        // Random trigonometric f of degree <= 3 and a degree-one target inside its range.
        std::mt19937 rng(cfg.seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        double c[4], s[4];
        for (int k = 0; k < 4; ++k) {
            c[k] = nd(rng);
            s[k] = nd(rng);
        }
        const double w = 2.0 * std::numbers::pi / L;
        f = sample(mesh, [&](double r) {
            double v = 0.0;
            for (int k = 0; k < 4; ++k) v += c[k] * std::cos(k * w * r) + s[k] * std::sin(k * w * r);
            return v;
        });
        const double lo = f.minCoeff(), hi = f.maxCoeff();
        const double mid = lo + (hi - lo) * ud(rng);
        const double amp = std::min(mid - lo, hi - mid) * ud(rng);
        const double shift = L * ud(rng);
        target = sample(mesh, [&](double r) { return mid + amp * std::cos(w * (r - shift)); });
    } else {
        f = sample(mesh, FExpression::parse(cfg.approx_f));
        target = target_function(cfg.approx_target, mesh);
    }
    rep.add("stage", "approx.construct");
    const ApproximationResult res = approximate_by_diffeo(mesh, f, target, cfg.p, cfg.eps);

    emit_csv(cfg.outdir / "knots.csv", {"x", "y"},
             columns_to_rows({res.phi.knots_x(), res.phi.knots_y()}));
    const Eigen::VectorXd r = mesh.nodes();
    emit_csv(cfg.outdir / "functions.csv", {"r", "f", "target"}, columns_to_rows({to_std(r), to_std(f), to_std(target)}));
    std::vector<double> xs, ys;
    for (int i = 0; i < 8 * cfg.N; ++i) {
        xs.push_back(L * i / (8.0 * cfg.N));
        ys.push_back(res.phi(xs.back()));
    }
    emit_plotdata(cfg.outdir / "plotdata" / "phi.dat", xs, ys);

    // The error is recomputed from the emitted knots and functions.
    const CsvTable k = read_csv(cfg.outdir / "knots.csv");
    const CsvTable fn = read_csv(cfg.outdir / "functions.csv");
    const Diffeo1D phi(k.column("x"), k.column("y"), L);
    const double err = composition_error(mesh, to_eigen(fn.column("f")), to_eigen(fn.column("target")), phi, cfg.p);
    rep.add("lp_error", err);
    rep.add("eps", cfg.eps);
    rep.add("p", cfg.p);
    rep.add("knots", static_cast<double>(k.rows.size()));
    rep.add("jumps", static_cast<double>(res.jumps));
    rep.add("min_derivative", phi.min_derivative());
    rep.add("winding", phi.winding());
}

// Names the hypothesis behind a failed stage.
std::string violated_condition(const std::string& stage, const std::string& what) {
    const auto has = [&](const char* s) { return what.find(s) != std::string::npos; };
    if (has("(condition1)")) return "(condition1) pinching: c min f < scal_g < c max f";
    if (stage == "prescribe.full") {
        if (has("singular")) return "(Theorem B) A* injective: g is not in the exceptional set";
        if (has("min f <= target")) return "(approximation lemma) min f <= target <= max f";
        return "(Theorem B) Newton solvability of F(g + A* u) = c f o phi";
    }
    if (stage == "yamabe.minimize") return "(Theorem A, positive case) scal_g >= 0, not identically 0, c > 0";
    if (stage == "yamabe.negative_newton") return "(Theorem A, negative case) c above the negative-constant bound";
    if (stage == "approx.construct") return "(approximation lemma) min f <= target <= max f, eps resolvable";
    if (stage == "cheeger.sweep") return "(Cheeger deformation) valid orbit data with t >= 0";
    if (stage == "canonical.threshold") return "(canonical variation) fiber of positive scalar curvature";
    if (stage == "classify.eigen") return "(Theorem A) well-posed first eigenvalue problem";
    return "(configuration) valid scenario keys and values";
}

void write_report(const fs::path& path, const ScenarioConfig& cfg, const RunReport& rep) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "status = " << rep.status << '\n';
    out << "exit_code = " << rep.exit_code << '\n';
    for (const auto& [k, v] : cfg.to_map()) out << "input." << k << " = " << v << '\n';
    for (const auto& [k, v] : rep.entries) out << k << " = " << v << '\n';
}

void fail(RunReport& rep, const char* status, int code, const std::string& what) {
    rep.status = status;
    rep.exit_code = code;
    rep.add("error", what);
    rep.add("violated_condition", code == 4 ? violated_condition("", what)
                                            : violated_condition(rep.get("stage").value_or(""), what));
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg) {
    RunReport rep;
    const auto start = std::chrono::steady_clock::now();
    try {
        fs::create_directories(cfg.outdir / "plotdata");
    } catch (const fs::filesystem_error& e) {
        rep.status = "error";
        rep.exit_code = 4;
        rep.add("error", e.what());
        return rep;
    }
    try {
        switch (cfg.command) {
            case Command::classify: run_classify(cfg, rep); break;
            case Command::yamabe: run_yamabe(cfg, rep); break;
            case Command::prescribe: run_prescribe(cfg, rep); break;
            case Command::cheeger: run_cheeger(cfg, rep); break;
            case Command::canonical: run_canonical(cfg, rep); break;
            case Command::approx: run_approx(cfg, rep); break;
        }
        rep.status = "ok";
        rep.exit_code = 0;
    } catch (const PreconditionError& e) {
        fail(rep, "rejected", 2, e.what());
    } catch (const SolverError& e) {
        fail(rep, "failed", 3, e.what());
    } catch (const std::exception& e) {
        fail(rep, "error", 4, e.what());
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        write_report(cfg.outdir / "report.txt", cfg, rep);
    } catch (const ConfigError& e) {
        rep.status = "error";
        rep.exit_code = 4;
        rep.add("error", e.what());
    }
    return rep;
}

}  // namespace psc
