// Command-line front end: psc <command> [options].

#include "psc/cli.hpp"
#include "psc/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

struct Options {
    std::string config;
    std::map<std::string, std::string> overrides;
    bool negative = false;
};

// Registers --flag as an override of a config key.
void bind(CLI::App& app, Options& o, const std::string& flag, const std::string& key, const std::string& help) {
    app.add_option_function<std::string>(flag, [&o, key](const std::string& v) { o.overrides[key] = v; }, help);
}

void add_common(CLI::App& app, Options& o) {
    app.add_option("--config", o.config, "key = value configuration file");
    bind(app, o, "--model,--preset", "model.preset", "model preset name");
    bind(app, o, "--N", "model.N", "mesh nodes");
    bind(app, o, "--L", "model.L", "circle length");
    bind(app, o, "--k", "model.k", "fiber dimension");
    bind(app, o, "--cF", "model.cF", "fiber scalar curvature");
    bind(app, o, "--f", "model.f", "warping function expression in r");
    bind(app, o, "--tol", "solver.tol", "solver tolerance");
    bind(app, o, "--max-iter", "solver.max_iter", "solver iteration cap");
    bind(app, o, "--seed", "run.seed", "random seed");
    bind(app, o, "--outdir", "run.outdir", "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Positive scalar curvature scenarios on cohomogeneity-one models"};
    app.require_subcommand(1);
    Options o;

    auto* classify = app.add_subcommand("classify", "Sign of the first conformal eigenvalue");
    auto* yamabe = app.add_subcommand("yamabe", "Constant scalar curvature in the conformal class");
    auto* prescribe = app.add_subcommand("prescribe", "Prescribe scalar curvature up to diffeomorphism");
    auto* cheeger = app.add_subcommand("cheeger", "Cheeger deformation sweep");
    auto* canonical = app.add_subcommand("canonical", "Canonical variation sweep");
    auto* approx = app.add_subcommand("approx", "Approximate a target by f o phi");
    for (auto* sub : {classify, yamabe, prescribe, cheeger, canonical, approx}) add_common(*sub, o);

    bind(*yamabe, o, "--c", "yamabe.c", "constraint constant");
    yamabe->add_flag("--negative", o.negative, "use the negative-constant Newton solve");
    bind(*prescribe, o, "--target", "prescribe.target", "target expression or file of N values");
    bind(*prescribe, o, "--p", "prescribe.p", "L^p exponent of the approximation");
    bind(*prescribe, o, "--eps", "prescribe.eps", "approximation accuracy");
    bind(*cheeger, o, "--t-max", "cheeger.t_max", "largest Cheeger time");
    bind(*canonical, o, "--sweep", "canonical.sweep", "s_min:s_max:steps");
    bind(*approx, o, "--target", "approx.target", "target expression or file");
    bind(*approx, o, "--fn", "approx.f", "function to compose, or 'random'");
    bind(*approx, o, "--p", "approx.p", "L^p exponent");
    bind(*approx, o, "--eps", "approx.eps", "accuracy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        psc::ConfigMap map;
        if (!o.config.empty()) map = psc::load_config_file(o.config);
        map["command"] = app.get_subcommands().front()->get_name();
        for (const auto& [k, v] : o.overrides) map[k] = v;
        if (o.negative) map["yamabe.negative"] = "true";
        const psc::ScenarioConfig cfg = psc::ScenarioConfig::from_map(map);
        const psc::RunReport rep = psc::run_scenario(cfg);
        for (const auto& [k, v] : rep.entries) std::cout << k << " = " << v << '\n';
        std::cout << "status = " << rep.status << '\n';
        std::printf("wall_seconds = %.3f\n", rep.wall_seconds);
        std::cout << "report = " << (cfg.outdir / "report.txt").string() << '\n';
        return rep.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
