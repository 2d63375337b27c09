#pragma once

// Scenario runner behind the command-line tool: configuration, model
// construction, stage execution and artifact emission.

#include "psc/models.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace psc {

enum class Command { classify, yamabe, prescribe, cheeger, canonical, approx };

std::string to_string(Command c);
Command parse_command(const std::string& name);
/// Preset used when model.preset is absent.
std::string default_preset(Command c);

/// Flat dotted key-value configuration ("key = value", '#' comments).
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::filesystem::path& path);

struct ScenarioConfig {
    Command command = Command::classify;
    std::string preset = "round-fiber";
    int N = 256;
    std::optional<double> L;
    std::optional<int> k;
    std::optional<double> cF;
    std::optional<std::string> f_expr;
    std::optional<double> tol;
    std::optional<int> max_iter;
    unsigned seed = 1;
    std::filesystem::path outdir = "psc-out";

    std::optional<double> yamabe_c;
    bool yamabe_negative = false;
    std::string prescribe_target = "6*(1+0.1*sin(r))";
    double p = 2.0;
    double eps = 1e-2;
    double t_max = 1e4;
    std::string sweep = "0.01:2:200";
    std::string approx_f = "sin(r)";
    std::string approx_target = "0";

    /// Applies recognized keys; unknown keys or bad values throw ConfigError.
    static ScenarioConfig from_map(const ConfigMap& map);
    ConfigMap to_map() const;
};

/// Expression in r built from numbers, pi, r, sin, cos, + - * / ^ and parentheses.
class FExpression {
public:
    static FExpression parse(const std::string& text);
    double operator()(double r) const;
    const std::string& text() const { return text_; }

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
};

/// Warped model from a preset plus the model.* overrides.
WarpedProductMetric build_warped_model(const ScenarioConfig& cfg);

/// Comma-separated, header line, %.17g numbers, newline-terminated.
void emit_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
              const std::vector<std::vector<double>>& rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Two-column space-separated file for gnuplot.
void emit_plotdata(const std::filesystem::path& path, const std::vector<double>& x, const std::vector<double>& y);

struct RunReport {
    int exit_code = 0;
    std::string status;  // ok | rejected | failed | error
    std::vector<std::pair<std::string, std::string>> entries;
    double wall_seconds = 0.0;

    void add(const std::string& key, double value);
    void add(const std::string& key, const std::string& value);
    std::optional<std::string> get(const std::string& key) const;
};

/// Runs one scenario, writes its artifacts and report.txt under cfg.outdir.
/// Never throws for model or solver failures: they become exit codes
/// 2 (precondition rejection), 3 (solver failure) or 4 (config or I/O).
RunReport run_scenario(const ScenarioConfig& cfg);

}  // namespace psc
