#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace opsheaf::app {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kValidation = 2,
    kDivergence = 3,
    kNonConvergence = 4,
    kNumerical = 5,
    kCheckFailure = 6,
};

enum class Mode { Validate, Diffuse, Poisson, Learn, Joint, Analyze, Audit };

const char* to_string(Mode m);

struct RunConfig {
    Mode mode = Mode::Validate;
    std::filesystem::path model;
    std::optional<std::filesystem::path> trajectory_in;  ///< analyze
    std::optional<std::filesystem::path> trajectory_out; ///< CSV of the run
    std::optional<std::filesystem::path> model_out;      ///< final state as a model file
    std::optional<std::filesystem::path> analysis_out;   ///< analyze: t, ratio_lambda, ratio_mu, psi

    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> lambda;
    std::optional<double> mu;
    double t_max = 200.0;
    double stride = 0.1;
    double rtol = 1e-8;
    double atol = 1e-10;
    double convergence_tol = 1e-9;
    double ceiling_factor = 1e6;
    double epsilon = 0.1;
    bool invert_adaptation = false;
    std::vector<std::string> audit_vertices;
    std::uint64_t seed = 0;
};

/// Named sections of key/value rows, printed in insertion order.
struct RunReport {
    struct Section {
        std::string name;
        std::vector<std::pair<std::string, std::string>> rows;
        void add(std::string key, std::string value) { rows.emplace_back(std::move(key), std::move(value)); }
    };

    std::vector<Section> sections;
    int exit_code = kOk;
    double wall_seconds = 0.0;

    Section& section(const std::string& name);
    [[nodiscard]] std::string render() const;
};

/// Runs one job; numerical and validation failures are reported through
/// exit_code rather than thrown.
RunReport run(const RunConfig& config);

struct SweepConfig {
    RunConfig base;
    std::string parameter; ///< alpha, beta, lambda or mu
    std::vector<double> values;
    unsigned jobs = 1;
};

RunReport sweep(const SweepConfig& config);

struct CheckResult {
    int criterion = 0;
    std::string key;
    bool pass = false;
    std::string expected;
    std::string computed;
};

struct SuiteReport {
    std::vector<CheckResult> checks;
    [[nodiscard]] bool all_pass() const;
    [[nodiscard]] std::string render() const;
};

/// Runs every figure and appendix check from the bundled model files.
/// Tolerances are max(default, tol_floor).
SuiteReport reproduce_paper(const std::filesystem::path& models_dir, double tol_floor = 0.0);

} // namespace opsheaf::app
