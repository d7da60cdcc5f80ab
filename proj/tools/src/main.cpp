#include "opsheaf_app/app.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using opsheaf::app::Mode;
using opsheaf::app::RunConfig;

void add_common(CLI::App& sub, RunConfig& c)
{
    sub.add_option("model", c.model, "model file")->required()->check(CLI::ExistingFile);
    sub.add_option("--t-max", c.t_max, "integration horizon")->capture_default_str();
    sub.add_option("--stride", c.stride, "sample spacing")->capture_default_str();
    sub.add_option("--rtol", c.rtol, "relative tolerance")->capture_default_str();
    sub.add_option("--atol", c.atol, "absolute tolerance")->capture_default_str();
    sub.add_option("--convergence-tol", c.convergence_tol, "velocity norm that ends a run")->capture_default_str();
    sub.add_option("--ceiling", c.ceiling_factor, "divergence ceiling factor")->capture_default_str();
    sub.add_option("--seed", c.seed, "seed recorded in the report")->capture_default_str();
    sub.add_option("--model-out", c.model_out, "write the final state as a model file");
    sub.add_option("--trajectory-out", c.trajectory_out, "write the trajectory CSV");
    sub.add_flag("--invert-adaptation", c.invert_adaptation, "swap adapting and frozen incidences");
}

void add_rates(CLI::App& sub, RunConfig& c)
{
    sub.add_option("--alpha", c.alpha, "opinion rate");
    sub.add_option("--beta", c.beta, "structure rate");
    sub.add_option("--lambda", c.lambda, "opinion anchoring weight");
    sub.add_option("--mu", c.mu, "structure anchoring weight");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Opinion dynamics on cellular sheaves"};
    app.require_subcommand(1);

    RunConfig cfg;
    struct Entry {
        const char* name;
        const char* help;
        Mode mode;
    };
    const Entry modes[] = {
        {"validate", "load a model and print its summary", Mode::Validate},
        {"diffuse", "Laplacian diffusion, constrained when the model has stubborn agents", Mode::Diffuse},
        {"poisson", "closed-form equilibrium with stubborn agents", Mode::Poisson},
        {"learn", "structure learning at fixed opinions", Mode::Learn},
        {"joint", "joint opinion and structure dynamics", Mode::Joint},
        {"analyze", "spectral gaps and stagnation bounds from a joint trajectory CSV", Mode::Analyze},
        {"audit", "exact sequence, compatibility and structure-sheaf identities", Mode::Audit},
    };
    std::vector<std::pair<CLI::App*, Mode>> run_subs;
    for (const auto& m : modes) {
        CLI::App* sub = app.add_subcommand(m.name, m.help);
        add_common(*sub, cfg);
        add_rates(*sub, cfg);
        if (m.mode == Mode::Joint) {
            sub->add_option("--audit-vertex", cfg.audit_vertices, "vertices for the conservation audit");
        }
        if (m.mode == Mode::Analyze) {
            sub->add_option("--trajectory-in", cfg.trajectory_in, "joint trajectory CSV")
                ->required()
                ->check(CLI::ExistingFile);
            sub->add_option("--analysis-out", cfg.analysis_out, "flat CSV of t, ratio_lambda, ratio_mu, psi");
            sub->add_option("--epsilon", cfg.epsilon, "displacement budget for the regime thresholds")
                ->capture_default_str();
        }
        run_subs.emplace_back(sub, m.mode);
    }

    opsheaf::app::SweepConfig sweep_cfg;
    CLI::App* sweep = app.add_subcommand("sweep", "joint runs over a parameter grid");
    add_common(*sweep, sweep_cfg.base);
    add_rates(*sweep, sweep_cfg.base);
    sweep->add_option("--parameter", sweep_cfg.parameter, "alpha, beta, lambda or mu")
        ->required()
        ->check(CLI::IsMember({"alpha", "beta", "lambda", "mu"}));
    sweep->add_option("--values", sweep_cfg.values, "values to run")->required();
    sweep->add_option("--jobs", sweep_cfg.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    std::filesystem::path models_dir = "models";
    double tol_floor = 0.0;
    CLI::App* repro = app.add_subcommand("reproduce-paper", "run every figure and appendix check");
    repro->add_option("--models", models_dir, "directory of bundled model files")->capture_default_str();
    repro->add_option("--tol", tol_floor, "lower bound on every check tolerance")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : opsheaf::app::kUsage;
    }

    if (repro->parsed()) {
        const auto report = opsheaf::app::reproduce_paper(models_dir, tol_floor);
        std::cout << report.render();
        return report.all_pass() ? opsheaf::app::kOk : opsheaf::app::kCheckFailure;
    }
    if (sweep->parsed()) {
        const auto report = opsheaf::app::sweep(sweep_cfg);
        std::cout << report.render();
        return report.exit_code;
    }
    for (const auto& [sub, mode] : run_subs) {
        if (sub->parsed()) {
            cfg.mode = mode;
            const auto report = opsheaf::app::run(cfg);
            std::cout << report.render();
            return report.exit_code;
        }
    }
    return opsheaf::app::kUsage;
}
