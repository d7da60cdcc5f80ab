#include "opsheaf_app/app.hpp"

#include <opsheaf/errors.hpp>
#include <opsheaf/free_opinions.hpp>
#include <opsheaf/joint_dynamics.hpp>
#include <opsheaf/model_io.hpp>
#include <opsheaf/sheaf.hpp>
#include <opsheaf/structure_learning.hpp>
#include <opsheaf/timescale.hpp>

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace opsheaf::app {

namespace {

using Section = RunReport::Section;

std::string num(double v)
{
    return format_double(v);
}

std::string vec(const Vector& v)
{
    std::string out = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out += (i ? ", " : "") + num(v[i]);
    }
    return out + ")";
}

std::string yes(bool b)
{
    return b ? "yes" : "no";
}

int status_code(ode::Status s)
{
    switch (s) {
    case ode::Status::Converged: return kOk;
    case ode::Status::Diverged: return kDivergence;
    default: return kNonConvergence;
    }
}

// Picks flag, then model parameter, then the documented default; records the source.
double resolve(Section& cfg, const char* name, std::optional<double> flag, std::optional<double> from_model,
               double fallback)
{
    if (flag) {
        cfg.add(name, num(*flag) + " (flag)");
        return *flag;
    }
    if (from_model) {
        cfg.add(name, num(*from_model) + " (model)");
        return *from_model;
    }
    cfg.add(name, num(fallback) + " (default)");
    return fallback;
}

void echo_common(Section& cfg, const RunConfig& c)
{
    cfg.add("mode", to_string(c.mode));
    cfg.add("model", c.model.string());
    cfg.add("t_max", num(c.t_max));
    cfg.add("stride", num(c.stride));
    cfg.add("rtol", num(c.rtol));
    cfg.add("atol", num(c.atol));
    cfg.add("convergence_tol", num(c.convergence_tol));
    cfg.add("ceiling_factor", num(c.ceiling_factor));
    cfg.add("seed", std::to_string(c.seed));
}

FlowOptions flow_options(const RunConfig& c)
{
    FlowOptions o;
    o.t_end = c.t_max;
    o.sample_interval = c.stride;
    o.rtol = c.rtol;
    o.atol = c.atol;
    o.convergence_tol = c.convergence_tol;
    return o;
}

JointOptions joint_options(const RunConfig& c)
{
    JointOptions o;
    o.t_end = c.t_max;
    o.sample_interval = c.stride;
    o.rtol = c.rtol;
    o.atol = c.atol;
    o.convergence_tol = c.convergence_tol;
    o.ceiling_factor = c.ceiling_factor;
    return o;
}

void check_positive(const RunConfig& c)
{
    auto pos = [](double v, const char* name) {
        if (!(v > 0.0)) {
            throw ParameterError(std::string(name) + " must be positive");
        }
    };
    pos(c.t_max, "t_max");
    pos(c.rtol, "rtol");
    pos(c.atol, "atol");
    pos(c.ceiling_factor, "ceiling_factor");
    if (!(c.stride >= 0.0)) {
        throw ParameterError("stride must be nonnegative");
    }
}

AdaptationSpec adaptation_for(const Model& m, const RunConfig& c)
{
    AdaptationSpec a = m.effective_adaptation();
    if (c.invert_adaptation) {
        a = AdaptationSpec::from_frozen(m.sheaf.graph(), a.adapting());
    }
    return a;
}

std::string incidence_label(const Graph& g, Incidence inc)
{
    return g.vertex_id(inc.vertex) + "/" + g.edge(inc.edge).id;
}

void write_model(const RunConfig& c, Model m)
{
    if (c.model_out) {
        save_model(*c.model_out, m);
    }
}

void edge_residuals(Section& s, const Sheaf& sheaf, const Vector& x)
{
    const Vector r = coboundary(sheaf, Cochain0{x}).values;
    for (EdgeIndex e = 0; e < sheaf.graph().edge_count(); ++e) {
        s.add("residual[" + sheaf.graph().edge(e).id + "]", vec(sheaf.edge_block(r, e)));
    }
}

// ---------------------------------------------------------------------------
// Modes

void run_validate(const RunConfig& c, const Model& m, RunReport& rep)
{
    Section& s = rep.section("model");
    const Sheaf& sheaf = m.sheaf;
    s.add("vertices", std::to_string(sheaf.graph().vertex_count()));
    s.add("edges", std::to_string(sheaf.graph().edge_count()));
    s.add("dim_C0", std::to_string(sheaf.c0_dim()));
    s.add("dim_C1", std::to_string(sheaf.c1_dim()));
    s.add("dim_H0", std::to_string(global_sections(sheaf).cols()));
    s.add("connected", yes(sheaf.graph().is_connected()));
    if (m.opinion) {
        s.add("energy", num(disagreement_energy(sheaf, *m.opinion)));
    }
    const StubbornSpec spec = m.stubborn_or_none();
    const FreeOpinionSheaf free = build_free_sheaf(sheaf, spec);
    s.add("dim_C0_stubborn", std::to_string(free.blocks.frame.stubborn_dim()));
    s.add("dim_C0_free", std::to_string(free.blocks.frame.free_dim()));
    const AdaptationSpec adapt = adaptation_for(m, c);
    s.add("adapting_incidences", std::to_string(adapt.adapting().size()));
    const EdgeClassification cls = classify_edges(sheaf.graph(), spec, adapt, m.policy ? &*m.policy : nullptr);
    s.add("edges_FF/UU/UF", std::to_string(cls.free_free.size()) + "/" + std::to_string(cls.stubborn_stubborn.size())
                                + "/" + std::to_string(cls.mixed.size()));
    s.add("edges_typeS/typeA", std::to_string(cls.type_s.size()) + "/" + std::to_string(cls.type_a.size()));
    write_model(c, m);
}

void run_diffuse(const RunConfig& c, const Model& m, RunReport& rep)
{
    const Cochain0& x0 = m.require_opinion("diffuse");
    Section& cfg = rep.section("config");
    const double alpha = resolve(cfg, "alpha", c.alpha, m.parameters.alpha, 1.0);
    const StubbornSpec spec = m.stubborn_or_none();
    Section& s = rep.section("result");
    const Sheaf& sheaf = m.sheaf;
    s.add("initial_energy", num(disagreement_energy(sheaf, x0)));

    Vector final_x;
    Vector closed;
    Trajectory traj;
    if (spec.stubborn_vertices().empty()) {
        traj = diffuse(sheaf, x0, alpha, flow_options(c));
        final_x = traj.final_state();
        closed = project_H0(sheaf, x0).values;
        s.add("closed_form", "projection onto H0");
    } else {
        const FreeOpinionSheaf free = build_free_sheaf(sheaf, spec);
        const Vector u = spec.packed_values();
        const Vector y0 = free.blocks.frame.free_part(x0.values);
        ConstrainedTrajectory ct = constrained_diffuse(free.blocks, u, y0, alpha, flow_options(c));
        final_x = ct.total.back();
        closed = solve_poisson(free.blocks, u, y0).x_inf;
        traj = std::move(ct.free);
        s.add("closed_form", "Poisson equilibrium");
    }
    s.add("status", std::string(ode::to_string(traj.status)));
    s.add("final_time", num(traj.final_time()));
    s.add("final_state", vec(final_x));
    s.add("closed_form_state", vec(closed));
    s.add("ode_vs_closed_form", num((final_x - closed).norm()));
    s.add("final_energy", num(disagreement_energy(sheaf, Cochain0{final_x})));
    s.add("energy_nonincreasing", yes(traj.energy_nonincreasing(1e-12)));
    edge_residuals(s, sheaf, final_x);
    if (c.trajectory_out) {
        std::ofstream out(*c.trajectory_out);
        write_trajectory_csv(out, traj, "diffuse");
    }
    Model fm = m;
    fm.opinion = Cochain0{final_x};
    write_model(c, fm);
    rep.exit_code = status_code(traj.status);
}

void run_poisson(const RunConfig& c, const Model& m, RunReport& rep)
{
    const Cochain0& x0 = m.require_opinion("poisson");
    const StubbornSpec spec = m.stubborn_or_none();
    const Sheaf& sheaf = m.sheaf;
    const FreeOpinionSheaf free = build_free_sheaf(sheaf, spec);
    const Vector u = spec.packed_values();
    const Vector y0 = free.blocks.frame.free_part(x0.values);
    const PoissonSolution sol = solve_poisson(free.blocks, u, y0);

    Section& s = rep.section("result");
    s.add("dim_C0_stubborn", std::to_string(free.blocks.frame.stubborn_dim()));
    s.add("dim_C0_free", std::to_string(free.blocks.frame.free_dim()));
    s.add("equilibrium", vec(sol.x_inf));
    s.add("formula_spread", num(sol.formula_spread));
    s.add("poisson_residual", num(sol.residual));
    const double energy = disagreement_energy(sheaf, Cochain0{sol.x_inf});
    s.add("energy", num(energy));
    s.add("discrepancy_sq", num(2 * energy));
    edge_residuals(s, sheaf, sol.x_inf);
    const CompatibilityResult comp = compatibility_obstruction(sheaf, spec);
    s.add("compatible", yes(comp.compatible));
    s.add("obstruction_residual", num(comp.obstruction_residual));
    Model fm = m;
    fm.opinion = Cochain0{sol.x_inf};
    write_model(c, fm);
}

void run_learn(const RunConfig& c, const Model& m, RunReport& rep)
{
    const Cochain0& x = m.require_opinion("learn");
    const Sheaf& sheaf = m.sheaf;
    const AdaptationSpec adapt = adaptation_for(m, c);
    Section& cfg = rep.section("config");
    const double beta = resolve(cfg, "beta", c.beta, m.parameters.beta, 1.0);
    const std::optional<double> lambda = c.lambda ? c.lambda : m.parameters.lambda;
    cfg.add("lambda", lambda ? num(*lambda) : "none (unregularized)");

    const DiscrepancySystem sys = build_discrepancy_system(sheaf, x, adapt);
    const Vector rho0 = gather_maps(sheaf, sys.layout);
    Section& s = rep.section("result");
    s.add("dim_V_maps", std::to_string(sys.layout.dim()));
    s.add("dim_W", std::to_string(sys.a.rows()));
    s.add("initial_discrepancy_sq", num(sys.discrepancy(rho0).squaredNorm()));

    Vector closed;
    Trajectory traj;
    if (lambda) {
        closed = regularized_learning(sys, rho0, *lambda);
        traj = regularized_learning_flow(sys, rho0, beta, *lambda, flow_options(c));
    } else {
        const LearningLimit lim = learning_limit(sys, rho0);
        closed = lim.rho_inf;
        s.add("formula_spread", num(lim.formula_spread));
        s.add("consistent", yes(lim.consistent));
        traj = learning_flow(sys, rho0, beta, flow_options(c));
    }
    s.add("status", std::string(ode::to_string(traj.status)));
    s.add("flow_vs_closed_form", num((traj.final_state() - closed).norm()));
    const Sheaf learned = scatter_maps(sheaf, sys.layout, closed);
    const Vector r = coboundary(learned, x).values;
    s.add("final_discrepancy_sq", num(r.squaredNorm()));
    for (std::size_t i = 0; i < sys.layout.keys.size(); ++i) {
        s.add("map[" + incidence_label(sheaf.graph(), sys.layout.keys[i]) + "]",
              vec(closed.segment(sys.layout.blocks.offset(i), sys.layout.blocks.size(i))));
    }
    const EquilibriumReport eq = equilibrium_residuals(learned, x, adapt);
    Section& es = rep.section("equilibrium");
    for (const auto& rec : eq.edges) {
        es.add(sheaf.graph().edge(rec.edge).id, std::string(to_string(rec.kind)) + " residual=" + num(rec.residual));
    }
    if (c.trajectory_out) {
        std::ofstream out(*c.trajectory_out);
        write_trajectory_csv(out, traj, "learn");
    }
    Model fm = m;
    fm.sheaf = learned;
    write_model(c, fm);
    rep.exit_code = status_code(traj.status);
}

std::vector<VertexIndex> audit_list(const Model& m, const RunConfig& c)
{
    std::vector<VertexIndex> out;
    for (const auto& id : c.audit_vertices) {
        out.push_back(m.sheaf.graph().vertex_index(id));
    }
    return out;
}

void report_joint(const RunConfig& c, const Model& m, const JointTrajectory& traj, RunReport& rep)
{
    const auto& sys = traj.system;
    const Graph& g = m.sheaf.graph();
    Section& s = rep.section("result");
    s.add("status", std::string(ode::to_string(traj.status)));
    if (!traj.message.empty()) {
        s.add("message", traj.message);
    }
    s.add("final_time", num(traj.times.back()));
    s.add("accepted_steps", std::to_string(traj.accepted_steps));
    s.add("initial_psi", num(traj.psi.front()));
    s.add("final_psi", num(traj.psi.back()));
    s.add("initial_frobenius_sq", num(traj.frobenius.front() * traj.frobenius.front()));
    s.add("final_frobenius_sq", num(traj.frobenius.back() * traj.frobenius.back()));
    s.add("psi_max_increase", num(traj.max_psi_increase()));
    s.add("frobenius_max_increase", num(traj.max_frobenius_increase()));
    if (traj.regularization) {
        s.add("lyapunov_max_increase", num(traj.max_lyapunov_increase()));
        const RegularizedBounds b = regularized_bounds(traj);
        s.add("opinion_displacement_sq", num(b.max_opinion_displacement_sq) + " <= " + num(b.opinion_bound));
        s.add("map_displacement_sq", num(b.max_map_displacement_sq) + " <= " + num(b.map_bound));
        s.add("a_priori_bounds_hold", yes(b.holds()));
    }
    s.add("final_opinion", vec(sys.opinion(traj.final_state())));
    const Sheaf fs = sys.sheaf_at(traj.final_state());
    for (const auto& inc : g.incidences()) {
        s.add("map[" + incidence_label(g, inc) + "]", vec(flatten_row_major(fs.restriction(inc))));
    }

    const EdgeClassification cls = classify_edges(g, sys.stubborn(), sys.adaptation(), m.policy ? &*m.policy : nullptr);
    Section& es = rep.section("equilibrium");
    const EquilibriumReport eq = equilibrium_residuals(traj);
    for (const auto& rec : eq.edges) {
        const bool type_a = std::find(cls.type_a.begin(), cls.type_a.end(), rec.edge) != cls.type_a.end();
        std::string row = std::string(to_string(rec.kind)) + " residual=" + num(rec.residual)
                          + " type=" + (type_a ? "A" : "S");
        if (cls.policy[rec.edge]) {
            row += std::string(" policy=") + to_string(*cls.policy[rec.edge]);
        }
        if (rec.silenced) {
            row += " silenced";
        }
        es.add(g.edge(rec.edge).id, row);
    }
    const auto audited = audit_list(m, c);
    if (!audited.empty()) {
        const ConservationReport cons = conservation_audit(traj, audited);
        Section& cs = rep.section("conservation");
        cs.add("tolerance", num(cons.tolerance));
        for (const auto& v : cons.vertices) {
            std::string row = v.applicable ? "drift=" + num(v.max_drift) : "not applicable: " + v.reason;
            row += " eigenvalues=" + vec(v.eigenvalues);
            if (v.opinion_persists) row += " opinion-persists";
            if (v.maps_persist) row += " maps-persist";
            cs.add(g.vertex_id(v.vertex), row);
        }
        if (!cons.holds()) {
            rep.exit_code = kCheckFailure;
        }
    }
}

JointTrajectory joint_run(const RunConfig& c, const Model& m, Section& cfg)
{
    const Cochain0& x0 = m.require_opinion("joint");
    const double alpha = resolve(cfg, "alpha", c.alpha, m.parameters.alpha, 1.0);
    const double beta = resolve(cfg, "beta", c.beta, m.parameters.beta, 1.0);
    const std::optional<double> lambda = c.lambda ? c.lambda : m.parameters.lambda;
    const std::optional<double> mu = c.mu ? c.mu : m.parameters.mu;
    if (lambda.has_value() != mu.has_value()) {
        throw ParameterError("regularized joint flow needs both lambda and mu");
    }
    cfg.add("lambda", lambda ? num(*lambda) : "none");
    cfg.add("mu", mu ? num(*mu) : "none");
    JointSystem sys(m.sheaf, m.stubborn_or_none(), adaptation_for(m, c));
    return lambda ? regularized_joint_flow(sys, x0, alpha, beta, *lambda, *mu, joint_options(c))
                  : joint_flow(sys, x0, alpha, beta, joint_options(c));
}

void run_joint(const RunConfig& c, const Model& m, RunReport& rep)
{
    Section& cfg = rep.section("config");
    const JointTrajectory traj = joint_run(c, m, cfg);
    rep.exit_code = status_code(traj.status);
    report_joint(c, m, traj, rep);
    if (c.trajectory_out) {
        std::ofstream out(*c.trajectory_out);
        write_joint_csv(out, traj, audit_list(m, c));
    }
    Model fm = m;
    fm.sheaf = traj.system.sheaf_at(traj.final_state());
    fm.opinion = Cochain0{traj.system.opinion(traj.final_state())};
    write_model(c, fm);
}

void run_analyze(const RunConfig& c, const Model& m, RunReport& rep)
{
    if (!c.trajectory_in) {
        throw ValidationError("analyze needs --trajectory-in");
    }
    JointSystem sys(m.sheaf, m.stubborn_or_none(), adaptation_for(m, c));
    std::ifstream in(*c.trajectory_in);
    if (!in) {
        throw ValidationError("cannot open trajectory '" + c.trajectory_in->string() + "'");
    }
    const JointCsv csv = read_joint_csv(in, sys.state_dim());
    Section& cfg = rep.section("config");
    const double alpha = resolve(cfg, "alpha", c.alpha, csv.alpha ? csv.alpha : m.parameters.alpha, 1.0);
    const double beta = resolve(cfg, "beta", c.beta, csv.beta ? csv.beta : m.parameters.beta, 1.0);
    cfg.add("epsilon", num(c.epsilon));
    const JointTrajectory traj = trajectory_from_samples(sys, csv, alpha, beta);
    const GapEstimate gaps = estimate_gaps(traj);

    Section& s = rep.section("gaps");
    s.add("samples", std::to_string(gaps.samples.size()));
    s.add("stride", num(gaps.stride));
    s.add("lambda_eff", num(gaps.lambda_eff));
    s.add("mu_eff", num(gaps.mu_eff));
    s.add("B_x", num(gaps.b_x));
    s.add("B_delta", num(gaps.b_delta));
    s.add("initial_discrepancy", num(gaps.initial_discrepancy));
    s.add("equilibrium_reached", yes(gaps.equilibrium_reached));
    s.add("mu_formula_gap", num(gaps.max_mu_formula_gap));

    auto bound_section = [&](const char* name, const BoundReport& b) {
        Section& bs = rep.section(name);
        bs.add("applicable", yes(b.applicable));
        if (!b.reason.empty()) bs.add("reason", b.reason);
        bs.add("observed", num(b.observed));
        bs.add("bound", num(b.bound));
        bs.add("bound_limit", num(b.bound_limit));
        bs.add("slack", num(b.slack));
        bs.add("premise_holds", yes(b.premise_holds));
        bs.add("passed", yes(b.passed()));
        if (b.conditional_bound) bs.add("conditional_bound", num(*b.conditional_bound) + " (conditional)");
        if (b.applicable && !b.passed()) rep.exit_code = kCheckFailure;
    };
    bound_section("structural_stagnation", check_structural_stagnation(traj, gaps));
    bound_section("opinion_stagnation", check_opinion_stagnation(traj, gaps));
    if (gaps.lambda_eff > 0 && gaps.mu_eff > 0 && gaps.initial_discrepancy > 0) {
        const RegimeThresholds t =
            regime_thresholds(c.epsilon, gaps.lambda_eff, gaps.mu_eff, gaps.b_x, gaps.b_delta, gaps.initial_discrepancy);
        Section& ts = rep.section("thresholds");
        ts.add("rho_minus", num(t.rho_minus));
        ts.add("rho_plus", num(t.rho_plus));
        ts.add("ordered", yes(t.ordered()));
        ts.add("rate_ratio", num(beta / alpha));
    }
    if (c.analysis_out) {
        std::ofstream out(*c.analysis_out);
        out << "t,ratio_lambda,ratio_mu,psi\n";
        for (const auto& smp : gaps.samples) {
            out << num(smp.time) << ',' << num(smp.ratio_lambda) << ',' << num(smp.ratio_mu) << ',' << num(smp.psi)
                << '\n';
        }
    }
}

void run_audit(const RunConfig& c, const Model& m, RunReport& rep)
{
    const Sheaf& sheaf = m.sheaf;
    const StubbornSpec spec = m.stubborn_or_none();
    const ExactSequenceReport ex = exact_sequence_audit(sheaf, spec);
    Section& s = rep.section("exact_sequence");
    s.add("h0_free", std::to_string(ex.h0_free));
    s.add("h0", std::to_string(ex.h0_full));
    s.add("c0_stubborn", std::to_string(ex.c0_stubborn));
    s.add("h1_free", std::to_string(ex.h1_free));
    s.add("h1", std::to_string(ex.h1_full));
    s.add("alternating_sum", std::to_string(ex.alternating_sum()));
    s.add("exact", yes(ex.exact()));
    bool ok = ex.exact();

    const CompatibilityResult comp = compatibility_obstruction(sheaf, spec);
    Section& cs = rep.section("compatibility");
    cs.add("compatible", yes(comp.compatible));
    cs.add("obstruction_residual", num(comp.obstruction_residual));

    const FreeOpinionSheaf free = build_free_sheaf(sheaf, spec);
    Section& bs = rep.section("block_laplacian");
    const double rot = (free.blocks.reassembled() - free.blocks.rotated_laplacian()).cwiseAbs().maxCoeff();
    const double sym = (free.blocks.l_qs.matrix - free.blocks.l_sq.matrix.transpose()).cwiseAbs().maxCoeff();
    bs.add("reassembly_error", num(free.blocks.reassembled().size() ? rot : 0.0));
    bs.add("symmetry_error", num(free.blocks.l_qs.matrix.size() ? sym : 0.0));

    if (m.opinion) {
        const AdaptationSpec adapt = adaptation_for(m, c);
        const DiscrepancySystem sys = build_discrepancy_system(sheaf, *m.opinion, adapt);
        const Sheaf h = build_structure_sheaf(sheaf, *m.opinion, adapt);
        const Matrix dh = coboundary_matrix(h).matrix;
        const Matrix lh = laplacian(h).matrix;
        const Matrix ata = sys.a.matrix.transpose() * sys.a.matrix;
        Section& ss = rep.section("structure_sheaf");
        const double e1 = dh.size() ? (dh - sys.a.matrix).cwiseAbs().maxCoeff() : 0.0;
        const double e2 = lh.size() ? (lh - ata).cwiseAbs().maxCoeff() : 0.0;
        // Forcing from the full structure sheaf, restricted to E'.
        const Sheaf hf = build_full_structure_sheaf(sheaf, *m.opinion);
        const Vector full = coboundary_matrix(hf).matrix * frozen_embedding(sheaf, adapt);
        Vector restricted(sys.c.size());
        Eigen::Index at = 0;
        for (EdgeIndex e : sys.active_edges) {
            restricted.segment(at, sheaf.edge_dim(e)) = hf.edge_block(full, e);
            at += sheaf.edge_dim(e);
        }
        const double e3 = (restricted - sys.c).norm();
        ss.add("coboundary_vs_A", num(e1));
        ss.add("laplacian_vs_AtA", num(e2));
        ss.add("forcing_vs_c", num(e3));
        ok = ok && e1 <= 1e-12 && e2 <= 1e-12 * std::max(1.0, ata.norm()) && e3 <= 1e-12 * std::max(1.0, sys.c.norm());
    }
    if (!ok) {
        rep.exit_code = kCheckFailure;
    }
}

} // namespace

const char* to_string(Mode m)
{
    switch (m) {
    case Mode::Validate: return "validate";
    case Mode::Diffuse: return "diffuse";
    case Mode::Poisson: return "poisson";
    case Mode::Learn: return "learn";
    case Mode::Joint: return "joint";
    case Mode::Analyze: return "analyze";
    case Mode::Audit: return "audit";
    }
    return "?";
}

RunReport::Section& RunReport::section(const std::string& name)
{
    for (auto& s : sections) {
        if (s.name == name) {
            return s;
        }
    }
    sections.push_back({name, {}});
    return sections.back();
}

std::string RunReport::render() const
{
    std::ostringstream out;
    for (const auto& s : sections) {
        out << "[" << s.name << "]\n";
        for (const auto& [k, v] : s.rows) {
            out << k << " = " << v << "\n";
        }
        out << "\n";
    }
    out << "exit_code = " << exit_code << "\n";
    return out.str();
}

RunReport run(const RunConfig& config)
{
    const auto start = std::chrono::steady_clock::now();
    RunReport rep;
    echo_common(rep.section("config"), config);
    try {
        check_positive(config);
        const Model model = load_model(config.model);
        switch (config.mode) {
        case Mode::Validate: run_validate(config, model, rep); break;
        case Mode::Diffuse: run_diffuse(config, model, rep); break;
        case Mode::Poisson: run_poisson(config, model, rep); break;
        case Mode::Learn: run_learn(config, model, rep); break;
        case Mode::Joint: run_joint(config, model, rep); break;
        case Mode::Analyze: run_analyze(config, model, rep); break;
        case Mode::Audit: run_audit(config, model, rep); break;
        }
    } catch (const NumericalError& e) {
        rep.section("error").add("numerical", e.what());
        rep.exit_code = kNumerical;
    } catch (const Error& e) {
        rep.section("error").add("validation", e.what());
        rep.exit_code = kValidation;
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

RunReport sweep(const SweepConfig& config)
{
    RunReport rep;
    echo_common(rep.section("config"), config.base);
    rep.section("config").add("sweep_parameter", config.parameter);
    rep.section("config").add("jobs", std::to_string(config.jobs));
    try {
        const Model model = load_model(config.base.model);
        std::vector<RunConfig> jobs;
        for (double v : config.values) {
            RunConfig c = config.base;
            c.mode = Mode::Joint;
            c.trajectory_out.reset();
            c.model_out.reset();
            if (config.parameter == "alpha") c.alpha = v;
            else if (config.parameter == "beta") c.beta = v;
            else if (config.parameter == "lambda") c.lambda = v;
            else if (config.parameter == "mu") c.mu = v;
            else throw ParameterError("sweep parameter must be alpha, beta, lambda or mu");
            jobs.push_back(std::move(c));
        }

        struct Row {
            std::string text;
            int code = kOk;
        };
        std::vector<Row> rows(jobs.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < jobs.size(); i = next++) {
                RunReport scratch;
                try {
                    const JointTrajectory t = joint_run(jobs[i], model, scratch.section("config"));
                    const auto& sys = t.system;
                    const double dmap = (sys.maps_part(t.final_state()) - sys.maps_part(t.states.front())).norm();
                    const double dx = (sys.opinion(t.final_state()) - sys.opinion(t.states.front())).norm();
                    rows[i].text = std::string(ode::to_string(t.status)) + " final_psi=" + num(t.psi.back())
                                   + " map_displacement=" + num(dmap) + " opinion_displacement=" + num(dx);
                    rows[i].code = status_code(t.status);
                } catch (const NumericalError& e) {
                    rows[i] = {std::string("error: ") + e.what(), kNumerical};
                } catch (const Error& e) {
                    rows[i] = {std::string("error: ") + e.what(), kValidation};
                }
            }
        };
        std::vector<std::thread> pool;
        const unsigned n = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(jobs.size())));
        for (unsigned t = 0; t < n; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
        RunReport::Section& s = rep.section("sweep");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            s.add(config.parameter + "=" + num(config.values[i]), rows[i].text);
            rep.exit_code = std::max(rep.exit_code, rows[i].code);
        }
    } catch (const Error& e) {
        rep.section("error").add("validation", e.what());
        rep.exit_code = kValidation;
    }
    return rep;
}

} // namespace opsheaf::app
