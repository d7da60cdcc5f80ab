#include "opsheaf_app/app.hpp"

#include <opsheaf/errors.hpp>
#include <opsheaf/free_opinions.hpp>
#include <opsheaf/joint_dynamics.hpp>
#include <opsheaf/model_io.hpp>
#include <opsheaf/sheaf.hpp>
#include <opsheaf/structure_learning.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

namespace opsheaf::app {

namespace {

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

Vector make(std::initializer_list<double> xs)
{
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        v[i++] = x;
    }
    return v;
}

class Recorder {
public:
    Recorder(SuiteReport& out, double floor) : out_(out), floor_(floor) {}

    double tol(double base) const { return std::max(base, floor_); }

    void flag(int criterion, std::string key, bool pass, std::string expected, std::string computed)
    {
        out_.checks.push_back({criterion, std::move(key), pass, std::move(expected), std::move(computed)});
    }

    void scalar(int criterion, std::string key, double expected, double computed, double base_tol)
    {
        const double t = tol(base_tol);
        flag(criterion, std::move(key), std::abs(expected - computed) <= t, num(expected) + " +- " + num(t),
             num(computed));
    }

    void vector(int criterion, std::string key, const Vector& expected, const Vector& computed, double base_tol)
    {
        const double t = tol(base_tol);
        const bool ok = expected.size() == computed.size() && (expected - computed).cwiseAbs().maxCoeff() <= t;
        flag(criterion, std::move(key), ok, vec(expected) + " +- " + num(t), vec(computed));
    }

    void at_most(int criterion, std::string key, double limit, double computed)
    {
        flag(criterion, std::move(key), computed <= limit, "<= " + num(limit), num(computed));
    }

    // Runs one figure's block; any exception fails that block only.
    void guarded(int criterion, const std::string& key, const std::function<void()>& body)
    {
        try {
            body();
        } catch (const std::exception& e) {
            flag(criterion, key + ".error", false, "no error", e.what());
        }
    }

private:
    SuiteReport& out_;
    double floor_;
};

FlowOptions tight_flow()
{
    FlowOptions o;
    o.t_end = 2000.0;
    o.sample_interval = 0.5;
    o.rtol = 1e-11;
    o.atol = 1e-13;
    o.convergence_tol = 1e-12;
    return o;
}

double discrepancy_sq(const Sheaf& sheaf, const Vector& x)
{
    return coboundary(sheaf, Cochain0{x}).values.squaredNorm();
}

void figure1(Recorder& r, const std::filesystem::path& dir)
{
    r.guarded(1, "fig1", [&] {
        const auto start = std::chrono::steady_clock::now();
        const Model m = load_model(dir / "fig1.model");
        const Cochain0& x0 = m.require_opinion("fig1");
        const Vector closed = project_H0(m.sheaf, x0).values;
        const Trajectory traj = diffuse(m.sheaf, x0, 1.0, tight_flow());
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        const Vector expected = make({1, 0, -1, -1, 0, -1});
        r.scalar(1, "fig1.initial_discrepancy_sq", 6.0, discrepancy_sq(m.sheaf, x0.values), 1e-12);
        r.flag(1, "fig1.dim_H0", global_sections(m.sheaf).cols() == 1, "1",
               std::to_string(global_sections(m.sheaf).cols()));
        r.vector(1, "fig1.closed_form_limit", expected, closed, 1e-9);
        r.flag(1, "fig1.ode_converged", traj.converged(), "converged", std::string(ode::to_string(traj.status)));
        r.vector(1, "fig1.ode_limit", expected, traj.final_state(), 1e-6);
        r.scalar(1, "fig1.ode_vs_closed_form", 0.0, (traj.final_state() - closed).norm(), 1e-6);
        r.scalar(1, "fig1.final_discrepancy_sq", 0.0, discrepancy_sq(m.sheaf, traj.final_state()), 1e-10);
        r.flag(1, "fig1.energy_nonincreasing", traj.energy_nonincreasing(1e-12), "yes",
               traj.energy_nonincreasing(1e-12) ? "yes" : "no");
        r.at_most(1, "fig1.runtime_seconds", 1.0, seconds);
    });
}

void figure2(Recorder& r, const std::filesystem::path& dir)
{
    r.guarded(2, "fig2", [&] {
        const Model m = load_model(dir / "fig2.model");
        const Cochain0& x0 = m.require_opinion("fig2");
        const StubbornSpec spec = m.stubborn_or_none();
        const FreeOpinionSheaf free = build_free_sheaf(m.sheaf, spec);
        const Vector u = spec.packed_values();
        const Vector y0 = free.blocks.frame.free_part(x0.values);

        r.flag(2, "fig2.splitting_dims",
               free.blocks.frame.stubborn_dim() == 1 && free.blocks.frame.free_dim() == 5, "S=1 Q=5",
               "S=" + std::to_string(free.blocks.frame.stubborn_dim())
                   + " Q=" + std::to_string(free.blocks.frame.free_dim()));

        const Vector expected = make({1.25, 0, -1.25, -1.25, 1, -0.25});
        const PoissonSolution sol = solve_poisson(free.blocks, u, y0);
        r.vector(2, "fig2.closed_form_equilibrium", expected, sol.x_inf, 1e-9);
        r.at_most(2, "fig2.limit_formula_agreement", r.tol(1e-9), sol.formula_spread);

        const ConstrainedTrajectory ct = constrained_diffuse(free.blocks, u, y0, 1.0, tight_flow());
        r.vector(2, "fig2.ode_equilibrium", expected, ct.total.back(), 1e-6);

        const Vector res = coboundary(m.sheaf, Cochain0{sol.x_inf}).values;
        const Graph& g = m.sheaf.graph();
        double off_support = 0.0;
        Vector on_e41;
        for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
            if (g.edge(e).id == "e41") {
                on_e41 = m.sheaf.edge_block(res, e);
            } else {
                off_support = std::max(off_support, m.sheaf.edge_block(res, e).norm());
            }
        }
        r.scalar(2, "fig2.residual_off_e41", 0.0, off_support, 1e-9);
        const Vector target = make({0, 1});
        const double oriented = on_e41.size() == 2
                                    ? std::min((on_e41 - target).cwiseAbs().maxCoeff(),
                                               (on_e41 + target).cwiseAbs().maxCoeff())
                                    : 1.0;
        r.flag(2, "fig2.residual_e41", oriented <= r.tol(1e-9), "+-(0, 1)", vec(on_e41));
        r.scalar(2, "fig2.final_discrepancy_sq", 1.0, res.squaredNorm(), 1e-9);
        r.scalar(2, "fig2.final_energy", 0.5, disagreement_energy(m.sheaf, Cochain0{sol.x_inf}), 1e-9);

        const CompatibilityResult comp = compatibility_obstruction(m.sheaf, spec);
        r.flag(2, "fig2.incompatible", !comp.compatible, "incompatible", comp.compatible ? "compatible" : "incompatible");
        r.scalar(2, "fig2.obstruction_sq", 1.0, comp.obstruction_residual * comp.obstruction_residual, 1e-9);
        const ExactSequenceReport ex = exact_sequence_audit(m.sheaf, spec);
        r.flag(2, "fig2.exact_sequence", ex.exact(), "alternating sum 0, exact",
               "alternating sum " + std::to_string(ex.alternating_sum()) + (ex.exact() ? ", exact" : ", not exact"));
    });
}

void figure3(Recorder& r, const std::filesystem::path& dir)
{
    r.guarded(3, "fig3", [&] {
        const Model m = load_model(dir / "fig3.model");
        const Cochain0& x = m.require_opinion("fig3");
        const AdaptationSpec adapt = m.effective_adaptation();
        const DiscrepancySystem sys = build_discrepancy_system(m.sheaf, x, adapt);
        const Vector rho0 = gather_maps(m.sheaf, sys.layout);
        r.scalar(3, "fig3.initial_discrepancy_sq", 5.0, sys.discrepancy(rho0).squaredNorm(), 1e-12);

        const LearningLimit lim = learning_limit(sys, rho0);
        r.at_most(3, "fig3.limit_formula_agreement", r.tol(1e-9), lim.formula_spread);
        const Sheaf learned = scatter_maps(m.sheaf, sys.layout, lim.rho_inf);

        struct Expect {
            const char* vertex;
            const char* edge;
            Vector value;
        };
        const std::vector<Expect> expected = {
            {"v1", "e12", make({-20.0 / 9})},       {"v1", "e41", make({0.5, 0.5})},
            {"v2", "e12", make({-8.0 / 9, 16.0 / 9})}, {"v2", "e23", make({1.2, 0.6})},
            {"v3", "e23", make({1})},               {"v3", "e34", make({-1})},
        };
        const Graph& g = m.sheaf.graph();
        for (const auto& ex : expected) {
            const Incidence inc{g.vertex_index(ex.vertex), g.edge_index(ex.edge)};
            r.vector(3, std::string("fig3.map_") + ex.vertex + "_" + ex.edge, ex.value,
                     flatten_row_major(learned.restriction(inc)), 1e-9);
        }
        r.scalar(3, "fig3.final_discrepancy_sq", 1.0, discrepancy_sq(learned, x.values), 1e-9);

        // Same learning problem through the joint flow with opinions held still.
        JointSystem js(m.sheaf, m.stubborn_or_none(), adapt);
        JointOptions jo;
        jo.t_end = 2000.0;
        jo.rtol = 1e-11;
        jo.atol = 1e-13;
        jo.convergence_tol = 1e-12;
        const JointTrajectory jt = joint_flow(js, x, 0.0, 1.0, jo);
        const Sheaf flowed = js.sheaf_at(jt.final_state());
        r.scalar(3, "fig3.flow_vs_closed_form", 0.0,
                 (flowed.flatten_maps() - learned.flatten_maps()).cwiseAbs().maxCoeff(), 1e-6);

        bool frozen_exact = true;
        for (const Incidence& inc : adapt.frozen()) {
            for (const Vector& z : jt.states) {
                const Matrix now = js.sheaf_at(z).restriction(inc);
                frozen_exact = frozen_exact && (now.array() == m.sheaf.restriction(inc).array()).all();
            }
        }
        r.flag(3, "fig3.frozen_maps_bit_exact", frozen_exact, "unchanged", frozen_exact ? "unchanged" : "changed");

        const EquilibriumReport eq = equilibrium_residuals(learned, x, adapt);
        const EdgeEquilibrium& e34 = eq.edge(g.edge_index("e34"));
        r.flag(3, "fig3.e34_vacuously_stationary", e34.kind == EquilibriumClass::VacuouslyStationary,
               "vacuously-stationary", to_string(e34.kind));
    });
}

// Scalar coordinates of the single-edge model read back from a joint state.
SingleEdgeState single_edge_state(const JointSystem& sys, const Vector& z)
{
    const Vector x = sys.opinion(z);
    const Sheaf sh = sys.sheaf_at(z);
    const Matrix fu = sh.restriction({0, 0});
    const Matrix fv = sh.restriction({1, 0});
    return {x[0], x[1], x[2], fu(0, 0), fu(0, 1), fv(0, 0)};
}

std::vector<double> conserved(EdgePolicy p, const SingleEdgeState& q)
{
    const double eps = q.xv / q.c;
    switch (p) {
    case EdgePolicy::StructuralStubbornness: return {q.c * q.y + q.b * q.xv};
    case EdgePolicy::Accommodation: return {q.xv * q.xv - q.c * q.c, q.y + eps * q.b * std::log(std::abs(q.c))};
    case EdgePolicy::Outreach:
        return {q.s * q.xv + q.c * q.a, q.y * q.y - q.b * q.b, q.a - q.s * std::log(q.y + q.b)};
    case EdgePolicy::UniversalAdaptation:
        return {q.xv * q.xv - q.c * q.c, q.y * q.y - q.b * q.b, q.a - q.s * std::log(q.y + q.b),
                std::log(std::abs(q.c)) + eps * q.a / q.s};
    }
    return {};
}

double bisect_accommodation_root()
{
    // ln c + 4c^2 + 4 on (0, 1).
    double lo = 1e-300;
    double hi = 1.0;
    for (int i = 0; i < 2000 && hi - lo > 1e-17; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::log(mid) + 4 * mid * mid + 4 < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void single_edge_scenarios(Recorder& r, const std::filesystem::path& dir)
{
    struct Scenario {
        int index;
        EdgePolicy policy;
    };
    const Scenario scenarios[] = {{1, EdgePolicy::UniversalAdaptation},
                                  {2, EdgePolicy::StructuralStubbornness},
                                  {3, EdgePolicy::Accommodation},
                                  {4, EdgePolicy::Outreach}};
    for (const auto& sc : scenarios) {
        const std::string key = "fig6.scenario" + std::to_string(sc.index);
        r.guarded(4, key, [&] {
            const Model m = load_model(dir / ("fig6_scenario" + std::to_string(sc.index) + ".model"));
            JointSystem sys(m.sheaf, m.stubborn_or_none(), m.effective_adaptation());
            const Vector z0 = sys.pack(m.require_opinion(key));
            const SingleEdgeState init = single_edge_state(sys, z0);
            const SingleEdgeState eq = single_edge_equilibrium(sc.policy, init).state;

            switch (sc.policy) {
            case EdgePolicy::StructuralStubbornness:
                r.vector(4, key + ".closed_form", make({0.2, 0.6}), make({eq.y, eq.xv}), 1e-10);
                r.scalar(4, key + ".expressed", 0.6, eq.expressed(), 1e-10);
                break;
            case EdgePolicy::Accommodation: {
                const double oracle = bisect_accommodation_root();
                r.scalar(4, key + ".root_c", oracle, eq.c, 1e-10);
                r.scalar(4, key + ".y", 1 + 0.5 * std::log(oracle), eq.y, 1e-10);
                r.scalar(4, key + ".xv", -oracle, eq.xv, 1e-10);
                r.scalar(4, key + ".c_paper_precision", 0.02, eq.c, 5e-3);
                break;
            }
            case EdgePolicy::Outreach:
                r.vector(4, key + ".paper_values", make({0.88, -0.13, -0.19, -0.31, -0.31}),
                         make({eq.y, eq.b, eq.a, eq.xv, eq.expressed()}), 5e-3);
                break;
            case EdgePolicy::UniversalAdaptation:
                r.vector(4, key + ".paper_values", make({0.87, -0.10, -0.17, 0.51, -0.51, -0.26}),
                         make({eq.y, eq.b, eq.a, eq.c, eq.xv, eq.expressed()}), 5e-3);
                break;
            }

            JointOptions jo;
            jo.t_end = 5000.0;
            jo.rtol = 1e-10;
            jo.atol = 1e-12;
            jo.convergence_tol = 1e-11;
            const JointTrajectory traj = joint_flow(sys, m.require_opinion(key), 1.0, 1.0, jo);
            const SingleEdgeState fin = single_edge_state(sys, traj.final_state());
            r.vector(4, key + ".flow_vs_closed_form", make({eq.y, eq.xv, eq.a, eq.b, eq.c}),
                     make({fin.y, fin.xv, fin.a, fin.b, fin.c}), 1e-6);

            const std::vector<double> q0 = conserved(sc.policy, init);
            double drift = 0.0;
            for (const Vector& z : traj.states) {
                const std::vector<double> q = conserved(sc.policy, single_edge_state(sys, z));
                for (std::size_t i = 0; i < q.size(); ++i) {
                    drift = std::max(drift, std::abs(q[i] - q0[i]) / std::max(1.0, std::abs(q0[i])));
                }
            }
            r.at_most(4, key + ".conserved_quantities", r.tol(1e-6), drift);
        });
    }
}

void type_a_growth(Recorder& r, const std::filesystem::path& dir)
{
    JointOptions jo;
    jo.t_end = 200.0;
    jo.rtol = 1e-11;
    jo.atol = 1e-13;
    jo.convergence_tol = 1e-12;

    r.guarded(5, "exampleC1", [&] {
        const Model m = load_model(dir / "exampleC1.model");
        JointSystem sys(m.sheaf, m.stubborn_or_none(), m.effective_adaptation());
        const double alpha = m.parameters.alpha.value_or(1.0);
        const double beta = m.parameters.beta.value_or(1.0);
        const JointTrajectory traj = joint_flow(sys, m.require_opinion("exampleC1"), alpha, beta, jo);
        const double f0 = traj.frobenius.front() * traj.frobenius.front();
        const double f1 = traj.frobenius.back() * traj.frobenius.back();
        r.scalar(5, "exampleC1.initial_frobenius_sq", 2.0, f0, 1e-12);
        r.scalar(5, "exampleC1.final_frobenius_sq", 13.0 / 4, f1, 1e-6);
        r.flag(5, "exampleC1.frobenius_grows", f1 > f0 + 1.0, "grows by 5/4", num(f1 - f0));

        const double d0 = coboundary(sys.sheaf_at(traj.states.front()), Cochain0{traj.opinion(0)}).values[0];
        double worst = 0.0;
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const double d = coboundary(sys.sheaf_at(traj.states[i]), Cochain0{traj.opinion(i)}).values[0];
            worst = std::max(worst, std::abs(d - d0 * std::exp(-2.0 * traj.times[i])));
        }
        r.at_most(5, "exampleC1.discrepancy_exponential", r.tol(1e-6), worst);
    });

    r.guarded(5, "exampleC1_symmetric", [&] {
        const Model m = load_model(dir / "exampleC1_symmetric.model");
        JointSystem sys(m.sheaf, m.stubborn_or_none(), m.effective_adaptation());
        const JointTrajectory traj = joint_flow(sys, m.require_opinion("exampleC1_symmetric"),
                                                m.parameters.alpha.value_or(1.0), m.parameters.beta.value_or(1.0), jo);
        r.at_most(5, "exampleC1_symmetric.frobenius_nonincreasing", r.tol(1e-9), traj.max_frobenius_increase());
    });
}

} // namespace

bool SuiteReport::all_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::string SuiteReport::render() const
{
    std::size_t width = 0;
    for (const auto& c : checks) {
        width = std::max(width, c.key.size());
    }
    std::ostringstream out;
    for (const auto& c : checks) {
        out << "criterion " << c.criterion << "  " << std::left << std::setw(static_cast<int>(width)) << c.key << "  "
            << (c.pass ? "PASS" : "FAIL") << "  computed " << c.computed;
        if (!c.pass) {
            out << "  expected " << c.expected;
        }
        out << "\n";
    }
    for (int k = 1; k <= 5; ++k) {
        const bool ok = std::all_of(checks.begin(), checks.end(),
                                    [k](const CheckResult& c) { return c.criterion != k || c.pass; });
        out << "criterion " << k << ": " << (ok ? "PASS" : "FAIL") << "\n";
    }
    return out.str();
}

SuiteReport reproduce_paper(const std::filesystem::path& models_dir, double tol_floor)
{
    SuiteReport report;
    Recorder r(report, tol_floor);
    figure1(r, models_dir);
    figure2(r, models_dir);
    figure3(r, models_dir);
    single_edge_scenarios(r, models_dir);
    type_a_growth(r, models_dir);
    return report;
}

} // namespace opsheaf::app
