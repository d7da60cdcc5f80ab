#include "opsheaf/joint_dynamics.hpp"

#include "opsheaf/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace opsheaf {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr const char* kTypeACaveat =
    "; bounded trajectories are not guaranteed when Type A edges are present";

ode::Options to_ode(const JointOptions& o)
{
    ode::Options opt;
    opt.t_end = o.t_end;
    opt.sample_interval = o.sample_interval;
    opt.rtol = o.rtol;
    opt.atol = o.atol;
    opt.convergence_tol = o.convergence_tol;
    opt.convergence_steps = o.convergence_steps;
    return opt;
}

double max_increase(const std::vector<double>& v)
{
    double worst = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        worst = std::max(worst, v[i] - v[i - 1]);
    }
    return worst;
}

void check_rates(double alpha, double beta)
{
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0) {
        throw ParameterError("joint flow: alpha and beta must be finite and nonnegative");
    }
    if (alpha == 0.0 && beta == 0.0) {
        throw ParameterError("joint flow: alpha and beta cannot both be zero");
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Policies and classification

const char* to_string(EdgePolicy p)
{
    switch (p) {
    case EdgePolicy::UniversalAdaptation: return "universal";
    case EdgePolicy::StructuralStubbornness: return "structural";
    case EdgePolicy::Accommodation: return "accommodation";
    case EdgePolicy::Outreach: return "outreach";
    }
    return "?";
}

EdgePolicy parse_edge_policy(const std::string& name)
{
    for (auto p : {EdgePolicy::UniversalAdaptation, EdgePolicy::StructuralStubbornness, EdgePolicy::Accommodation,
                   EdgePolicy::Outreach}) {
        if (name == to_string(p)) {
            return p;
        }
    }
    throw ValidationError("unknown edge policy '" + name
                          + "' (expected universal, structural, accommodation or outreach)");
}

EdgeClassification classify_edges(const Graph& graph, const StubbornSpec& spec, const AdaptationSpec& adapt,
                                  const ScenarioPolicy* policy)
{
    if (spec.basis.size() != graph.vertex_count()) {
        throw ConformanceError("classify_edges: stubborn spec does not match the vertex count");
    }
    EdgeClassification out;
    out.policy.assign(graph.edge_count(), std::nullopt);
    for (EdgeIndex e = 0; e < graph.edge_count(); ++e) {
        const auto& edge = graph.edge(e);
        const bool st = spec.is_stubborn(edge.tail);
        const bool sh = spec.is_stubborn(edge.head);
        (st && sh ? out.stubborn_stubborn : (st || sh ? out.mixed : out.free_free)).push_back(e);
        (adapt.edge_type(e) == EdgeAdaptation::TypeA ? out.type_a : out.type_s).push_back(e);
    }
    if (policy != nullptr) {
        for (const auto& [e, p] : policy->per_edge) {
            if (e >= graph.edge_count()) {
                throw ValidationError("edge policy refers to an edge outside the graph");
            }
            const bool mixed = std::find(out.mixed.begin(), out.mixed.end(), e) != out.mixed.end();
            if (!mixed && (p == EdgePolicy::Accommodation || p == EdgePolicy::Outreach)) {
                throw ValidationError(std::string("policy '") + to_string(p) + "' on edge '" + graph.edge(e).id
                                      + "' requires exactly one stubborn endpoint");
            }
            out.policy[e] = p;
        }
    }
    return out;
}

AdaptationSpec compile_policy(const Graph& graph, const StubbornSpec& spec, const ScenarioPolicy& policy,
                              const AdaptationSpec& base)
{
    // Validates policy placement.
    classify_edges(graph, spec, base, &policy);

    std::vector<Incidence> adapting;
    for (const auto& inc : base.adapting()) {
        if (!policy.per_edge.contains(inc.edge)) {
            adapting.push_back(inc);
        }
    }
    for (const auto& [e, p] : policy.per_edge) {
        const auto& edge = graph.edge(e);
        const bool tail_stubborn = spec.is_stubborn(edge.tail);
        const VertexIndex stubborn_end = tail_stubborn ? edge.tail : edge.head;
        const VertexIndex free_end = tail_stubborn ? edge.head : edge.tail;
        switch (p) {
        case EdgePolicy::UniversalAdaptation:
            adapting.push_back({edge.tail, e});
            adapting.push_back({edge.head, e});
            break;
        case EdgePolicy::StructuralStubbornness: break;
        case EdgePolicy::Accommodation: adapting.push_back({free_end, e}); break;
        case EdgePolicy::Outreach: adapting.push_back({stubborn_end, e}); break;
        }
    }
    return AdaptationSpec(graph, std::move(adapting));
}

// ---------------------------------------------------------------------------
// JointSystem

JointSystem::JointSystem(Sheaf sheaf, StubbornSpec spec, AdaptationSpec adapt)
    : sheaf_(std::move(sheaf)), spec_(std::move(spec)), adapt_(std::move(adapt))
{
    frame_ = build_frame(sheaf_, spec_);
    u_ = spec_.packed_values();
    const auto& g = sheaf_.graph();
    if (adapt_.graph().vertex_count() != g.vertex_count() || adapt_.graph().edge_count() != g.edge_count()) {
        throw ValidationError("joint system: adaptation spec was built for a different graph");
    }
    mask_ = Vector::Zero(sheaf_.flat_map_size());
    for (const auto& inc : adapt_.adapting()) {
        mask_.segment(sheaf_.map_offset(inc), sheaf_.restriction(inc).size()).setOnes();
    }
}

Vector JointSystem::pack(const Cochain0& x) const
{
    check_conforms(sheaf_, x);
    const Vector s = frame_.stubborn_part(x.values);
    if ((s - u_).norm() > 1e-9 * std::max(1.0, u_.norm())) {
        throw ValidationError("joint system: opinion disagrees with the clamped stubborn values");
    }
    return pack(frame_.free_part(x.values), sheaf_.flatten_maps());
}

Vector JointSystem::pack(const Vector& y, const Vector& maps) const
{
    if (y.size() != free_dim() || maps.size() != map_dim()) {
        throw ConformanceError("joint system: state blocks have the wrong length");
    }
    Vector z(state_dim());
    z << y, maps;
    return z;
}

Matrix JointSystem::coboundary_at(const Vector& z) const
{
    const auto& g = sheaf_.graph();
    const auto& vl = sheaf_.vertex_layout();
    const auto& el = sheaf_.edge_layout();
    const Eigen::Index q = free_dim();
    Matrix d = Matrix::Zero(sheaf_.c1_dim(), sheaf_.c0_dim());
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        const auto& edge = g.edge(e);
        const Eigen::Index m = el.size(e);
        const Eigen::Index nt = vl.size(edge.tail);
        const Eigen::Index nh = vl.size(edge.head);
        d.block(el.offset(e), vl.offset(edge.tail), m, nt) -=
            RowMajorMap(z.data() + q + sheaf_.map_offset({edge.tail, e}), m, nt);
        d.block(el.offset(e), vl.offset(edge.head), m, nh) +=
            RowMajorMap(z.data() + q + sheaf_.map_offset({edge.head, e}), m, nh);
    }
    return d;
}

double JointSystem::psi(const Vector& z) const
{
    return 0.5 * (coboundary_at(z) * opinion(z)).squaredNorm();
}

void JointSystem::velocity(const Vector& z, double alpha, double beta, Vector& dz) const
{
    const auto& g = sheaf_.graph();
    const auto& vl = sheaf_.vertex_layout();
    const auto& el = sheaf_.edge_layout();
    const Eigen::Index q = free_dim();
    const Vector x = opinion(z);
    const Matrix d = coboundary_at(z);
    const Vector r = d * x;

    dz.setZero(state_dim());
    if (alpha != 0.0) {
        dz.head(q).noalias() = -alpha * (frame_.iota_q.matrix.transpose() * (d.transpose() * r));
    }
    if (beta != 0.0) {
        for (const auto& inc : adapt_.adapting()) {
            const auto re = r.segment(el.offset(inc.edge), el.size(inc.edge));
            const auto xw = x.segment(vl.offset(inc.vertex), vl.size(inc.vertex));
            const double scale = -beta * g.incidence_sign(inc.vertex, inc.edge);
            Eigen::Index at = q + sheaf_.map_offset(inc);
            for (Eigen::Index i = 0; i < re.size(); ++i) {
                for (Eigen::Index j = 0; j < xw.size(); ++j) {
                    dz[at++] = scale * re[i] * xw[j];
                }
            }
        }
    }
}

double JointSystem::structural_dissipation(const Vector& z) const
{
    Vector dz;
    velocity(z, 0.0, 1.0, dz);
    return dz.tail(map_dim()).squaredNorm();
}

double JointSystem::structural_dissipation_weighted(const Vector& z) const
{
    const auto& vl = sheaf_.vertex_layout();
    const auto& el = sheaf_.edge_layout();
    const Vector x = opinion(z);
    const Vector r = coboundary_at(z) * x;
    double sum = 0.0;
    for (const auto& inc : adapt_.adapting()) {
        sum += r.segment(el.offset(inc.edge), el.size(inc.edge)).squaredNorm()
               * x.segment(vl.offset(inc.vertex), vl.size(inc.vertex)).squaredNorm();
    }
    return sum;
}

double JointSystem::opinion_dissipation(const Vector& z) const
{
    const Matrix d = coboundary_at(z);
    return (frame_.iota_q.matrix.transpose() * (d.transpose() * (d * opinion(z)))).squaredNorm();
}

double JointSystem::psi_rate(const Vector& z, double alpha, double beta) const
{
    return -beta * structural_dissipation(z) - alpha * opinion_dissipation(z);
}

Matrix JointSystem::conservation_matrix(const Vector& z, VertexIndex v, double alpha, double beta) const
{
    const Sheaf s = sheaf_at(z);
    const Eigen::Index n = s.vertex_dim(v);
    Matrix lvv = Matrix::Zero(n, n);
    for (EdgeIndex e : s.graph().incident_edges(v)) {
        const Matrix& f = s.restriction({v, e});
        lvv.noalias() += f.transpose() * f;
    }
    const Vector x = opinion(z);
    const Vector xv = x.segment(s.vertex_layout().offset(v), n);
    return alpha * lvv - beta * (xv * xv.transpose());
}

// ---------------------------------------------------------------------------
// Flows

double JointTrajectory::max_psi_increase() const { return max_increase(psi); }
double JointTrajectory::max_frobenius_increase() const { return max_increase(frobenius); }
double JointTrajectory::max_lyapunov_increase() const { return max_increase(lyapunov); }

namespace {

JointTrajectory run_joint(const JointSystem& system, const Cochain0& x0, double alpha, double beta,
                          std::optional<RegularizationParams> reg, const JointOptions& options)
{
    const Vector z0 = system.pack(x0);
    const Eigen::Index q = system.free_dim();
    const double y_ceiling = options.ceiling_factor * std::max(1.0, z0.head(q).norm());
    const double map_ceiling = options.ceiling_factor * std::max(1.0, z0.tail(system.map_dim()).norm());
    const Vector& mask = system.map_mask();

    ode::Rhs rhs = [&](double, const Vector& z, Vector& dz) {
        system.velocity(z, alpha, beta, dz);
        if (reg) {
            dz.head(q) -= alpha * reg->lambda * (z.head(q) - z0.head(q));
            dz.tail(system.map_dim()) -=
                (beta * reg->mu) * mask.cwiseProduct(z.tail(system.map_dim()) - z0.tail(system.map_dim()));
        }
    };
    ode::Guard guard = [&](double t, const Vector& z) -> std::optional<std::string> {
        if (!z.allFinite()) {
            return "state became non-finite at t = " + std::to_string(t) + kTypeACaveat;
        }
        const double yn = z.head(q).norm();
        const double mn = z.tail(system.map_dim()).norm();
        if (yn > y_ceiling) {
            return "free opinions exceeded the ceiling " + std::to_string(y_ceiling) + " at t = " + std::to_string(t)
                   + kTypeACaveat;
        }
        if (mn > map_ceiling) {
            return "restriction maps exceeded the ceiling " + std::to_string(map_ceiling) + " at t = "
                   + std::to_string(t) + kTypeACaveat;
        }
        return std::nullopt;
    };

    ode::Solution sol = ode::integrate(rhs, z0, to_ode(options), guard);

    JointTrajectory out(system);
    out.options = options;
    out.alpha = alpha;
    out.beta = beta;
    out.regularization = reg;
    out.times = std::move(sol.times);
    out.states = std::move(sol.states);
    out.status = sol.status;
    out.final_velocity_norm = sol.final_velocity_norm;
    out.accepted_steps = sol.accepted_steps;
    out.rejected_steps = sol.rejected_steps;
    out.message = std::move(sol.message);
    for (const auto& z : out.states) {
        const double p = system.psi(z);
        out.psi.push_back(p);
        out.frobenius.push_back(z.tail(system.map_dim()).norm());
        if (reg) {
            out.lyapunov.push_back(p + 0.5 * reg->lambda * (z.head(q) - z0.head(q)).squaredNorm()
                                   + 0.5 * reg->mu * (z.tail(system.map_dim()) - z0.tail(system.map_dim())).squaredNorm());
        }
    }
    return out;
}

} // namespace

JointTrajectory joint_flow(const JointSystem& system, const Cochain0& x0, double alpha, double beta,
                           const JointOptions& options)
{
    check_rates(alpha, beta);
    return run_joint(system, x0, alpha, beta, std::nullopt, options);
}

JointTrajectory regularized_joint_flow(const JointSystem& system, const Cochain0& x0, double alpha, double beta,
                                       double lambda, double mu, const JointOptions& options)
{
    check_rates(alpha, beta);
    if (!(lambda > 0.0) || !(mu > 0.0)) {
        throw ParameterError("regularized joint flow: lambda and mu must be positive");
    }
    return run_joint(system, x0, alpha, beta, RegularizationParams{lambda, mu}, options);
}

RegularizedBounds regularized_bounds(const JointTrajectory& traj)
{
    if (!traj.regularization) {
        throw ParameterError("regularized_bounds: trajectory was not produced by the regularized flow");
    }
    const auto& sys = traj.system;
    const auto [lambda, mu] = *traj.regularization;
    const Eigen::Index q = sys.free_dim();
    const Vector& z0 = traj.states.front();

    RegularizedBounds b;
    b.lyapunov0 = traj.lyapunov.front();
    b.opinion_bound = 2.0 * b.lyapunov0 / lambda;
    b.map_bound = 2.0 * b.lyapunov0 / mu;
    for (const auto& z : traj.states) {
        b.max_opinion_displacement_sq = std::max(b.max_opinion_displacement_sq, (z.head(q) - z0.head(q)).squaredNorm());
        b.max_map_displacement_sq =
            std::max(b.max_map_displacement_sq, (z.tail(sys.map_dim()) - z0.tail(sys.map_dim())).squaredNorm());
    }
    const Vector& zf = traj.final_state();
    Vector dz;
    sys.velocity(zf, 1.0, 1.0, dz);
    b.stationarity_opinion = (-dz.head(q) + lambda * (zf.head(q) - z0.head(q))).norm();
    b.stationarity_maps = (-dz.tail(sys.map_dim())
                           + mu * sys.map_mask().cwiseProduct(zf.tail(sys.map_dim()) - z0.tail(sys.map_dim())))
                              .norm();
    return b;
}

// ---------------------------------------------------------------------------
// Equilibria and conservation

const char* to_string(EquilibriumClass c)
{
    switch (c) {
    case EquilibriumClass::ConsensusAchieved: return "consensus-achieved";
    case EquilibriumClass::VacuouslyStationary: return "vacuously-stationary";
    case EquilibriumClass::FrozenResidual: return "frozen-residual";
    case EquilibriumClass::NotStationary: return "not-stationary";
    }
    return "?";
}

bool EquilibriumReport::stationary() const
{
    return std::none_of(edges.begin(), edges.end(),
                        [](const EdgeEquilibrium& e) { return e.kind == EquilibriumClass::NotStationary; });
}

const EdgeEquilibrium& EquilibriumReport::edge(EdgeIndex e) const
{
    for (const auto& rec : edges) {
        if (rec.edge == e) {
            return rec;
        }
    }
    throw ValidationError("equilibrium report has no entry for edge #" + std::to_string(e));
}

EquilibriumReport equilibrium_residuals(const Sheaf& sheaf, const Cochain0& x, const AdaptationSpec& adapt,
                                        const EquilibriumOptions& options, const Sheaf* reference_sheaf,
                                        const Cochain0* reference_x)
{
    const Vector r = coboundary(sheaf, x).values;
    const auto& g = sheaf.graph();
    EquilibriumReport rep;
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        EdgeEquilibrium rec;
        rec.edge = e;
        rec.residual = sheaf.edge_block(r, e).norm();
        bool any_expressing = false;
        for (VertexIndex w : {g.edge(e).tail, g.edge(e).head}) {
            if (!adapt.adapts({w, e})) {
                continue;
            }
            const double xn = sheaf.vertex_block(x.values, w).norm();
            rec.adapting_opinion_norms.emplace_back(w, xn);
            any_expressing = any_expressing || xn > options.vacuous_tol;
            if (reference_sheaf != nullptr && reference_x != nullptr) {
                const double before =
                    (reference_sheaf->restriction({w, e}) * reference_sheaf->vertex_block(reference_x->values, w)).norm();
                const double now = (sheaf.restriction({w, e}) * sheaf.vertex_block(x.values, w)).norm();
                rec.silenced = rec.silenced || (before > 0.0 && now <= options.silence_ratio * before);
            }
        }
        if (rec.residual <= options.residual_tol) {
            rec.kind = EquilibriumClass::ConsensusAchieved;
        } else if (rec.adapting_opinion_norms.empty()) {
            rec.kind = EquilibriumClass::FrozenResidual;
        } else if (!any_expressing) {
            rec.kind = EquilibriumClass::VacuouslyStationary;
        } else {
            rec.kind = EquilibriumClass::NotStationary;
        }
        rep.edges.push_back(std::move(rec));
    }
    return rep;
}

EquilibriumReport equilibrium_residuals(const JointTrajectory& traj, const EquilibriumOptions& options)
{
    const auto& sys = traj.system;
    const Sheaf final_sheaf = sys.sheaf_at(traj.final_state());
    const Cochain0 final_x{sys.opinion(traj.final_state())};
    const Cochain0 initial_x{sys.opinion(traj.states.front())};
    return equilibrium_residuals(final_sheaf, final_x, sys.adaptation(), options, &sys.initial_sheaf(), &initial_x);
}

bool ConservationReport::holds() const
{
    return std::all_of(vertices.begin(), vertices.end(),
                       [&](const VertexConservation& v) { return !v.applicable || v.max_drift <= tolerance * std::max(1.0, v.q0.norm()); });
}

ConservationReport conservation_audit(const JointTrajectory& traj, const std::vector<VertexIndex>& vertices)
{
    const auto& sys = traj.system;
    const auto& g = sys.initial_sheaf().graph();
    const auto& spec = sys.stubborn();
    ConservationReport rep;
    rep.tolerance = traj.options.rtol * std::max(1.0, traj.times.back());

    for (VertexIndex v : vertices) {
        if (v >= g.vertex_count()) {
            throw ValidationError("conservation audit: vertex index out of range");
        }
        VertexConservation rec;
        rec.vertex = v;
        rec.applicable = true;
        if (spec.is_stubborn(v)) {
            rec.applicable = false;
            rec.reason = "vertex has stubborn directions";
        }
        for (EdgeIndex e : g.incident_edges(v)) {
            if (!rec.applicable) {
                break;
            }
            const auto& edge = g.edge(e);
            if (spec.is_stubborn(edge.tail) || spec.is_stubborn(edge.head)) {
                rec.applicable = false;
                rec.reason = "incident edge '" + edge.id + "' has a stubborn endpoint";
            } else if (!sys.adaptation().adapts({v, e})) {
                rec.applicable = false;
                rec.reason = "restriction map on edge '" + edge.id + "' is frozen";
            }
        }
        rec.q0 = sys.conservation_matrix(traj.states.front(), v, traj.alpha, traj.beta);
        if (rec.q0.size() > 0) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(rec.q0);
            rec.eigenvalues = eig.eigenvalues();
            const double scale = std::max(1.0, rec.q0.norm()) * 1e-12;
            rec.opinion_persists = rec.eigenvalues.minCoeff() < -scale;
            rec.maps_persist = rec.eigenvalues.maxCoeff() > scale;
        }
        for (const auto& z : traj.states) {
            const Matrix qt = sys.conservation_matrix(z, v, traj.alpha, traj.beta);
            if (qt.size() > 0) {
                rec.max_asymmetry = std::max(rec.max_asymmetry, (qt - qt.transpose()).cwiseAbs().maxCoeff());
            }
            rec.max_drift = std::max(rec.max_drift, (qt - rec.q0).norm());
        }
        rep.vertices.push_back(std::move(rec));
    }
    return rep;
}

} // namespace opsheaf
