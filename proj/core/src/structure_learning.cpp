#include "opsheaf/structure_learning.hpp"

#include "opsheaf/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>

namespace opsheaf {

namespace {

ode::Options to_ode(const FlowOptions& f)
{
    ode::Options opt;
    opt.t_end = f.t_end;
    opt.sample_interval = f.sample_interval;
    opt.rtol = f.rtol;
    opt.atol = f.atol;
    opt.convergence_tol = f.convergence_tol;
    return opt;
}

Trajectory wrap(ode::Solution&& sol, const std::function<double(const Vector&)>& energy)
{
    Trajectory out;
    out.times = std::move(sol.times);
    out.states = std::move(sol.states);
    out.energy.reserve(out.states.size());
    for (const auto& s : out.states) {
        out.energy.push_back(energy(s));
    }
    out.status = sol.status;
    out.final_velocity_norm = sol.final_velocity_norm;
    out.accepted_steps = sol.accepted_steps;
    out.rejected_steps = sol.rejected_steps;
    out.message = std::move(sol.message);
    return out;
}

void check_rho(const DiscrepancySystem& sys, const Vector& rho0, const char* who)
{
    if (rho0.size() != sys.layout.dim()) {
        throw ConformanceError(std::string(who) + ": map vector has length " + std::to_string(rho0.size())
                               + ", expected dim V_maps = " + std::to_string(sys.layout.dim()));
    }
}

// Incidences sorted by (vertex, edge), restricted by a predicate.
template <typename Pred>
std::vector<Incidence> select(const Graph& g, Pred pred)
{
    std::vector<Incidence> out;
    for (const auto& inc : g.incidences()) {
        if (pred(inc)) {
            out.push_back(inc);
        }
    }
    return out;
}

// Restriction of the structure sheaf at (v, e): I_m (x) x_v^T placed at the
// columns of the block `offset` inside the vertex stalk.
void place_evaluation(Matrix& target, Eigen::Index col_offset, Eigen::Index edim, const Vector& xv)
{
    for (Eigen::Index i = 0; i < edim; ++i) {
        target.block(i, col_offset + i * xv.size(), 1, xv.size()) = xv.transpose();
    }
}

Sheaf structure_sheaf_over(const Sheaf& sheaf, const Cochain0& x, const std::vector<Incidence>& keys,
                           bool all_edges_live)
{
    check_conforms(sheaf, x);
    const auto& g = sheaf.graph();
    std::vector<Eigen::Index> vdims(g.vertex_count(), 0);
    std::vector<std::vector<Eigen::Index>> offset_in_stalk(g.vertex_count(),
                                                           std::vector<Eigen::Index>(g.edge_count(), -1));
    std::vector<bool> live(g.edge_count(), all_edges_live);
    for (const auto& k : keys) {
        offset_in_stalk[k.vertex][k.edge] = vdims[k.vertex];
        vdims[k.vertex] += sheaf.restriction(k).size();
        live[k.edge] = true;
    }
    std::vector<Eigen::Index> edims(g.edge_count());
    std::vector<Matrix> tails;
    std::vector<Matrix> heads;
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        const auto& edge = g.edge(e);
        edims[e] = live[e] ? sheaf.edge_dim(e) : 0;
        Matrix t = Matrix::Zero(edims[e], vdims[edge.tail]);
        Matrix h = Matrix::Zero(edims[e], vdims[edge.head]);
        if (live[e]) {
            if (offset_in_stalk[edge.tail][e] >= 0) {
                place_evaluation(t, offset_in_stalk[edge.tail][e], edims[e], sheaf.vertex_block(x.values, edge.tail));
            }
            if (offset_in_stalk[edge.head][e] >= 0) {
                place_evaluation(h, offset_in_stalk[edge.head][e], edims[e], sheaf.vertex_block(x.values, edge.head));
            }
        }
        tails.push_back(std::move(t));
        heads.push_back(std::move(h));
    }
    return Sheaf(g, std::move(vdims), std::move(edims), std::move(tails), std::move(heads));
}

} // namespace

// ---------------------------------------------------------------------------
// AdaptationSpec

AdaptationSpec::AdaptationSpec(const Graph& graph, std::vector<Incidence> adapting)
    : graph_(graph), adapting_(std::move(adapting))
{
    for (const auto& inc : adapting_) {
        if (inc.vertex >= graph_.vertex_count() || inc.edge >= graph_.edge_count()) {
            throw ValidationError("adaptation: incidence index out of range");
        }
        if (!graph_.is_incident(inc.vertex, inc.edge)) {
            throw ValidationError("adaptation: vertex '" + graph_.vertex_id(inc.vertex)
                                  + "' is not an endpoint of edge '" + graph_.edge(inc.edge).id + "'");
        }
    }
    std::sort(adapting_.begin(), adapting_.end());
    adapting_.erase(std::unique(adapting_.begin(), adapting_.end()), adapting_.end());
}

AdaptationSpec AdaptationSpec::all(const Graph& graph)
{
    return AdaptationSpec(graph, graph.incidences());
}

AdaptationSpec AdaptationSpec::none(const Graph& graph)
{
    return AdaptationSpec(graph, {});
}

AdaptationSpec AdaptationSpec::from_frozen(const Graph& graph, const std::vector<Incidence>& frozen)
{
    // Validate the frozen list through the normal constructor first.
    const AdaptationSpec f(graph, frozen);
    return AdaptationSpec(graph, select(graph, [&](Incidence inc) { return !f.adapts(inc); }));
}

std::vector<Incidence> AdaptationSpec::frozen() const
{
    return select(graph_, [&](Incidence inc) { return !adapts(inc); });
}

bool AdaptationSpec::adapts(Incidence inc) const
{
    return std::binary_search(adapting_.begin(), adapting_.end(), inc);
}

std::vector<EdgeIndex> AdaptationSpec::active_edges() const
{
    std::vector<EdgeIndex> out;
    for (EdgeIndex e = 0; e < graph_.edge_count(); ++e) {
        if (edge_type(e) != EdgeAdaptation::Static) {
            out.push_back(e);
        }
    }
    return out;
}

EdgeAdaptation AdaptationSpec::edge_type(EdgeIndex e) const
{
    const auto& edge = graph_.edge(e);
    const int n = int(adapts({edge.tail, e})) + int(adapts({edge.head, e}));
    return n == 0 ? EdgeAdaptation::Static : (n == 2 ? EdgeAdaptation::TypeS : EdgeAdaptation::TypeA);
}

const char* to_string(EdgeAdaptation t)
{
    switch (t) {
    case EdgeAdaptation::Static: return "static";
    case EdgeAdaptation::TypeS: return "S";
    case EdgeAdaptation::TypeA: return "A";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// V_maps coordinates

Matrix StructureLayout::block(const Vector& rho, std::size_t i) const
{
    return unflatten_row_major({rho.data() + blocks.offset(i), static_cast<std::size_t>(blocks.size(i))}, rows[i],
                               cols[i]);
}

StructureLayout structure_layout(const Sheaf& sheaf, const AdaptationSpec& adapt)
{
    const auto& g = sheaf.graph();
    StructureLayout layout;
    std::vector<std::string> labels;
    std::vector<Eigen::Index> sizes;
    for (const auto& inc : adapt.adapting()) {
        if (!g.is_incident(inc.vertex, inc.edge)) {
            throw ValidationError("adaptation spec does not belong to this graph");
        }
        const Matrix& m = sheaf.restriction(inc);
        layout.keys.push_back(inc);
        layout.rows.push_back(m.rows());
        layout.cols.push_back(m.cols());
        labels.push_back(g.vertex_id(inc.vertex) + "/" + g.edge(inc.edge).id);
        sizes.push_back(m.size());
    }
    layout.blocks = BlockLayout(std::move(labels), std::move(sizes));
    return layout;
}

Vector gather_maps(const Sheaf& sheaf, const StructureLayout& layout)
{
    Vector rho(layout.dim());
    for (std::size_t i = 0; i < layout.keys.size(); ++i) {
        rho.segment(layout.blocks.offset(i), layout.blocks.size(i)) = flatten_row_major(sheaf.restriction(layout.keys[i]));
    }
    return rho;
}

Sheaf scatter_maps(const Sheaf& sheaf, const StructureLayout& layout, const Vector& rho)
{
    if (rho.size() != layout.dim()) {
        throw ConformanceError("map vector has length " + std::to_string(rho.size()) + ", expected "
                               + std::to_string(layout.dim()));
    }
    Vector flat = sheaf.flatten_maps();
    for (std::size_t i = 0; i < layout.keys.size(); ++i) {
        flat.segment(sheaf.map_offset(layout.keys[i]), layout.blocks.size(i)) =
            rho.segment(layout.blocks.offset(i), layout.blocks.size(i));
    }
    return sheaf.with_maps(flat);
}

// ---------------------------------------------------------------------------
// Discrepancy operator

DiscrepancySystem build_discrepancy_system(const Sheaf& sheaf, const Cochain0& x, const AdaptationSpec& adapt)
{
    check_conforms(sheaf, x);
    const auto& g = sheaf.graph();
    if (adapt.graph().vertex_count() != g.vertex_count() || adapt.graph().edge_count() != g.edge_count()) {
        throw ValidationError("adaptation spec was built for a different graph");
    }

    DiscrepancySystem sys;
    sys.x = x;
    sys.layout = structure_layout(sheaf, adapt);
    sys.active_edges = adapt.active_edges();

    std::vector<std::string> labels;
    std::vector<Eigen::Index> sizes;
    std::vector<Eigen::Index> row_of_edge(g.edge_count(), -1);
    Eigen::Index at = 0;
    for (EdgeIndex e : sys.active_edges) {
        labels.push_back(g.edge(e).id);
        sizes.push_back(sheaf.edge_dim(e));
        row_of_edge[e] = at;
        at += sheaf.edge_dim(e);
    }
    BlockLayout w(std::move(labels), std::move(sizes));
    sys.a = LinearOperator{Matrix::Zero(w.total(), sys.layout.dim()), w, sys.layout.blocks};
    sys.c = Vector::Zero(w.total());

    for (std::size_t i = 0; i < sys.layout.keys.size(); ++i) {
        const Incidence inc = sys.layout.keys[i];
        const double sigma = g.incidence_sign(inc.vertex, inc.edge);
        Matrix block = Matrix::Zero(sheaf.edge_dim(inc.edge), sys.layout.blocks.size(i));
        place_evaluation(block, 0, sheaf.edge_dim(inc.edge), sheaf.vertex_block(x.values, inc.vertex));
        sys.a.matrix.block(row_of_edge[inc.edge], sys.layout.blocks.offset(i), block.rows(), block.cols()) =
            sigma * block;
    }
    for (EdgeIndex e : sys.active_edges) {
        const auto& edge = g.edge(e);
        for (VertexIndex w_ : {edge.tail, edge.head}) {
            const Incidence inc{w_, e};
            if (!adapt.adapts(inc)) {
                sys.c.segment(row_of_edge[e], sheaf.edge_dim(e)) +=
                    g.incidence_sign(w_, e) * (sheaf.restriction(inc) * sheaf.vertex_block(x.values, w_));
            }
        }
    }
    return sys;
}

Vector DiscrepancySystem::adjoint(const Vector& y, const Sheaf& sheaf) const
{
    if (y.size() != a.rows()) {
        throw ConformanceError("adjoint: vector has length " + std::to_string(y.size()) + ", expected "
                               + std::to_string(a.rows()));
    }
    const auto& g = sheaf.graph();
    Vector out = Vector::Zero(layout.dim());
    for (std::size_t i = 0; i < layout.keys.size(); ++i) {
        const Incidence inc = layout.keys[i];
        const auto pos = std::find(active_edges.begin(), active_edges.end(), inc.edge) - active_edges.begin();
        const auto ye = y.segment(a.row_blocks.offset(static_cast<std::size_t>(pos)), layout.rows[i]);
        const Matrix outer = g.incidence_sign(inc.vertex, inc.edge) * ye * sheaf.vertex_block(x.values, inc.vertex).transpose();
        out.segment(layout.blocks.offset(i), layout.blocks.size(i)) = flatten_row_major(outer);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Limits and flows

LearningLimit learning_limit(const DiscrepancySystem& sys, const Vector& rho0, double rcond, double agreement_tol)
{
    check_rho(sys, rho0, "learning_limit");
    const Matrix& a = sys.a.matrix;
    const Vector d0 = sys.discrepancy(rho0);

    LearningLimit out;
    const Matrix a_pinv = pseudo_inverse(a, rcond);
    out.from_pseudo_inverse = rho0 - a_pinv * d0;
    out.from_kernel_projection = (rho0 - a_pinv * (a * rho0)) - a_pinv * sys.c;

    // (A^T A)^+ through a symmetric eigendecomposition.
    const Matrix ata = a.transpose() * a;
    Vector normal_step = Vector::Zero(rho0.size());
    if (ata.rows() > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(ata);
        const Vector& ev = eig.eigenvalues();
        const double cutoff = ev.size() > 0 ? std::max(ev.cwiseAbs().maxCoeff(), 0.0) * ata.rows() * rcond : 0.0;
        const Vector rhs = eig.eigenvectors().transpose() * (a.transpose() * d0);
        Vector scaled = Vector::Zero(rhs.size());
        for (Eigen::Index i = 0; i < rhs.size(); ++i) {
            if (ev[i] > cutoff) {
                scaled[i] = rhs[i] / ev[i];
            }
        }
        normal_step = eig.eigenvectors() * scaled;
    }
    out.from_normal_equations = rho0 - normal_step;

    out.formula_spread = std::max({(out.from_pseudo_inverse - out.from_kernel_projection).norm(),
                                   (out.from_pseudo_inverse - out.from_normal_equations).norm(),
                                   (out.from_kernel_projection - out.from_normal_equations).norm()});
    out.rho_inf = out.from_pseudo_inverse;
    out.stationarity = sys.gradient(out.rho_inf).norm();
    out.final_discrepancy = sys.discrepancy(out.rho_inf).norm();

    const double c_norm = sys.c.norm();
    const Vector c_residual = sys.c - a * (a_pinv * sys.c);
    out.consistent = c_residual.norm() <= 1e-8 * std::max(1.0, c_norm);

    const double scale = std::max({1.0, rho0.norm(), d0.norm()});
    if (out.formula_spread > agreement_tol * scale) {
        throw NumericalError("learning_limit: closed forms disagree by " + std::to_string(out.formula_spread));
    }
    return out;
}

Trajectory learning_flow(const DiscrepancySystem& sys, const Vector& rho0, double beta, const FlowOptions& options)
{
    check_rho(sys, rho0, "learning_flow");
    if (!(beta > 0.0)) {
        throw ParameterError("learning_flow: beta must be positive");
    }
    const Matrix& a = sys.a.matrix;
    auto rhs = [&](double, const Vector& rho, Vector& dr) { dr.noalias() = -beta * (a.transpose() * (a * rho + sys.c)); };
    return wrap(ode::integrate(rhs, rho0, to_ode(options)), [&](const Vector& r) { return sys.objective(r); });
}

Vector regularized_learning(const DiscrepancySystem& sys, const Vector& rho0, double lambda)
{
    check_rho(sys, rho0, "regularized_learning");
    if (!(lambda > 0.0)) {
        throw ParameterError("regularized_learning: lambda must be positive");
    }
    const Matrix& a = sys.a.matrix;
    Matrix m = a.transpose() * a;
    m.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("regularized_learning: Cholesky factorization failed");
    }
    return llt.solve(lambda * rho0 - a.transpose() * sys.c);
}

Trajectory regularized_learning_flow(const DiscrepancySystem& sys, const Vector& rho0, double beta, double lambda,
                                     const FlowOptions& options)
{
    check_rho(sys, rho0, "regularized_learning_flow");
    if (!(beta > 0.0)) {
        throw ParameterError("regularized_learning_flow: beta must be positive");
    }
    if (!(lambda > 0.0)) {
        throw ParameterError("regularized_learning_flow: lambda must be positive");
    }
    const Matrix& a = sys.a.matrix;
    auto rhs = [&](double, const Vector& rho, Vector& dr) {
        dr.noalias() = -beta * (a.transpose() * (a * rho + sys.c) + lambda * (rho - rho0));
    };
    return wrap(ode::integrate(rhs, rho0, to_ode(options)),
                [&](const Vector& r) { return sys.objective(r) + 0.5 * lambda * (r - rho0).squaredNorm(); });
}

// ---------------------------------------------------------------------------
// Structure sheaves

Sheaf build_structure_sheaf(const Sheaf& sheaf, const Cochain0& x, const AdaptationSpec& adapt)
{
    return structure_sheaf_over(sheaf, x, adapt.adapting(), false);
}

Sheaf build_full_structure_sheaf(const Sheaf& sheaf, const Cochain0& x)
{
    return structure_sheaf_over(sheaf, x, sheaf.graph().incidences(), true);
}

Vector frozen_embedding(const Sheaf& sheaf, const AdaptationSpec& adapt)
{
    const auto incs = sheaf.graph().incidences();
    Eigen::Index n = 0;
    for (const auto& inc : incs) {
        n += sheaf.restriction(inc).size();
    }
    Vector out = Vector::Zero(n);
    Eigen::Index at = 0;
    for (const auto& inc : incs) {
        const Matrix& m = sheaf.restriction(inc);
        if (!adapt.adapts(inc)) {
            out.segment(at, m.size()) = flatten_row_major(m);
        }
        at += m.size();
    }
    return out;
}

} // namespace opsheaf
