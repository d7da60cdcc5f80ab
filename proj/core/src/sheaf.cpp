#include "opsheaf/sheaf.hpp"

#include "opsheaf/errors.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace opsheaf {

namespace {

std::string shape(const Matrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(std::vector<std::string> vertex_ids, std::vector<Edge> edges)
    : vertex_ids_(std::move(vertex_ids)), edges_(std::move(edges))
{
    std::set<std::string_view> seen;
    for (const auto& id : vertex_ids_) {
        if (!seen.insert(id).second) {
            throw ValidationError("graph: duplicate vertex id '" + id + "'");
        }
    }
    seen.clear();
    for (const auto& e : edges_) {
        if (!seen.insert(e.id).second) {
            throw ValidationError("graph: duplicate edge id '" + e.id + "'");
        }
        if (e.tail >= vertex_ids_.size() || e.head >= vertex_ids_.size()) {
            throw ValidationError("graph: edge '" + e.id + "' has an endpoint outside the vertex set");
        }
        if (e.tail == e.head) {
            throw ValidationError("graph: edge '" + e.id + "' is a self-loop");
        }
    }
}

VertexIndex Graph::vertex_index(std::string_view id) const
{
    auto it = std::find(vertex_ids_.begin(), vertex_ids_.end(), id);
    if (it == vertex_ids_.end()) {
        throw ValidationError("graph: unknown vertex '" + std::string(id) + "'");
    }
    return static_cast<VertexIndex>(it - vertex_ids_.begin());
}

EdgeIndex Graph::edge_index(std::string_view id) const
{
    auto it = std::find_if(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.id == id; });
    if (it == edges_.end()) {
        throw ValidationError("graph: unknown edge '" + std::string(id) + "'");
    }
    return static_cast<EdgeIndex>(it - edges_.begin());
}

bool Graph::is_incident(VertexIndex v, EdgeIndex e) const
{
    return e < edges_.size() && (edges_[e].tail == v || edges_[e].head == v);
}

int Graph::incidence_sign(VertexIndex v, EdgeIndex e) const
{
    if (!is_incident(v, e)) {
        throw ValidationError("graph: vertex #" + std::to_string(v) + " is not an endpoint of edge #"
                              + std::to_string(e));
    }
    return edges_[e].head == v ? 1 : -1;
}

std::vector<EdgeIndex> Graph::incident_edges(VertexIndex v) const
{
    std::vector<EdgeIndex> out;
    for (EdgeIndex e = 0; e < edges_.size(); ++e) {
        if (edges_[e].tail == v || edges_[e].head == v) {
            out.push_back(e);
        }
    }
    return out;
}

std::vector<Incidence> Graph::incidences() const
{
    std::vector<Incidence> out;
    out.reserve(2 * edges_.size());
    for (EdgeIndex e = 0; e < edges_.size(); ++e) {
        out.push_back({edges_[e].tail, e});
        out.push_back({edges_[e].head, e});
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t Graph::component_count() const
{
    std::vector<std::size_t> parent(vertex_ids_.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    std::size_t components = vertex_ids_.size();
    for (const auto& e : edges_) {
        const auto a = find(e.tail);
        const auto b = find(e.head);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return components;
}

// ---------------------------------------------------------------------------
// Sheaf

Sheaf::Sheaf(Graph graph, std::vector<Eigen::Index> vertex_dims, std::vector<Eigen::Index> edge_dims,
             std::vector<Matrix> tail_maps, std::vector<Matrix> head_maps)
    : graph_(std::move(graph)), tail_maps_(std::move(tail_maps)), head_maps_(std::move(head_maps))
{
    if (vertex_dims.size() != graph_.vertex_count()) {
        throw ConformanceError("sheaf: " + std::to_string(vertex_dims.size()) + " vertex dimensions for "
                               + std::to_string(graph_.vertex_count()) + " vertices");
    }
    if (edge_dims.size() != graph_.edge_count() || tail_maps_.size() != graph_.edge_count()
        || head_maps_.size() != graph_.edge_count()) {
        throw ConformanceError("sheaf: edge dimensions / restriction maps do not match the edge count");
    }
    for (VertexIndex v = 0; v < vertex_dims.size(); ++v) {
        if (vertex_dims[v] < 0) {
            throw ValidationError("sheaf: negative stalk dimension at vertex '" + graph_.vertex_id(v) + "'");
        }
    }
    for (EdgeIndex e = 0; e < edge_dims.size(); ++e) {
        if (edge_dims[e] < 0) {
            throw ValidationError("sheaf: negative stalk dimension at edge '" + graph_.edge(e).id + "'");
        }
    }
    for (EdgeIndex e = 0; e < graph_.edge_count(); ++e) {
        const auto& edge = graph_.edge(e);
        auto check = [&](const Matrix& m, VertexIndex v) {
            if (m.rows() != edge_dims[e] || m.cols() != vertex_dims[v]) {
                throw ConformanceError("sheaf: restriction map (" + graph_.vertex_id(v) + ", " + edge.id
                                       + ") has shape " + shape(m) + ", expected "
                                       + std::to_string(edge_dims[e]) + "x" + std::to_string(vertex_dims[v]));
            }
        };
        check(tail_maps_[e], edge.tail);
        check(head_maps_[e], edge.head);
    }
    vertex_layout_ = BlockLayout(graph_.vertex_ids(), std::move(vertex_dims));
    std::vector<std::string> edge_ids;
    edge_ids.reserve(graph_.edge_count());
    for (const auto& e : graph_.edges()) {
        edge_ids.push_back(e.id);
    }
    edge_layout_ = BlockLayout(std::move(edge_ids), std::move(edge_dims));
    rebuild_offsets();
}

Sheaf Sheaf::with_zero_maps(Graph graph, std::vector<Eigen::Index> vertex_dims, std::vector<Eigen::Index> edge_dims)
{
    std::vector<Matrix> tails;
    std::vector<Matrix> heads;
    for (EdgeIndex e = 0; e < graph.edge_count(); ++e) {
        const auto& edge = graph.edge(e);
        const auto rows = edge_dims.at(e);
        tails.push_back(Matrix::Zero(rows, vertex_dims.at(edge.tail)));
        heads.push_back(Matrix::Zero(rows, vertex_dims.at(edge.head)));
    }
    return Sheaf(std::move(graph), std::move(vertex_dims), std::move(edge_dims), std::move(tails), std::move(heads));
}

void Sheaf::rebuild_offsets()
{
    map_offsets_.assign(1, 0);
    for (EdgeIndex e = 0; e < graph_.edge_count(); ++e) {
        map_offsets_.push_back(map_offsets_.back() + tail_maps_[e].size());
        map_offsets_.push_back(map_offsets_.back() + head_maps_[e].size());
    }
}

const Matrix& Sheaf::restriction(Incidence inc) const
{
    return graph_.incidence_sign(inc.vertex, inc.edge) > 0 ? head_maps_[inc.edge] : tail_maps_[inc.edge];
}

Sheaf Sheaf::with_restriction(Incidence inc, Matrix map) const
{
    const Matrix& current = restriction(inc);
    if (map.rows() != current.rows() || map.cols() != current.cols()) {
        throw ConformanceError("sheaf: replacement map for (" + graph_.vertex_id(inc.vertex) + ", "
                               + graph_.edge(inc.edge).id + ") has shape " + shape(map) + ", expected "
                               + shape(current));
    }
    Sheaf out = *this;
    if (graph_.incidence_sign(inc.vertex, inc.edge) > 0) {
        out.head_maps_[inc.edge] = std::move(map);
    } else {
        out.tail_maps_[inc.edge] = std::move(map);
    }
    return out;
}

Eigen::Index Sheaf::map_offset(Incidence inc) const
{
    const int sign = graph_.incidence_sign(inc.vertex, inc.edge);
    return map_offsets_[2 * inc.edge + (sign > 0 ? 1 : 0)];
}

Vector Sheaf::flatten_maps() const
{
    Vector out(flat_map_size());
    for (EdgeIndex e = 0; e < graph_.edge_count(); ++e) {
        out.segment(map_offsets_[2 * e], tail_maps_[e].size()) = flatten_row_major(tail_maps_[e]);
        out.segment(map_offsets_[2 * e + 1], head_maps_[e].size()) = flatten_row_major(head_maps_[e]);
    }
    return out;
}

Sheaf Sheaf::with_maps(const Vector& flat) const
{
    if (flat.size() != flat_map_size()) {
        throw ConformanceError("sheaf: flattened map vector has length " + std::to_string(flat.size())
                               + ", expected " + std::to_string(flat_map_size()));
    }
    Sheaf out = *this;
    for (EdgeIndex e = 0; e < graph_.edge_count(); ++e) {
        auto& t = out.tail_maps_[e];
        auto& h = out.head_maps_[e];
        t = unflatten_row_major({flat.data() + map_offsets_[2 * e], static_cast<std::size_t>(t.size())}, t.rows(),
                                t.cols());
        h = unflatten_row_major({flat.data() + map_offsets_[2 * e + 1], static_cast<std::size_t>(h.size())},
                                h.rows(), h.cols());
    }
    return out;
}

Sheaf Sheaf::flipped(EdgeIndex e) const
{
    std::vector<Edge> edges = graph_.edges();
    std::swap(edges.at(e).tail, edges.at(e).head);
    std::vector<Matrix> tails = tail_maps_;
    std::vector<Matrix> heads = head_maps_;
    std::swap(tails[e], heads[e]);
    std::vector<Eigen::Index> vd(vertex_layout_.sizes().begin(), vertex_layout_.sizes().end());
    std::vector<Eigen::Index> ed(edge_layout_.sizes().begin(), edge_layout_.sizes().end());
    return Sheaf(Graph(graph_.vertex_ids(), std::move(edges)), std::move(vd), std::move(ed), std::move(tails),
                 std::move(heads));
}

// ---------------------------------------------------------------------------
// Cochains and operators

Cochain0 make_cochain0(const Sheaf& sheaf, const std::vector<Vector>& blocks)
{
    const auto& g = sheaf.graph();
    if (blocks.size() != g.vertex_count()) {
        throw ConformanceError("cochain0: " + std::to_string(blocks.size()) + " blocks for "
                               + std::to_string(g.vertex_count()) + " vertices");
    }
    Cochain0 x{Vector::Zero(sheaf.c0_dim())};
    for (VertexIndex v = 0; v < blocks.size(); ++v) {
        if (blocks[v].size() != sheaf.vertex_dim(v)) {
            throw ConformanceError("cochain0: block at vertex '" + g.vertex_id(v) + "' has length "
                                   + std::to_string(blocks[v].size()) + ", stalk dimension is "
                                   + std::to_string(sheaf.vertex_dim(v)));
        }
        sheaf.vertex_block(x.values, v) = blocks[v];
    }
    return x;
}

void check_conforms(const Sheaf& sheaf, const Cochain0& x)
{
    if (x.values.size() != sheaf.c0_dim()) {
        throw ConformanceError("cochain0 has length " + std::to_string(x.values.size())
                               + " but the sheaf has dim C^0 = " + std::to_string(sheaf.c0_dim()));
    }
}

Cochain1 coboundary(const Sheaf& sheaf, const Cochain0& x)
{
    check_conforms(sheaf, x);
    Cochain1 out{Vector::Zero(sheaf.c1_dim())};
    const auto& g = sheaf.graph();
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        const auto& edge = g.edge(e);
        out.values.segment(sheaf.edge_layout().offset(e), sheaf.edge_dim(e)) =
            sheaf.head_map(e) * sheaf.vertex_block(x.values, edge.head)
            - sheaf.tail_map(e) * sheaf.vertex_block(x.values, edge.tail);
    }
    return out;
}

LinearOperator coboundary_matrix(const Sheaf& sheaf)
{
    LinearOperator op{Matrix::Zero(sheaf.c1_dim(), sheaf.c0_dim()), sheaf.edge_layout(), sheaf.vertex_layout()};
    const auto& g = sheaf.graph();
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        const auto& edge = g.edge(e);
        op.matrix.block(sheaf.edge_layout().offset(e), sheaf.vertex_layout().offset(edge.head), sheaf.edge_dim(e),
                        sheaf.vertex_dim(edge.head)) += sheaf.head_map(e);
        op.matrix.block(sheaf.edge_layout().offset(e), sheaf.vertex_layout().offset(edge.tail), sheaf.edge_dim(e),
                        sheaf.vertex_dim(edge.tail)) -= sheaf.tail_map(e);
    }
    return op;
}

LinearOperator laplacian(const Sheaf& sheaf)
{
    const LinearOperator d = coboundary_matrix(sheaf);
    const Eigen::Index n = d.cols();
    Matrix l = Matrix::Zero(n, n);
    if (d.rows() > 0) {
        l.selfadjointView<Eigen::Lower>().rankUpdate(d.matrix.transpose());
    }
    l.triangularView<Eigen::StrictlyUpper>() = l.transpose();
    return LinearOperator{std::move(l), sheaf.vertex_layout(), sheaf.vertex_layout()};
}

double disagreement_energy(const Sheaf& sheaf, const Cochain0& x)
{
    return 0.5 * coboundary(sheaf, x).values.squaredNorm();
}

Matrix global_sections(const Sheaf& sheaf, double rcond)
{
    if (!(rcond > 0.0)) {
        throw ParameterError("global_sections: cutoff must be positive");
    }
    return null_space(laplacian(sheaf).matrix, rcond);
}

Cochain0 project_H0(const Sheaf& sheaf, const Cochain0& x, double rcond)
{
    check_conforms(sheaf, x);
    const LinearOperator l = laplacian(sheaf);
    return Cochain0{x.values - pinv_apply(l, l.matrix * x.values, rcond)};
}

// ---------------------------------------------------------------------------
// Diffusion

bool Trajectory::energy_nonincreasing(double tol) const
{
    for (std::size_t i = 1; i < energy.size(); ++i) {
        if (energy[i] > energy[i - 1] + tol) {
            return false;
        }
    }
    return true;
}

Trajectory diffuse(const Sheaf& sheaf, const Cochain0& x0, double alpha, const FlowOptions& options)
{
    check_conforms(sheaf, x0);
    if (!(alpha > 0.0)) {
        throw ParameterError("diffuse: alpha must be positive");
    }
    const Matrix l = laplacian(sheaf).matrix;
    const Matrix d = coboundary_matrix(sheaf).matrix;

    ode::Options opt;
    opt.t_end = options.t_end;
    opt.sample_interval = options.sample_interval;
    opt.rtol = options.rtol;
    opt.atol = options.atol;
    opt.convergence_tol = options.convergence_tol;

    auto rhs = [&](double, const Vector& x, Vector& dx) { dx.noalias() = -alpha * (l * x); };
    ode::Solution sol = ode::integrate(rhs, x0.values, opt);

    Trajectory out;
    out.times = std::move(sol.times);
    out.states = std::move(sol.states);
    out.energy.reserve(out.states.size());
    for (const auto& x : out.states) {
        out.energy.push_back(0.5 * (d * x).squaredNorm());
    }
    out.status = sol.status;
    out.final_velocity_norm = sol.final_velocity_norm;
    out.accepted_steps = sol.accepted_steps;
    out.rejected_steps = sol.rejected_steps;
    out.message = sol.status == ode::Status::Converged
                      ? std::string{}
                      : "diffusion stopped (" + std::string(ode::to_string(sol.status)) + ") at t = "
                            + std::to_string(out.times.back()) + " with residual velocity "
                            + std::to_string(sol.final_velocity_norm);
    return out;
}

} // namespace opsheaf
