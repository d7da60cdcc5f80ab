#pragma once

#include "opsheaf/linalg.hpp"
#include "opsheaf/ode.hpp"

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace opsheaf {

using VertexIndex = std::size_t;
using EdgeIndex = std::size_t;

/// Oriented edge tail -> head. Orientation is fixed once the graph is built.
struct Edge {
    std::string id;
    VertexIndex tail = 0;
    VertexIndex head = 0;
};

/// A (vertex, edge) pair with the vertex an endpoint of the edge.
struct Incidence {
    VertexIndex vertex = 0;
    EdgeIndex edge = 0;

    friend auto operator<=>(const Incidence&, const Incidence&) = default;
};

/// Finite graph with named vertices and oriented, named edges.
class Graph {
public:
    Graph() = default;
    Graph(std::vector<std::string> vertex_ids, std::vector<Edge> edges);

    [[nodiscard]] std::size_t vertex_count() const { return vertex_ids_.size(); }
    [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }
    [[nodiscard]] const std::string& vertex_id(VertexIndex v) const { return vertex_ids_.at(v); }
    [[nodiscard]] const Edge& edge(EdgeIndex e) const { return edges_.at(e); }
    [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
    [[nodiscard]] const std::vector<std::string>& vertex_ids() const { return vertex_ids_; }

    /// Throws ValidationError for unknown ids.
    [[nodiscard]] VertexIndex vertex_index(std::string_view id) const;
    [[nodiscard]] EdgeIndex edge_index(std::string_view id) const;

    [[nodiscard]] bool is_incident(VertexIndex v, EdgeIndex e) const;
    /// +1 for the head, -1 for the tail; ValidationError if not incident.
    [[nodiscard]] int incidence_sign(VertexIndex v, EdgeIndex e) const;
    /// Edges incident to v in increasing edge order.
    [[nodiscard]] std::vector<EdgeIndex> incident_edges(VertexIndex v) const;
    /// All incidences ordered lexicographically by (vertex, edge).
    [[nodiscard]] std::vector<Incidence> incidences() const;

    [[nodiscard]] std::size_t component_count() const;
    [[nodiscard]] bool is_connected() const { return component_count() <= 1; }

private:
    std::vector<std::string> vertex_ids_;
    std::vector<Edge> edges_;
};

/// Cellular sheaf on a graph: stalk dimensions plus one restriction matrix
/// (edge_dim x vertex_dim) for each endpoint of every edge.
class Sheaf {
public:
    Sheaf() = default;
    Sheaf(Graph graph, std::vector<Eigen::Index> vertex_dims, std::vector<Eigen::Index> edge_dims,
          std::vector<Matrix> tail_maps, std::vector<Matrix> head_maps);

    /// Sheaf with all restriction maps zero.
    static Sheaf with_zero_maps(Graph graph, std::vector<Eigen::Index> vertex_dims,
                                std::vector<Eigen::Index> edge_dims);

    [[nodiscard]] const Graph& graph() const { return graph_; }
    [[nodiscard]] Eigen::Index vertex_dim(VertexIndex v) const { return vertex_layout_.size(v); }
    [[nodiscard]] Eigen::Index edge_dim(EdgeIndex e) const { return edge_layout_.size(e); }
    /// Block structure of C^0 and C^1.
    [[nodiscard]] const BlockLayout& vertex_layout() const { return vertex_layout_; }
    [[nodiscard]] const BlockLayout& edge_layout() const { return edge_layout_; }
    [[nodiscard]] Eigen::Index c0_dim() const { return vertex_layout_.total(); }
    [[nodiscard]] Eigen::Index c1_dim() const { return edge_layout_.total(); }

    [[nodiscard]] const Matrix& tail_map(EdgeIndex e) const { return tail_maps_.at(e); }
    [[nodiscard]] const Matrix& head_map(EdgeIndex e) const { return head_maps_.at(e); }
    [[nodiscard]] const Matrix& restriction(Incidence inc) const;
    [[nodiscard]] Sheaf with_restriction(Incidence inc, Matrix map) const;

    /// All restriction maps flattened into one vector: for each edge in
    /// order, the tail map then the head map, each row-major.
    [[nodiscard]] Vector flatten_maps() const;
    [[nodiscard]] Sheaf with_maps(const Vector& flat) const;
    [[nodiscard]] Eigen::Index map_offset(Incidence inc) const;
    [[nodiscard]] Eigen::Index flat_map_size() const { return map_offsets_.back(); }

    /// Same sheaf with edge e reversed (tail and head maps swapped).
    [[nodiscard]] Sheaf flipped(EdgeIndex e) const;

    template <typename Derived>
    [[nodiscard]] auto vertex_block(const Eigen::MatrixBase<Derived>& c0, VertexIndex v) const
    {
        return c0.segment(vertex_layout_.offset(v), vertex_layout_.size(v));
    }
    template <typename Derived>
    [[nodiscard]] auto vertex_block(Eigen::MatrixBase<Derived>& c0, VertexIndex v) const
    {
        return c0.segment(vertex_layout_.offset(v), vertex_layout_.size(v));
    }
    template <typename Derived>
    [[nodiscard]] auto edge_block(const Eigen::MatrixBase<Derived>& c1, EdgeIndex e) const
    {
        return c1.segment(edge_layout_.offset(e), edge_layout_.size(e));
    }

private:
    void rebuild_offsets();

    Graph graph_;
    BlockLayout vertex_layout_;
    BlockLayout edge_layout_;
    std::vector<Matrix> tail_maps_;
    std::vector<Matrix> head_maps_;
    std::vector<Eigen::Index> map_offsets_{0};
};

/// 0-cochain: one vector per vertex stalk, stored as a single block vector.
struct Cochain0 {
    Vector values;
};

/// 1-cochain: one vector per edge stalk.
struct Cochain1 {
    Vector values;
};

/// Assemble a 0-cochain from per-vertex blocks; names the offending vertex on mismatch.
Cochain0 make_cochain0(const Sheaf& sheaf, const std::vector<Vector>& blocks);
void check_conforms(const Sheaf& sheaf, const Cochain0& x);

/// (dx)_e = F_{head<e} x_head - F_{tail<e} x_tail.
Cochain1 coboundary(const Sheaf& sheaf, const Cochain0& x);
LinearOperator coboundary_matrix(const Sheaf& sheaf);
/// L = d^T d, exactly symmetric.
LinearOperator laplacian(const Sheaf& sheaf);

/// 1/2 ||dx||^2.
double disagreement_energy(const Sheaf& sheaf, const Cochain0& x);

/// Orthonormal basis of H^0 = ker L, using a relative singular-value cutoff.
Matrix global_sections(const Sheaf& sheaf, double rcond = kDefaultRcond);

/// Orthogonal projection onto H^0 computed as x - L^+(L x).
Cochain0 project_H0(const Sheaf& sheaf, const Cochain0& x, double rcond = kDefaultRcond);

/// Time-sampled flow with the disagreement energy at every sample.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<double> energy;
    ode::Status status = ode::Status::ReachedEnd;
    double final_velocity_norm = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::string message;

    [[nodiscard]] const Vector& final_state() const { return states.back(); }
    [[nodiscard]] double final_time() const { return times.back(); }
    [[nodiscard]] bool converged() const { return status == ode::Status::Converged; }
    /// True when energy never increases by more than tol between samples.
    [[nodiscard]] bool energy_nonincreasing(double tol) const;
};

struct FlowOptions {
    double t_end = 500.0;
    double sample_interval = 0.1;
    double rtol = 1e-8;
    double atol = 1e-10;
    double convergence_tol = 1e-10;
};

/// Integrates dx/dt = -alpha L x.
Trajectory diffuse(const Sheaf& sheaf, const Cochain0& x0, double alpha, const FlowOptions& options = {});

} // namespace opsheaf
