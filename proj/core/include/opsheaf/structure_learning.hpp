#pragma once

#include "opsheaf/linalg.hpp"
#include "opsheaf/sheaf.hpp"

#include <string>
#include <vector>

namespace opsheaf {

enum class EdgeAdaptation {
    Static, ///< no incidence adapts
    TypeS,  ///< both incidences adapt
    TypeA,  ///< exactly one incidence adapts
};

/// Set of adapting incidences; all remaining restriction maps are frozen.
class AdaptationSpec {
public:
    AdaptationSpec() = default;
    /// Throws ValidationError if a pair is not an incidence of the graph.
    AdaptationSpec(const Graph& graph, std::vector<Incidence> adapting);

    static AdaptationSpec all(const Graph& graph);
    static AdaptationSpec none(const Graph& graph);
    /// The complement of the listed frozen incidences.
    static AdaptationSpec from_frozen(const Graph& graph, const std::vector<Incidence>& frozen);

    [[nodiscard]] const std::vector<Incidence>& adapting() const { return adapting_; }
    [[nodiscard]] std::vector<Incidence> frozen() const;
    [[nodiscard]] bool adapts(Incidence inc) const;
    /// E': edges with at least one adapting incidence, in edge order.
    [[nodiscard]] std::vector<EdgeIndex> active_edges() const;
    [[nodiscard]] EdgeAdaptation edge_type(EdgeIndex e) const;
    [[nodiscard]] const Graph& graph() const { return graph_; }

private:
    Graph graph_;
    std::vector<Incidence> adapting_;
};

const char* to_string(EdgeAdaptation t);

/// Coordinates on V_maps: one row-major block per adapting incidence,
/// ordered by (vertex, edge).
struct StructureLayout {
    std::vector<Incidence> keys;
    std::vector<Eigen::Index> rows;
    std::vector<Eigen::Index> cols;
    BlockLayout blocks;

    [[nodiscard]] Eigen::Index dim() const { return blocks.total(); }
    [[nodiscard]] Matrix block(const Vector& rho, std::size_t i) const;
};

StructureLayout structure_layout(const Sheaf& sheaf, const AdaptationSpec& adapt);
/// The current adapting maps as an element of V_maps.
Vector gather_maps(const Sheaf& sheaf, const StructureLayout& layout);
/// Copy of the sheaf with the adapting maps replaced by rho.
Sheaf scatter_maps(const Sheaf& sheaf, const StructureLayout& layout, const Vector& rho);

/// Affine discrepancy rho |-> A rho + c on W = sum over E' of F(e).
struct DiscrepancySystem {
    LinearOperator a;
    Vector c;
    Cochain0 x;
    StructureLayout layout;
    std::vector<EdgeIndex> active_edges;

    [[nodiscard]] Vector discrepancy(const Vector& rho) const { return a.matrix * rho + c; }
    [[nodiscard]] double objective(const Vector& rho) const { return 0.5 * discrepancy(rho).squaredNorm(); }
    [[nodiscard]] Vector gradient(const Vector& rho) const { return a.matrix.transpose() * discrepancy(rho); }
    /// A^T y assembled blockwise as sigma * y_e x_w^T.
    [[nodiscard]] Vector adjoint(const Vector& y, const Sheaf& sheaf) const;
};

DiscrepancySystem build_discrepancy_system(const Sheaf& sheaf, const Cochain0& x, const AdaptationSpec& adapt);

struct LearningLimit {
    Vector rho_inf;
    Vector from_pseudo_inverse;     ///< rho0 - A^+ d0
    Vector from_kernel_projection;  ///< P_ker(A) rho0 - A^+ c
    Vector from_normal_equations;   ///< rho0 - (A^T A)^+ A^T d0
    double formula_spread = 0.0;
    double stationarity = 0.0;      ///< ||A^T (A rho_inf + c)||
    double final_discrepancy = 0.0; ///< ||A rho_inf + c||
    bool consistent = false;        ///< -c in im(A) by relative residual
};

/// Closed-form limit of the partial-learning flow. Throws NumericalError if
/// the three formulas disagree beyond agreement_tol * scale.
LearningLimit learning_limit(const DiscrepancySystem& sys, const Vector& rho0, double rcond = kDefaultRcond,
                             double agreement_tol = 1e-9);

/// Integrates d rho/dt = -beta A^T (A rho + c); energy is 1/2 ||A rho + c||^2.
Trajectory learning_flow(const DiscrepancySystem& sys, const Vector& rho0, double beta,
                         const FlowOptions& options = {});

/// Solves (A^T A + lambda I) rho = lambda rho0 - A^T c by Cholesky.
Vector regularized_learning(const DiscrepancySystem& sys, const Vector& rho0, double lambda);

/// Integrates d rho/dt = -beta (A^T (A rho + c) + lambda (rho - rho0)).
Trajectory regularized_learning_flow(const DiscrepancySystem& sys, const Vector& rho0, double beta, double lambda,
                                     const FlowOptions& options = {});

/// Sheaf of free structures over the adapting incidences. Its coboundary is A
/// and its Laplacian is A^T A.
Sheaf build_structure_sheaf(const Sheaf& sheaf, const Cochain0& x, const AdaptationSpec& adapt);

/// Structure sheaf over every incidence, with edge stalks F(e) everywhere.
Sheaf build_full_structure_sheaf(const Sheaf& sheaf, const Cochain0& x);

/// Frozen maps placed in C^0 of the full structure sheaf, adapting blocks zero.
Vector frozen_embedding(const Sheaf& sheaf, const AdaptationSpec& adapt);

} // namespace opsheaf
