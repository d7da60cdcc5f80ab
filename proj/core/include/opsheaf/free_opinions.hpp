#pragma once

#include "opsheaf/linalg.hpp"
#include "opsheaf/sheaf.hpp"

#include <optional>
#include <vector>

namespace opsheaf {

/// Directional stubbornness: per vertex an orthonormal basis of the clamped
/// subspace S_v (possibly empty) and the clamped coordinates u_v in that basis.
struct StubbornSpec {
    std::vector<Matrix> basis;
    std::vector<Vector> values;

    /// Spec with S_v = {0} everywhere.
    static StubbornSpec none(const Sheaf& sheaf);
    /// S_v equal to the whole stalk at each listed vertex, clamped to the given block of x.
    static StubbornSpec fully_stubborn(const Sheaf& sheaf, const std::vector<VertexIndex>& vertices,
                                       const Cochain0& x);

    [[nodiscard]] bool is_stubborn(VertexIndex v) const { return basis.at(v).cols() > 0; }
    [[nodiscard]] std::vector<VertexIndex> stubborn_vertices() const;
    [[nodiscard]] std::vector<VertexIndex> free_vertices() const;
    /// u packed as an element of C^0(S).
    [[nodiscard]] Vector packed_values() const;

    /// Throws ConformanceError / ValidationError; bases must satisfy B^T B = I within tol.
    void validate(const Sheaf& sheaf, double orthonormality_tol = 1e-10) const;
};

/// The S/T splitting of C^0: embeddings iota_S, iota_Q whose transposes are P_S, P_Q.
struct StubbornFrame {
    LinearOperator iota_s; ///< C^0(S) -> C^0(F)
    LinearOperator iota_q; ///< C^0(Q) -> C^0(F)
    std::vector<Matrix> free_basis;

    [[nodiscard]] Eigen::Index stubborn_dim() const { return iota_s.cols(); }
    [[nodiscard]] Eigen::Index free_dim() const { return iota_q.cols(); }
    [[nodiscard]] Vector total_state(const Vector& u, const Vector& y) const
    {
        return iota_s.matrix * u + iota_q.matrix * y;
    }
    [[nodiscard]] Vector stubborn_part(const Vector& x) const { return iota_s.matrix.transpose() * x; }
    [[nodiscard]] Vector free_part(const Vector& x) const { return iota_q.matrix.transpose() * x; }
};

StubbornFrame build_frame(const Sheaf& sheaf, const StubbornSpec& spec);

/// L_F written in the rotated (S, Q) frame.
struct BlockLaplacian {
    StubbornFrame frame;
    LinearOperator l_ss;
    LinearOperator l_sq;
    LinearOperator l_qs;
    LinearOperator l_qq;
    Matrix ambient_laplacian;  ///< L_F in original coordinates
    Matrix ambient_coboundary; ///< d_F in original coordinates

    /// [[L_SS, L_SQ], [L_QS, L_QQ]].
    [[nodiscard]] Matrix reassembled() const;
    /// R^T L_F R with R = [iota_S, iota_Q].
    [[nodiscard]] Matrix rotated_laplacian() const;
};

/// Sheaf of free opinions: vertex stalks T_v, restrictions F_{v<e} restricted to T_v.
struct FreeOpinionSheaf {
    Sheaf sheaf;
    BlockLaplacian blocks;
};

FreeOpinionSheaf build_free_sheaf(const Sheaf& sheaf, const StubbornSpec& spec);

struct PoissonSolution {
    Vector y_inf;              ///< equilibrium free coordinates
    Vector x_inf;              ///< total state iota_S u + iota_Q y_inf
    Vector from_full_gradient; ///< y0 - L_Q^+ P_Q L_F x0
    Vector from_projection;    ///< P_{H^0(Q)} y0 - L_Q^+ L_QS u
    Vector from_correction;    ///< y0 - L_Q^+ (L_Q y0 + L_QS u)
    double formula_spread = 0.0; ///< largest pairwise distance between the three
    double residual = 0.0;       ///< ||L_Q y_inf + L_QS u||
    double residual_scale = 0.0;
};

/// Solves L_Q y = -L_QS u, choosing the solution nearest y0. Throws
/// SolvabilityError if the residual exceeds residual_tol * scale and
/// NumericalError if the three closed forms disagree beyond agreement_tol.
PoissonSolution solve_poisson(const BlockLaplacian& blocks, const Vector& u, const Vector& y0,
                              double rcond = kDefaultRcond, double agreement_tol = 1e-9,
                              double residual_tol = 1e-9);

struct ConstrainedTrajectory {
    Trajectory free; ///< y(t) with energy 1/2 ||d x(t)||^2
    std::vector<Vector> total;
};

/// Integrates dy/dt = -alpha (L_Q y + L_QS u).
ConstrainedTrajectory constrained_diffuse(const BlockLaplacian& blocks, const Vector& u, const Vector& y0,
                                          double alpha, const FlowOptions& options = {});

struct CompatibilityResult {
    bool compatible = false;
    double obstruction_residual = 0.0; ///< ||(I - P_im dQ) dF iota_S u||
    double tolerance = 0.0;
    Vector obstruction; ///< representative of the class in C^1 orthogonal to im dQ
};

/// Tests whether u extends to a global section. Default tolerance is
/// 1e-8 * ||dF iota_S u||, floored at the round-off level of dF and u.
CompatibilityResult compatibility_obstruction(const Sheaf& sheaf, const StubbornSpec& spec,
                                              std::optional<double> tol = std::nullopt);

/// Dimensions along 0 -> H0(Q) -> H0(F) -> C0(S) -> H1(Q) -> H1(F) -> 0 and
/// rank checks of exactness at each interior term.
struct ExactSequenceReport {
    Eigen::Index h0_free = 0;
    Eigen::Index h0_full = 0;
    Eigen::Index c0_stubborn = 0;
    Eigen::Index h1_free = 0;
    Eigen::Index h1_full = 0;
    Eigen::Index restriction_rank = 0; ///< rank of H0(F) -> C0(S)
    Eigen::Index connecting_rank = 0;  ///< rank of the connecting map C0(S) -> H1(Q)
    bool injective_at_h0 = false;
    bool exact_at_h0_full = false;
    bool exact_at_c0 = false;
    bool exact_at_h1_free = false;

    [[nodiscard]] Eigen::Index alternating_sum() const
    {
        return h0_free - h0_full + c0_stubborn - h1_free + h1_full;
    }
    [[nodiscard]] bool exact() const
    {
        return alternating_sum() == 0 && injective_at_h0 && exact_at_h0_full && exact_at_c0 && exact_at_h1_free;
    }
};

ExactSequenceReport exact_sequence_audit(const Sheaf& sheaf, const StubbornSpec& spec,
                                         double rcond = 1e-10);

} // namespace opsheaf
