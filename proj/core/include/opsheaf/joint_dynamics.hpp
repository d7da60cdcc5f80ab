#pragma once

#include "opsheaf/free_opinions.hpp"
#include "opsheaf/linalg.hpp"
#include "opsheaf/ode.hpp"
#include "opsheaf/sheaf.hpp"
#include "opsheaf/structure_learning.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace opsheaf {

// ---------------------------------------------------------------------------
// Edge classes and policies

enum class EdgePolicy {
    UniversalAdaptation,    ///< both maps adapt (Type S)
    StructuralStubbornness, ///< both maps frozen (Type S)
    Accommodation,          ///< only the free endpoint adapts (Type A)
    Outreach,               ///< only the stubborn endpoint adapts (Type A)
};

const char* to_string(EdgePolicy p);
/// Accepts the names returned by to_string; throws ValidationError otherwise.
EdgePolicy parse_edge_policy(const std::string& name);

/// Per-edge policy labels. Edges without a label keep the base adaptation.
struct ScenarioPolicy {
    std::map<EdgeIndex, EdgePolicy> per_edge;
};

struct EdgeClassification {
    std::vector<EdgeIndex> free_free;         ///< E_FF
    std::vector<EdgeIndex> stubborn_stubborn; ///< E_UU
    std::vector<EdgeIndex> mixed;             ///< E_UF
    std::vector<EdgeIndex> type_s;
    std::vector<EdgeIndex> type_a;
    std::vector<std::optional<EdgePolicy>> policy;

    [[nodiscard]] bool symmetric() const { return type_a.empty(); }
};

/// A vertex counts as stubborn when dim S_v > 0.
EdgeClassification classify_edges(const Graph& graph, const StubbornSpec& spec, const AdaptationSpec& adapt,
                                  const ScenarioPolicy* policy = nullptr);

/// Applies the policy table on top of base. Accommodation and Outreach are
/// only defined on mixed edges; anything else raises ValidationError.
AdaptationSpec compile_policy(const Graph& graph, const StubbornSpec& spec, const ScenarioPolicy& policy,
                              const AdaptationSpec& base);

// ---------------------------------------------------------------------------
// Joint flow

/// Packed state z = [y ; all restriction maps in Sheaf::flatten_maps order].
class JointSystem {
public:
    JointSystem(Sheaf sheaf, StubbornSpec spec, AdaptationSpec adapt);

    [[nodiscard]] const Sheaf& initial_sheaf() const { return sheaf_; }
    [[nodiscard]] const StubbornSpec& stubborn() const { return spec_; }
    [[nodiscard]] const StubbornFrame& frame() const { return frame_; }
    [[nodiscard]] const AdaptationSpec& adaptation() const { return adapt_; }
    [[nodiscard]] const Vector& clamped() const { return u_; }

    [[nodiscard]] Eigen::Index free_dim() const { return frame_.free_dim(); }
    [[nodiscard]] Eigen::Index map_dim() const { return sheaf_.flat_map_size(); }
    [[nodiscard]] Eigen::Index state_dim() const { return free_dim() + map_dim(); }

    /// Packs a total opinion x (its S-part must equal u) with the current maps.
    [[nodiscard]] Vector pack(const Cochain0& x) const;
    [[nodiscard]] Vector pack(const Vector& y, const Vector& maps) const;
    [[nodiscard]] Vector free_part(const Vector& z) const { return z.head(free_dim()); }
    [[nodiscard]] Vector maps_part(const Vector& z) const { return z.tail(map_dim()); }
    [[nodiscard]] Vector opinion(const Vector& z) const { return frame_.total_state(u_, free_part(z)); }
    [[nodiscard]] Sheaf sheaf_at(const Vector& z) const { return sheaf_.with_maps(maps_part(z)); }
    [[nodiscard]] Matrix coboundary_at(const Vector& z) const;

    /// 1/2 ||delta x||^2.
    [[nodiscard]] double psi(const Vector& z) const;
    /// Velocity of the constrained joint flow; frozen blocks are exactly zero.
    void velocity(const Vector& z, double alpha, double beta, Vector& dz) const;
    /// Analytic dPsi/dt = -beta ||Pi(dx x^T)||^2 - alpha ||P_Q d^T d x||^2.
    [[nodiscard]] double psi_rate(const Vector& z, double alpha, double beta) const;
    /// ||Pi(dx x^T)||_F^2 and the incidence-weighted sum form of the same quantity.
    [[nodiscard]] double structural_dissipation(const Vector& z) const;
    [[nodiscard]] double structural_dissipation_weighted(const Vector& z) const;
    /// ||P_Q L x||^2.
    [[nodiscard]] double opinion_dissipation(const Vector& z) const;
    /// Q_vv = alpha (L)_vv - beta x_v x_v^T.
    [[nodiscard]] Matrix conservation_matrix(const Vector& z, VertexIndex v, double alpha, double beta) const;

    /// Mask over map coordinates: 1 for adapting entries.
    [[nodiscard]] const Vector& map_mask() const { return mask_; }

private:
    Sheaf sheaf_;
    StubbornSpec spec_;
    StubbornFrame frame_;
    AdaptationSpec adapt_;
    Vector u_;
    Vector mask_;
};

struct JointOptions {
    double t_end = 200.0;
    double sample_interval = 0.1;
    double rtol = 1e-8;
    double atol = 1e-10;
    double convergence_tol = 1e-9;
    int convergence_steps = 3;
    /// Ceilings are this factor times max(initial norm, 1) for y and the maps.
    double ceiling_factor = 1e6;
};

struct RegularizationParams {
    double lambda = 0.0;
    double mu = 0.0;
};

struct JointTrajectory {
    explicit JointTrajectory(JointSystem sys) : system(std::move(sys)) {}

    JointSystem system;
    JointOptions options;
    double alpha = 0.0;
    double beta = 0.0;
    std::optional<RegularizationParams> regularization;
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<double> psi;
    std::vector<double> frobenius;
    std::vector<double> lyapunov; ///< regularized runs only
    ode::Status status = ode::Status::ReachedEnd;
    double final_velocity_norm = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::string message;

    [[nodiscard]] const Vector& final_state() const { return states.back(); }
    [[nodiscard]] bool converged() const { return status == ode::Status::Converged; }
    [[nodiscard]] bool diverged() const { return status == ode::Status::Diverged; }
    [[nodiscard]] Vector opinion(std::size_t i) const { return system.opinion(states.at(i)); }
    [[nodiscard]] Vector maps(std::size_t i) const { return system.maps_part(states.at(i)); }
    /// Largest sample-to-sample increase of psi (0 when nonincreasing).
    [[nodiscard]] double max_psi_increase() const;
    [[nodiscard]] double max_frobenius_increase() const;
    [[nodiscard]] double max_lyapunov_increase() const;
};

/// Integrates the constrained joint dynamics from opinion x0 and the sheaf's
/// current maps. alpha, beta >= 0 and not both zero.
JointTrajectory joint_flow(const JointSystem& system, const Cochain0& x0, double alpha, double beta,
                           const JointOptions& options = {});

struct RegularizedBounds {
    double lyapunov0 = 0.0;
    double max_opinion_displacement_sq = 0.0; ///< max ||y - y0||^2 over samples
    double max_map_displacement_sq = 0.0;     ///< max ||delta - delta0||_F^2 over samples
    double opinion_bound = 0.0;               ///< 2 L(0) / lambda
    double map_bound = 0.0;                   ///< 2 L(0) / mu
    double stationarity_opinion = 0.0;
    double stationarity_maps = 0.0;
    [[nodiscard]] bool holds(double rel_tol = 1e-9) const
    {
        return max_opinion_displacement_sq <= opinion_bound * (1 + rel_tol) + rel_tol
               && max_map_displacement_sq <= map_bound * (1 + rel_tol) + rel_tol;
    }
};

/// Joint flow with penalties lambda/2 ||y - y0||^2 and mu/2 ||delta - delta0||_F^2.
JointTrajectory regularized_joint_flow(const JointSystem& system, const Cochain0& x0, double alpha, double beta,
                                       double lambda, double mu, const JointOptions& options = {});

RegularizedBounds regularized_bounds(const JointTrajectory& traj);

// ---------------------------------------------------------------------------
// Equilibria

enum class EquilibriumClass {
    ConsensusAchieved,   ///< ||(dx)_e|| below tolerance
    VacuouslyStationary, ///< residual remains but every adapting endpoint has x_w ~ 0
    FrozenResidual,      ///< residual on an edge with no adapting incidence
    NotStationary,       ///< residual with an adapting endpoint that still expresses
};

const char* to_string(EquilibriumClass c);

struct EdgeEquilibrium {
    EdgeIndex edge = 0;
    double residual = 0.0;
    EquilibriumClass kind = EquilibriumClass::ConsensusAchieved;
    /// Some adapting endpoint expresses almost nothing relative to its start.
    bool silenced = false;
    std::vector<std::pair<VertexIndex, double>> adapting_opinion_norms;
};

struct EquilibriumOptions {
    double residual_tol = 1e-6;
    double vacuous_tol = 1e-8;
    double silence_ratio = 1e-2;
};

struct EquilibriumReport {
    std::vector<EdgeEquilibrium> edges;
    [[nodiscard]] bool stationary() const;
    [[nodiscard]] const EdgeEquilibrium& edge(EdgeIndex e) const;
};

/// Classifies each edge. The optional reference state supplies the initial
/// expressed values for the silenced flag.
EquilibriumReport equilibrium_residuals(const Sheaf& sheaf, const Cochain0& x, const AdaptationSpec& adapt,
                                        const EquilibriumOptions& options = {}, const Sheaf* reference_sheaf = nullptr,
                                        const Cochain0* reference_x = nullptr);
EquilibriumReport equilibrium_residuals(const JointTrajectory& traj, const EquilibriumOptions& options = {});

struct VertexConservation {
    VertexIndex vertex = 0;
    bool applicable = false;
    std::string reason; ///< why not applicable
    Matrix q0;
    Vector eigenvalues; ///< of Q_vv(0), ascending
    double max_drift = 0.0;
    double max_asymmetry = 0.0;
    /// Negative eigenvalue: x_v stays away from 0. Positive: incident maps cannot all vanish.
    bool opinion_persists = false;
    bool maps_persist = false;
};

struct ConservationReport {
    std::vector<VertexConservation> vertices;
    double tolerance = 0.0; ///< rtol * max(1, T)
    [[nodiscard]] bool holds() const;
};

ConservationReport conservation_audit(const JointTrajectory& traj, const std::vector<VertexIndex>& vertices);

// ---------------------------------------------------------------------------
// Single-edge closed forms

/// One edge u -> v, u of dimension 2 with first coordinate s clamped and free
/// coordinate y, v scalar, F_u = [a b], F_v = [c], alpha = beta.
struct SingleEdgeState {
    double s = 1.0;
    double y = 1.0;
    double xv = -1.0;
    double a = 0.5;
    double b = 0.5;
    double c = 1.0;

    [[nodiscard]] double discrepancy() const { return c * xv - a * s - b * y; }
    [[nodiscard]] double expressed() const { return c * xv; }
};

struct SingleEdgeEquilibrium {
    SingleEdgeState state;
    int iterations = 0;
    double bracket_width = 0.0;
};

/// Scenario labels: UniversalAdaptation (a, b, c adapt), StructuralStubbornness
/// (no map adapts), Accommodation (c adapts), Outreach (a, b adapt).
/// Throws NumericalError if no root is bracketed or the data leave the
/// family the conserved quantities describe.
SingleEdgeEquilibrium single_edge_equilibrium(EdgePolicy scenario, const SingleEdgeState& init);

/// The single-edge instance as a sheaf, stubborn spec and opinion.
struct SingleEdgeModel {
    Sheaf sheaf;
    StubbornSpec spec;
    Cochain0 x;
};
SingleEdgeModel single_edge_model(const SingleEdgeState& init);

} // namespace opsheaf
