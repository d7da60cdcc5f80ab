#pragma once

#include "opsheaf/joint_dynamics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace opsheaf {

struct GapSample {
    double time = 0.0;
    double psi = 0.0;
    double discrepancy = 0.0;       ///< ||delta x||
    double opinion_speed = 0.0;     ///< ||P_Q L x||
    double structure_speed = 0.0;   ///< ||Pi(delta x x^T)||_F
    double ratio_lambda = 0.0;
    double ratio_mu = 0.0;          ///< Frobenius form
    double ratio_mu_weighted = 0.0; ///< incidence-weighted sum form
    bool at_equilibrium = false;
};

/// Sampled infima of the two dissipation ratios along a trajectory.
struct GapEstimate {
    std::vector<GapSample> samples;
    double lambda_eff = 0.0;
    double mu_eff = 0.0;
    double b_x = 0.0;     ///< sup ||x(t)||
    double b_delta = 0.0; ///< sup ||delta(t)||_F
    double initial_discrepancy = 0.0;
    double horizon = 0.0;
    double stride = 0.0; ///< largest gap between consecutive samples
    bool equilibrium_reached = false;
    bool undefined = false; ///< every sample is at equilibrium
    double max_mu_formula_gap = 0.0; ///< relative disagreement of the two mu forms
};

/// Samples with ||delta x|| <= equilibrium_tol are skipped for the infima.
GapEstimate estimate_gaps(const JointTrajectory& traj, double equilibrium_tol = 1e-10);

struct BoundReport {
    bool applicable = false;
    std::string reason;
    double observed = 0.0;
    double bound = 0.0;        ///< horizon-dependent form
    double bound_limit = 0.0;  ///< horizon-free form
    double slack = 0.0;        ///< bound - observed
    double bound_constant = 0.0; ///< B_x or B_delta
    double gap = 0.0;
    double horizon = 0.0;
    double initial_discrepancy = 0.0;
    /// Decay ||delta x(t)|| <= ||delta0 x0|| exp(-rate gap t) at every sample.
    bool premise_holds = false;
    double premise_worst_ratio = 0.0;
    /// Stopping-time form, only when the sampled ratios are nonincreasing.
    std::optional<double> conditional_bound;

    [[nodiscard]] bool passed() const { return applicable && slack >= -1e-9 * std::max(bound, 1e-300); }
    [[nodiscard]] bool confirmed() const { return passed() && premise_holds; }
};

/// ||delta(T) - delta0||_F against beta B_x ||delta0 x0|| / (alpha lambda) (1 - exp(-alpha lambda T)).
BoundReport check_structural_stagnation(const JointTrajectory& traj, const GapEstimate& gaps);
/// ||x(T) - x(0)|| against alpha B_delta ||delta0 x0|| / (beta mu) (1 - exp(-beta mu T)).
BoundReport check_opinion_stagnation(const JointTrajectory& traj, const GapEstimate& gaps);

struct RegimeThresholds {
    double rho_minus = 0.0;
    double rho_plus = 0.0;
    /// epsilon^2 < B_x B_delta d0^2 / (lambda mu), which implies rho_minus < rho_plus.
    bool ordering_condition = false;
    [[nodiscard]] bool ordered() const { return rho_minus < rho_plus; }
};

RegimeThresholds regime_thresholds(double epsilon, double lambda_eff, double mu_eff, double b_x, double b_delta,
                                   double initial_discrepancy);

} // namespace opsheaf
