#include "opsheaf/timescale.hpp"

#include "opsheaf/errors.hpp"

#include <cmath>
#include <limits>

namespace opsheaf {

namespace {

// (1 - exp(-k T)) / k, continuous at k = 0.
double saturating(double k, double horizon)
{
    if (k * horizon < 1e-12) {
        return horizon;
    }
    return -std::expm1(-k * horizon) / k;
}

bool nonincreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[i - 1] * (1 + 1e-12) + 1e-300) {
            return false;
        }
    }
    return true;
}

struct DecayCheck {
    bool holds = true;
    double worst = 0.0;
};

DecayCheck check_decay(const GapEstimate& gaps, double rate)
{
    DecayCheck out;
    const double d0 = gaps.initial_discrepancy;
    for (const auto& s : gaps.samples) {
        const double envelope = d0 * std::exp(-rate * s.time);
        const double ratio = envelope > 0 ? s.discrepancy / envelope : (s.discrepancy > 0 ? 1e300 : 0.0);
        out.worst = std::max(out.worst, ratio);
        if (s.discrepancy > envelope * (1 + 1e-7) + 1e-12 * std::max(1.0, d0)) {
            out.holds = false;
        }
    }
    return out;
}

} // namespace

GapEstimate estimate_gaps(const JointTrajectory& traj, double equilibrium_tol)
{
    if (traj.states.size() < 2) {
        throw ParameterError("estimate_gaps: trajectory needs at least two samples");
    }
    const auto& sys = traj.system;
    GapEstimate g;
    g.lambda_eff = std::numeric_limits<double>::infinity();
    g.mu_eff = std::numeric_limits<double>::infinity();
    g.horizon = traj.times.back() - traj.times.front();
    bool any_defined = false;

    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const Vector& z = traj.states[i];
        const Vector x = sys.opinion(z);
        const Matrix d = sys.coboundary_at(z);
        const Vector r = d * x;

        GapSample s;
        s.time = traj.times[i];
        s.discrepancy = r.norm();
        s.psi = 0.5 * r.squaredNorm();
        s.opinion_speed = std::sqrt(sys.opinion_dissipation(z));
        const double frob = sys.structural_dissipation(z);
        const double weighted = sys.structural_dissipation_weighted(z);
        s.structure_speed = std::sqrt(frob);

        g.b_x = std::max(g.b_x, x.norm());
        g.b_delta = std::max(g.b_delta, sys.maps_part(z).norm());
        if (i == 0) {
            g.initial_discrepancy = s.discrepancy;
        } else {
            g.stride = std::max(g.stride, traj.times[i] - traj.times[i - 1]);
        }

        if (s.discrepancy <= equilibrium_tol) {
            s.at_equilibrium = true;
            g.equilibrium_reached = true;
        } else {
            const double r2 = r.squaredNorm();
            s.ratio_lambda = s.opinion_speed * s.opinion_speed / r2;
            s.ratio_mu = frob / r2;
            s.ratio_mu_weighted = weighted / r2;
            g.max_mu_formula_gap = std::max(g.max_mu_formula_gap, std::abs(frob - weighted) / std::max(frob, 1e-300));
            g.lambda_eff = std::min(g.lambda_eff, s.ratio_lambda);
            g.mu_eff = std::min(g.mu_eff, s.ratio_mu);
            any_defined = true;
        }
        g.samples.push_back(s);
    }
    if (!any_defined) {
        g.undefined = true;
        g.lambda_eff = 0.0;
        g.mu_eff = 0.0;
    }
    return g;
}

BoundReport check_structural_stagnation(const JointTrajectory& traj, const GapEstimate& gaps)
{
    const auto& sys = traj.system;
    BoundReport rep;
    rep.observed = (sys.maps_part(traj.final_state()) - sys.maps_part(traj.states.front())).norm();
    rep.bound_constant = gaps.b_x;
    rep.gap = gaps.lambda_eff;
    rep.horizon = gaps.horizon;
    rep.initial_discrepancy = gaps.initial_discrepancy;

    if (gaps.undefined || gaps.initial_discrepancy == 0.0) {
        // Equilibrium from the start: zero displacement satisfies any bound.
        rep.applicable = true;
        rep.reason = "trajectory is at equilibrium";
        rep.premise_holds = true;
        rep.slack = -rep.observed;
        return rep;
    }
    if (!(gaps.lambda_eff > 0.0)) {
        rep.reason = "effective opinion gap is zero on the sampled window; bound inapplicable";
        return rep;
    }
    rep.applicable = true;
    const double k = traj.alpha * gaps.lambda_eff;
    const double c = traj.beta * gaps.b_x * gaps.initial_discrepancy;
    rep.bound = c * saturating(k, gaps.horizon);
    rep.bound_limit = k > 0 ? c / k : std::numeric_limits<double>::infinity();
    rep.slack = rep.bound - rep.observed;
    const DecayCheck decay = check_decay(gaps, k);
    rep.premise_holds = decay.holds;
    rep.premise_worst_ratio = decay.worst;

    std::vector<double> ratios;
    for (const auto& s : gaps.samples) {
        if (!s.at_equilibrium) {
            ratios.push_back(s.ratio_lambda);
        }
    }
    if (k > 0 && nonincreasing(ratios)) {
        const double delta = gaps.samples.back().opinion_speed;
        rep.conditional_bound = traj.beta * gaps.b_x / k * (gaps.initial_discrepancy - delta / std::sqrt(gaps.lambda_eff));
    }
    return rep;
}

BoundReport check_opinion_stagnation(const JointTrajectory& traj, const GapEstimate& gaps)
{
    const auto& sys = traj.system;
    BoundReport rep;
    rep.observed = (sys.opinion(traj.final_state()) - sys.opinion(traj.states.front())).norm();
    rep.bound_constant = gaps.b_delta;
    rep.gap = gaps.mu_eff;
    rep.horizon = gaps.horizon;
    rep.initial_discrepancy = gaps.initial_discrepancy;

    if (gaps.undefined || gaps.initial_discrepancy == 0.0) {
        rep.applicable = true;
        rep.reason = "trajectory is at equilibrium";
        rep.premise_holds = true;
        rep.slack = -rep.observed;
        return rep;
    }
    if (!(gaps.mu_eff > 0.0)) {
        rep.reason = "effective structure gap is zero on the sampled window; bound inapplicable "
                     "(use the regularized flow for an unconditional bound)";
        return rep;
    }
    rep.applicable = true;
    const double k = traj.beta * gaps.mu_eff;
    const double c = traj.alpha * gaps.b_delta * gaps.initial_discrepancy;
    rep.bound = c * saturating(k, gaps.horizon);
    rep.bound_limit = k > 0 ? c / k : std::numeric_limits<double>::infinity();
    rep.slack = rep.bound - rep.observed;
    const DecayCheck decay = check_decay(gaps, k);
    rep.premise_holds = decay.holds;
    rep.premise_worst_ratio = decay.worst;

    std::vector<double> ratios;
    for (const auto& s : gaps.samples) {
        if (!s.at_equilibrium) {
            ratios.push_back(s.ratio_mu);
        }
    }
    if (k > 0 && nonincreasing(ratios)) {
        const double delta = gaps.samples.back().structure_speed;
        rep.conditional_bound = traj.alpha * gaps.b_delta / k * (gaps.initial_discrepancy - delta / std::sqrt(gaps.mu_eff));
    }
    return rep;
}

RegimeThresholds regime_thresholds(double epsilon, double lambda_eff, double mu_eff, double b_x, double b_delta,
                                   double initial_discrepancy)
{
    if (!(epsilon > 0.0)) {
        throw ParameterError("regime_thresholds: epsilon must be positive");
    }
    if (!(lambda_eff > 0.0) || !(mu_eff > 0.0)) {
        throw ParameterError("regime_thresholds: both effective gaps must be positive");
    }
    if (!(b_x > 0.0) || !(b_delta > 0.0) || !(initial_discrepancy > 0.0)) {
        throw ParameterError("regime_thresholds: B_x, B_delta and the initial discrepancy must be positive");
    }
    RegimeThresholds t;
    t.rho_minus = epsilon * lambda_eff / (b_x * initial_discrepancy);
    t.rho_plus = b_delta * initial_discrepancy / (epsilon * mu_eff);
    t.ordering_condition =
        epsilon * epsilon < b_x * b_delta * initial_discrepancy * initial_discrepancy / (lambda_eff * mu_eff);
    return t;
}

} // namespace opsheaf
