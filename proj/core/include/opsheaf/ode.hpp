#pragma once

#include "opsheaf/linalg.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/// Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4), FSAL)
/// with a fixed sampling grid and a velocity-based stopping rule.
namespace opsheaf::ode {

enum class Status {
    Converged,     ///< velocity norm fell below the convergence threshold
    ReachedEnd,    ///< t_end reached before convergence
    Diverged,      ///< the guard callback aborted the run
    StepLimit,     ///< max_steps accepted steps exhausted
    StepUnderflow, ///< step size collapsed below round-off
};

std::string_view to_string(Status status);

struct Options {
    double t_end = 100.0;
    /// Spacing of the recorded samples; <= 0 records every accepted step.
    double sample_interval = 0.1;
    double rtol = 1e-8;
    double atol = 1e-10;
    /// Converged once ||dy/dt|| < convergence_tol for convergence_steps
    /// consecutive accepted steps. <= 0 disables the test.
    double convergence_tol = 1e-10;
    int convergence_steps = 1;
    std::size_t max_steps = 20'000'000;
    double initial_step = 0.0;
    double max_step = std::numeric_limits<double>::infinity();
};

using Rhs = std::function<void(double t, const Vector& y, Vector& dydt)>;

/// Returns a message when the state is unacceptable (e.g. a divergence
/// ceiling was crossed); the integration then stops with Status::Diverged.
using Guard = std::function<std::optional<std::string>(double t, const Vector& y)>;

struct Solution {
    std::vector<double> times;
    std::vector<Vector> states;
    Status status = Status::ReachedEnd;
    double final_velocity_norm = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t rhs_evaluations = 0;
    std::string message;

    [[nodiscard]] const Vector& final_state() const { return states.back(); }
    [[nodiscard]] double final_time() const { return times.back(); }
};

Solution integrate(const Rhs& rhs, const Vector& y0, const Options& options, const Guard& guard = {});

} // namespace opsheaf::ode
