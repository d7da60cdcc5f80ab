#include "opsheaf/ode.hpp"

#include "opsheaf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace opsheaf::ode {

std::string_view to_string(Status status)
{
    switch (status) {
    case Status::Converged: return "converged";
    case Status::ReachedEnd: return "reached-end";
    case Status::Diverged: return "diverged";
    case Status::StepLimit: return "step-limit";
    case Status::StepUnderflow: return "step-underflow";
    }
    return "unknown";
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double scaled_rms(const Vector& v, const Vector& y_a, const Vector& y_b, const Options& opt)
{
    if (v.size() == 0) {
        return 0.0;
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y_a[i]), std::abs(y_b[i]));
        const double r = v[i] / sc;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
}

double initial_step(const Rhs& rhs, double t0, const Vector& y0, const Vector& f0, const Options& opt,
                    std::size_t& evals)
{
    const double d0 = scaled_rms(y0, y0, y0, opt);
    const double d1 = scaled_rms(f0, y0, y0, opt);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, opt.t_end - t0);
    Vector y1 = y0 + h0 * f0;
    Vector f1(y0.size());
    rhs(t0 + h0, y1, f1);
    ++evals;
    const double d2 = scaled_rms(f1 - f0, y0, y0, opt) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
    return std::min(100.0 * h0, h1);
}

} // namespace

Solution integrate(const Rhs& rhs, const Vector& y0, const Options& opt, const Guard& guard)
{
    if (!(opt.t_end >= 0.0) || !(opt.rtol > 0.0) || !(opt.atol > 0.0)) {
        throw ParameterError("ode: t_end must be >= 0 and tolerances > 0");
    }

    Solution sol;
    const Eigen::Index n = y0.size();
    double t = 0.0;
    Vector y = y0;
    Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);

    rhs(t, y, k1);
    ++sol.rhs_evaluations;

    auto record = [&](double time, const Vector& state) {
        if (!sol.times.empty() && sol.times.back() == time) {
            sol.states.back() = state;
            return;
        }
        sol.times.push_back(time);
        sol.states.push_back(state);
    };
    record(t, y);
    sol.final_velocity_norm = k1.norm();

    if (guard) {
        if (auto msg = guard(t, y)) {
            sol.status = Status::Diverged;
            sol.message = *msg;
            return sol;
        }
    }
    const bool convergence_enabled = opt.convergence_tol > 0.0;
    int quiet_steps = 0;
    if (convergence_enabled && sol.final_velocity_norm < opt.convergence_tol) {
        if (++quiet_steps >= opt.convergence_steps) {
            sol.status = Status::Converged;
            return sol;
        }
    }
    if (n == 0) {
        sol.status = Status::Converged;
        return sol;
    }
    if (opt.t_end == 0.0) {
        sol.status = Status::ReachedEnd;
        return sol;
    }

    const bool sample_every_step = !(opt.sample_interval > 0.0);
    std::size_t next_sample_index = 1;
    auto next_sample_time = [&]() {
        if (sample_every_step) {
            return opt.t_end;
        }
        return std::min(opt.t_end, static_cast<double>(next_sample_index) * opt.sample_interval);
    };

    double h = opt.initial_step > 0.0 ? opt.initial_step
                                      : initial_step(rhs, t, y, k1, opt, sol.rhs_evaluations);
    h = std::min(h, opt.max_step);
    bool last_rejected = false;

    while (true) {
        const double target = next_sample_time();
        bool landing = false;
        double h_try = h;
        if (t + h_try >= target || target - (t + h_try) < 1e-12 * std::max(1.0, std::abs(target))) {
            h_try = target - t;
            landing = true;
        }
        if (h_try <= 1e-14 * std::max(1.0, std::abs(t))) {
            if (landing) {
                // Already at the target up to round-off.
                t = target;
                h_try = 0.0;
            } else {
                sol.status = Status::StepUnderflow;
                sol.message = "step size underflow at t = " + std::to_string(t);
                break;
            }
        }

        if (h_try > 0.0) {
            ytmp = y + h_try * a21 * k1;
            rhs(t + c2 * h_try, ytmp, k2);
            ytmp = y + h_try * (a31 * k1 + a32 * k2);
            rhs(t + c3 * h_try, ytmp, k3);
            ytmp = y + h_try * (a41 * k1 + a42 * k2 + a43 * k3);
            rhs(t + c4 * h_try, ytmp, k4);
            ytmp = y + h_try * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            rhs(t + c5 * h_try, ytmp, k5);
            ytmp = y + h_try * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            rhs(t + h_try, ytmp, k6);
            ynew = y + h_try * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            rhs(t + h_try, ynew, k7);
            sol.rhs_evaluations += 6;

            err = h_try * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double err_norm = scaled_rms(err, y, ynew, opt);
            if (!std::isfinite(err_norm)) {
                ++sol.rejected_steps;
                h = 0.25 * h_try;
                last_rejected = true;
                continue;
            }
            if (err_norm > 1.0) {
                ++sol.rejected_steps;
                const double fac = std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
                h = h_try * fac;
                last_rejected = true;
                continue;
            }

            ++sol.accepted_steps;
            t = landing ? target : t + h_try;
            y.swap(ynew);
            k1.swap(k7);
            double fac = err_norm == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(err_norm, -0.2)));
            if (last_rejected) {
                fac = std::min(fac, 1.0);
            }
            last_rejected = false;
            const double proposal = std::min(opt.max_step, h_try * fac);
            // A step shortened only to land on a sample should not shrink the controller state.
            h = landing ? std::max(h, proposal) : proposal;
            h = std::min(h, opt.max_step);
        }

        sol.final_velocity_norm = k1.norm();
        if (sample_every_step || landing) {
            record(t, y);
            if (landing && !sample_every_step) {
                ++next_sample_index;
            }
        }

        if (guard) {
            if (auto msg = guard(t, y)) {
                record(t, y);
                sol.status = Status::Diverged;
                sol.message = *msg;
                return sol;
            }
        }
        if (convergence_enabled && sol.final_velocity_norm < opt.convergence_tol) {
            if (++quiet_steps >= opt.convergence_steps) {
                record(t, y);
                sol.status = Status::Converged;
                return sol;
            }
        } else {
            quiet_steps = 0;
        }
        if (t >= opt.t_end) {
            record(t, y);
            sol.status = Status::ReachedEnd;
            return sol;
        }
        if (sol.accepted_steps >= opt.max_steps) {
            record(t, y);
            sol.status = Status::StepLimit;
            sol.message = "accepted-step limit reached at t = " + std::to_string(t);
            return sol;
        }
    }
    record(t, y);
    return sol;
}

} // namespace opsheaf::ode
