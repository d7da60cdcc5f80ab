#include <opsheaf/errors.hpp>
#include <opsheaf/ode.hpp>

#include <doctest.h>

#include <cmath>

using namespace opsheaf;

namespace {

ode::Rhs decay(double rate)
{
    return [rate](double, const Vector& y, Vector& dy) { dy = -rate * y; };
}

} // namespace

TEST_CASE("exponential decay matches the exact solution on the sample grid")
{
    ode::Options o;
    o.t_end = 5.0;
    o.sample_interval = 0.5;
    o.rtol = 1e-10;
    o.atol = 1e-12;
    o.convergence_tol = 0;
    const auto sol = ode::integrate(decay(1.3), Vector::Constant(1, 2.0), o);
    CHECK(sol.status == ode::Status::ReachedEnd);
    REQUIRE(sol.times.size() == 11);
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        CHECK(sol.times[i] == doctest::Approx(0.5 * static_cast<double>(i)).epsilon(1e-14));
        CHECK(sol.states[i][0] == doctest::Approx(2.0 * std::exp(-1.3 * sol.times[i])).epsilon(1e-8));
    }
}

TEST_CASE("velocity-based stopping")
{
    ode::Options o;
    o.t_end = 1000.0;
    o.convergence_tol = 1e-9;
    o.convergence_steps = 3;
    const auto sol = ode::integrate(decay(1.0), Vector::Constant(2, 1.0), o);
    CHECK(sol.status == ode::Status::Converged);
    CHECK(sol.final_velocity_norm < 1e-9);
    CHECK(sol.final_time() < 100.0);
}

TEST_CASE("a state at rest converges immediately")
{
    ode::Options o;
    o.convergence_steps = 1;
    const auto sol = ode::integrate(decay(1.0), Vector::Zero(3), o);
    CHECK(sol.status == ode::Status::Converged);
    CHECK(sol.times.size() == 1);
}

TEST_CASE("guard aborts with a message")
{
    ode::Options o;
    o.t_end = 10;
    o.convergence_tol = 0;
    const auto grow = [](double, const Vector& y, Vector& dy) { dy = y; };
    const auto guard = [](double, const Vector& y) -> std::optional<std::string> {
        if (y.norm() > 100) return "ceiling";
        return std::nullopt;
    };
    const auto sol = ode::integrate(grow, Vector::Constant(1, 1.0), o, guard);
    CHECK(sol.status == ode::Status::Diverged);
    CHECK(sol.message == "ceiling");
    CHECK(sol.final_state()[0] > 100);
}

TEST_CASE("step limit")
{
    ode::Options o;
    o.t_end = 100;
    o.max_steps = 5;
    o.max_step = 0.01;
    o.convergence_tol = 0;
    const auto sol = ode::integrate(decay(1.0), Vector::Constant(1, 1.0), o);
    CHECK(sol.status == ode::Status::StepLimit);
    CHECK(sol.accepted_steps == 5);
}

TEST_CASE("zero horizon and bad tolerances")
{
    ode::Options o;
    o.t_end = 0;
    o.convergence_tol = 0;
    CHECK(ode::integrate(decay(1.0), Vector::Constant(1, 1.0), o).status == ode::Status::ReachedEnd);
    o.rtol = 0;
    CHECK_THROWS_AS(ode::integrate(decay(1.0), Vector::Constant(1, 1.0), o), ParameterError);
}

TEST_CASE("harmonic oscillator keeps its energy to tolerance")
{
    ode::Options o;
    o.t_end = 20;
    o.rtol = 1e-11;
    o.atol = 1e-13;
    o.convergence_tol = 0;
    o.sample_interval = 0;
    const auto osc = [](double, const Vector& y, Vector& dy) {
        dy.resize(2);
        dy << y[1], -y[0];
    };
    const auto sol = ode::integrate(osc, (Vector(2) << 1, 0).finished(), o);
    CHECK(sol.times.size() > 20);
    CHECK(sol.final_state().norm() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sol.final_state()[0] == doctest::Approx(std::cos(20.0)).epsilon(1e-7));
}
