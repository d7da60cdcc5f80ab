#include <opsheaf/errors.hpp>
#include <opsheaf/joint_dynamics.hpp>

#include <doctest.h>

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <functional>

using namespace opsheaf;

namespace {

// First sign change of f from p0 in the given direction, polished by TOMS 748.
double first_root(const std::function<double(double)>& f, double p0, double direction)
{
    const double f0 = f(p0);
    double lo = p0;
    double step = 1e-3;
    for (int i = 0; i < 400; ++i) {
        const double hi = lo + direction * step;
        const double fh = f(hi);
        if (std::signbit(fh) != std::signbit(f0) || fh == 0.0) {
            std::uintmax_t iters = 200;
            const auto tol = boost::math::tools::eps_tolerance<double>(52);
            const auto [a, b] = direction > 0 ? boost::math::tools::toms748_solve(f, lo, hi, tol, iters)
                                              : boost::math::tools::toms748_solve(f, hi, lo, tol, iters);
            return 0.5 * (a + b);
        }
        lo = hi;
        step *= 1.1;
    }
    throw std::runtime_error("oracle: no bracket");
}

double sgn(double v)
{
    return v > 0 ? 1.0 : -1.0;
}

// Orbit of the shared (y, b) motion on the y > 0 sheet, parametrized by b.
struct Sheet {
    SingleEdgeState s0;
    double k() const { return s0.y * s0.y - s0.b * s0.b; }
    double y(double b) const { return std::sqrt(k() + b * b); }
    double phi(double b) const { return std::log(y(b) + b) - std::log(s0.y + s0.b); }
};

SingleEdgeState outreach_oracle(const SingleEdgeState& s0)
{
    const Sheet sh{s0};
    auto state = [&](double b) {
        SingleEdgeState s = s0;
        s.b = b;
        s.y = sh.y(b);
        s.a = s0.a + s0.s * sh.phi(b);
        s.xv = s0.xv - s0.c * sh.phi(b);
        return s;
    };
    const double b = first_root([&](double p) { return state(p).discrepancy(); }, s0.b, sgn(s0.y * s0.discrepancy()));
    return state(b);
}

SingleEdgeState universal_oracle(const SingleEdgeState& s0)
{
    const Sheet sh{s0};
    const double eps = s0.xv / s0.c;
    auto state = [&](double b) {
        SingleEdgeState s = s0;
        s.b = b;
        s.y = sh.y(b);
        s.a = s0.a + s0.s * sh.phi(b);
        s.c = s0.c * std::exp(-eps * (s.a - s0.a) / s0.s);
        s.xv = eps * s.c;
        return s;
    };
    const double b = first_root([&](double p) { return state(p).discrepancy(); }, s0.b, sgn(s0.y * s0.discrepancy()));
    return state(b);
}

SingleEdgeState accommodation_oracle(const SingleEdgeState& s0)
{
    const double eps = s0.xv / s0.c;
    auto state = [&](double p) {
        SingleEdgeState s = s0;
        s.c = s0.c * std::exp(p);
        s.xv = eps * s.c;
        s.y = s0.y - eps * s0.b * p;
        return s;
    };
    const double p = first_root([&](double q) { return state(q).discrepancy(); }, 0.0, -eps * sgn(s0.discrepancy()));
    return state(p);
}

void check_close(const SingleEdgeState& got, const SingleEdgeState& want, double tol)
{
    CHECK(got.y == doctest::Approx(want.y).epsilon(tol).scale(1.0));
    CHECK(got.xv == doctest::Approx(want.xv).epsilon(tol).scale(1.0));
    CHECK(got.a == doctest::Approx(want.a).epsilon(tol).scale(1.0));
    CHECK(got.b == doctest::Approx(want.b).epsilon(tol).scale(1.0));
    CHECK(got.c == doctest::Approx(want.c).epsilon(tol).scale(1.0));
}

} // namespace

TEST_CASE("structural stubbornness projects onto the consensus line")
{
    const SingleEdgeEquilibrium eq = single_edge_equilibrium(EdgePolicy::StructuralStubbornness, {});
    CHECK(eq.state.y == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(eq.state.xv == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(std::abs(eq.state.discrepancy()) < 1e-15);
    CHECK(eq.state.c * eq.state.y + eq.state.b * eq.state.xv == doctest::Approx(1.0 * 1.0 + 0.5 * -1.0));
}

TEST_CASE("accommodation root matches TOMS 748")
{
    const auto f = [](double c) { return std::log(c) + 4 * c * c + 4; };
    std::uintmax_t iters = 200;
    const auto [lo, hi] =
        boost::math::tools::toms748_solve(f, 1e-6, 1.0, boost::math::tools::eps_tolerance<double>(52), iters);
    const SingleEdgeEquilibrium eq = single_edge_equilibrium(EdgePolicy::Accommodation, {});
    CHECK(std::abs(eq.state.c - 0.5 * (lo + hi)) < 1e-10);
    CHECK(std::abs(eq.state.discrepancy()) < 1e-12);
    CHECK(eq.state.y == doctest::Approx(1.0 + 0.5 * std::log(eq.state.c)).epsilon(1e-12));
    CHECK(eq.state.y == doctest::Approx(-1.0007).epsilon(1e-4));
    check_close(eq.state, accommodation_oracle({}), 1e-10);
}

TEST_CASE("outreach and universal adaptation on the b < 0 branch")
{
    const SingleEdgeEquilibrium out = single_edge_equilibrium(EdgePolicy::Outreach, {});
    CHECK(out.state.b < 0.0);
    CHECK(out.state.y == doctest::Approx(0.88).epsilon(0.01));
    CHECK(out.state.xv == doctest::Approx(-0.31).epsilon(0.05));
    CHECK(out.state.y * out.state.y - out.state.b * out.state.b == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(out.state.xv + out.state.a == doctest::Approx(-0.5).epsilon(1e-12));
    check_close(out.state, outreach_oracle({}), 1e-10);

    const SingleEdgeEquilibrium uni = single_edge_equilibrium(EdgePolicy::UniversalAdaptation, {});
    CHECK(uni.state.b < 0.0);
    CHECK(uni.state.c == doctest::Approx(std::exp(uni.state.a - 0.5)).epsilon(1e-12));
    CHECK(uni.state.expressed() == doctest::Approx(-0.26).epsilon(0.05));
    check_close(uni.state, universal_oracle({}), 1e-10);
}

TEST_CASE("other compatible data")
{
    const SingleEdgeState data[] = {
        {2.0, 0.5, 1.5, 0.3, -0.2, 1.5},
        {1.0, 2.0, -0.7, -0.4, 1.1, 0.7},
        {0.5, 1.2, 0.9, 1.0, 0.3, -0.9},
    };
    for (const auto& s0 : data) {
        check_close(single_edge_equilibrium(EdgePolicy::Outreach, s0).state, outreach_oracle(s0), 1e-9);
        check_close(single_edge_equilibrium(EdgePolicy::UniversalAdaptation, s0).state, universal_oracle(s0), 1e-9);
        check_close(single_edge_equilibrium(EdgePolicy::Accommodation, s0).state, accommodation_oracle(s0), 1e-9);
        CHECK(std::abs(single_edge_equilibrium(EdgePolicy::StructuralStubbornness, s0).state.discrepancy()) < 1e-14);
    }
}

TEST_CASE("closed forms agree with the integrated flow")
{
    const SingleEdgeState init;
    const SingleEdgeModel m = single_edge_model(init);
    JointOptions o;
    o.t_end = 2000.0;
    o.rtol = 1e-11;
    o.atol = 1e-13;
    o.convergence_tol = 1e-12;
    for (EdgePolicy p : {EdgePolicy::StructuralStubbornness, EdgePolicy::Outreach, EdgePolicy::UniversalAdaptation}) {
        const ScenarioPolicy pol{{{0, p}}};
        const AdaptationSpec adapt = compile_policy(m.sheaf.graph(), m.spec, pol, AdaptationSpec::none(m.sheaf.graph()));
        const JointTrajectory tr = joint_flow(JointSystem(m.sheaf, m.spec, adapt), m.x, 1.0, 1.0, o);
        const Vector x = tr.opinion(tr.states.size() - 1);
        const SingleEdgeState eq = single_edge_equilibrium(p, init).state;
        CHECK(x(1) == doctest::Approx(eq.y).epsilon(1e-6).scale(1.0));
        CHECK(x(2) == doctest::Approx(eq.xv).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("data outside the closed-form family")
{
    SingleEdgeState mismatched;
    mismatched.xv = -2.0;
    CHECK_THROWS_AS(single_edge_equilibrium(EdgePolicy::Accommodation, mismatched), NumericalError);
    CHECK_THROWS_AS(single_edge_equilibrium(EdgePolicy::UniversalAdaptation, mismatched), NumericalError);

    SingleEdgeState degenerate;
    degenerate.b = degenerate.y;
    CHECK_THROWS_AS(single_edge_equilibrium(EdgePolicy::Outreach, degenerate), NumericalError);

    SingleEdgeState balanced;
    balanced.xv = 1.0; // c x_v = a s + b y already
    const SingleEdgeEquilibrium eq = single_edge_equilibrium(EdgePolicy::StructuralStubbornness, balanced);
    CHECK(eq.state.y == balanced.y);
    CHECK(eq.state.xv == balanced.xv);
}
