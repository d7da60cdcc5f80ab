#include "opsheaf/errors.hpp"
#include "opsheaf/joint_dynamics.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace opsheaf {

namespace {

// The closed forms below parametrize the single-edge orbit by one scalar p
// (p = p0 at t = 0) and reduce the equilibrium to the first zero of the
// discrepancy d(p) in the direction of motion.
struct Orbit {
    std::function<SingleEdgeState(double)> at;
    double p0 = 0.0;
    double direction = 0.0;
};

SingleEdgeEquilibrium first_zero(const Orbit& orbit, const SingleEdgeState& init, const char* scenario)
{
    const double d0 = init.discrepancy();
    if (d0 == 0.0 || orbit.direction == 0.0) {
        return {init, 0, 0.0};
    }
    auto f = [&](double p) { return orbit.at(p).discrepancy(); };

    const double unit = 1e-3 * std::max(1.0, std::abs(orbit.p0));
    double lo = orbit.p0;
    double hi = orbit.p0;
    double step = unit;
    bool bracketed = false;
    int iterations = 0;
    for (; iterations < 400; ++iterations) {
        hi = lo + orbit.direction * step;
        const double fh = f(hi);
        if (!std::isfinite(fh)) {
            break;
        }
        if (fh == 0.0 || std::signbit(fh) != std::signbit(d0)) {
            bracketed = true;
            break;
        }
        lo = hi;
        step *= 1.25;
    }
    if (!bracketed) {
        throw NumericalError(std::string("single-edge ") + scenario + ": no sign change of the discrepancy along the orbit (searched p in ["
                             + std::to_string(std::min(orbit.p0, lo)) + ", " + std::to_string(std::max(orbit.p0, lo))
                             + "], d0 = " + std::to_string(d0) + ")");
    }
    for (int k = 0; k < 200; ++k, ++iterations) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) {
            break;
        }
        const double fm = f(mid);
        if (fm == 0.0) {
            lo = hi = mid;
            break;
        }
        (std::signbit(fm) == std::signbit(d0) ? lo : hi) = mid;
        if (std::abs(hi - lo) <= 1e-15 * std::max(1.0, std::abs(mid))) {
            break;
        }
    }
    const double root = 0.5 * (lo + hi);
    return {orbit.at(root), iterations, std::abs(hi - lo)};
}

// Shared (y, b) motion: dy = b d, db = y d, da = s d, with y^2 - b^2 = K.
// phi(p) is the integral of d dt along the orbit, so a = a0 + s phi and
// x_v (when c is frozen) = x_v0 - c phi.
struct HyperbolaOrbit {
    std::function<void(double, double&, double&, double&)> yb_phi; ///< p -> y, b, phi
    double p0 = 0.0;
    double direction = 0.0;
};

HyperbolaOrbit hyperbola(const SingleEdgeState& s0, const char* scenario)
{
    const double k = s0.y * s0.y - s0.b * s0.b;
    const double scale = std::max(1.0, s0.y * s0.y + s0.b * s0.b);
    const double d0 = s0.discrepancy();
    HyperbolaOrbit h;
    if (k > 1e-14 * scale) {
        const double rk = std::sqrt(k);
        const double ys = s0.y > 0 ? 1.0 : -1.0;
        const double base = std::asinh(s0.b / rk);
        h.p0 = s0.b;
        h.direction = ys * (d0 > 0 ? 1.0 : -1.0);
        h.yb_phi = [=](double b, double& y, double& bb, double& phi) {
            y = ys * std::sqrt(k + b * b);
            bb = b;
            phi = ys * (std::asinh(b / rk) - base);
        };
    } else if (k < -1e-14 * scale) {
        const double rk = std::sqrt(-k);
        const double bs = s0.b > 0 ? 1.0 : -1.0;
        const double base = std::asinh(s0.y / rk);
        h.p0 = s0.y;
        h.direction = bs * (d0 > 0 ? 1.0 : -1.0);
        h.yb_phi = [=](double y, double& yy, double& b, double& phi) {
            yy = y;
            b = bs * std::sqrt(y * y - k);
            phi = bs * (std::asinh(y / rk) - base);
        };
    } else {
        throw NumericalError(std::string("single-edge ") + scenario
                             + ": y^2 = b^2 initially; the degenerate orbit is not handled by the closed form");
    }
    return h;
}

double matched_sign(const SingleEdgeState& s0, const char* scenario)
{
    if (s0.c == 0.0 || std::abs(std::abs(s0.xv) - std::abs(s0.c)) > 1e-12 * std::max(1.0, std::abs(s0.c))) {
        throw NumericalError(std::string("single-edge ") + scenario
                             + ": closed form needs |x_v| = |c| != 0 initially (conserved x_v^2 - c^2 = 0)");
    }
    return s0.xv / s0.c;
}

} // namespace

SingleEdgeEquilibrium single_edge_equilibrium(EdgePolicy scenario, const SingleEdgeState& init)
{
    const double d0 = init.discrepancy();
    switch (scenario) {
    case EdgePolicy::StructuralStubbornness: {
        // Gradient flow in (y, x_v) onto the line c x_v - b y = a s.
        const double nn = init.b * init.b + init.c * init.c;
        if (nn == 0.0) {
            return {init, 0, 0.0};
        }
        const double t = d0 / nn;
        SingleEdgeState out = init;
        out.y = init.y + init.b * t;
        out.xv = init.xv - init.c * t;
        return {out, 0, 0.0};
    }
    case EdgePolicy::Accommodation: {
        // x_v = eps c, c = c0 e^p, y = y0 - eps b p.
        const double eps = matched_sign(init, "accommodation");
        Orbit orbit;
        orbit.p0 = 0.0;
        orbit.direction = -eps * (d0 > 0 ? 1.0 : -1.0);
        orbit.at = [=](double p) {
            SingleEdgeState s = init;
            s.c = init.c * std::exp(p);
            s.xv = eps * s.c;
            s.y = init.y - eps * init.b * p;
            return s;
        };
        return first_zero(orbit, init, "accommodation");
    }
    case EdgePolicy::Outreach: {
        const HyperbolaOrbit h = hyperbola(init, "outreach");
        Orbit orbit;
        orbit.p0 = h.p0;
        orbit.direction = h.direction;
        orbit.at = [=](double p) {
            SingleEdgeState s = init;
            double phi = 0.0;
            h.yb_phi(p, s.y, s.b, phi);
            s.a = init.a + init.s * phi;
            s.xv = init.xv - init.c * phi;
            return s;
        };
        return first_zero(orbit, init, "outreach");
    }
    case EdgePolicy::UniversalAdaptation: {
        const double eps = matched_sign(init, "universal adaptation");
        const HyperbolaOrbit h = hyperbola(init, "universal adaptation");
        Orbit orbit;
        orbit.p0 = h.p0;
        orbit.direction = h.direction;
        orbit.at = [=](double p) {
            SingleEdgeState s = init;
            double phi = 0.0;
            h.yb_phi(p, s.y, s.b, phi);
            s.a = init.a + init.s * phi;
            s.c = init.c * std::exp(-eps * phi);
            s.xv = eps * s.c;
            return s;
        };
        return first_zero(orbit, init, "universal adaptation");
    }
    }
    throw ValidationError("single-edge: unknown scenario");
}

SingleEdgeModel single_edge_model(const SingleEdgeState& init)
{
    Graph g({"u", "v"}, {Edge{"e", 0, 1}});
    Matrix fu(1, 2);
    fu << init.a, init.b;
    Matrix fv(1, 1);
    fv << init.c;
    Sheaf sheaf(std::move(g), {2, 1}, {1}, {fu}, {fv});
    StubbornSpec spec = StubbornSpec::none(sheaf);
    spec.basis[0] = Matrix::Identity(2, 1);
    spec.values[0] = Vector::Constant(1, init.s);
    Vector xu(2);
    xu << init.s, init.y;
    Cochain0 x = make_cochain0(sheaf, {xu, Vector::Constant(1, init.xv)});
    return {std::move(sheaf), std::move(spec), std::move(x)};
}

} // namespace opsheaf
