#include "fixtures.hpp"
#include "generators.hpp"

#include <opsheaf/errors.hpp>
#include <opsheaf/free_opinions.hpp>
#include <opsheaf/model_io.hpp>

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

using namespace opsheaf;
using namespace opsheaf::testing;

namespace {

Model fig2()
{
    return load_model(OPSHEAF_MODELS_DIR "/fig2.model");
}

Vector sorted_eigenvalues(const Matrix& m)
{
    if (m.rows() == 0) {
        return Vector();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    return es.eigenvalues();
}

// Minimizer of ||d x|| over {P_S x = u} from the dense KKT system.
Vector kkt_minimizer(const Sheaf& sheaf, const StubbornFrame& frame, const Vector& u)
{
    const Matrix l = laplacian(sheaf).matrix;
    const Matrix& is = frame.iota_s.matrix;
    const Eigen::Index n = l.rows();
    const Eigen::Index k = is.cols();
    Matrix kkt = Matrix::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = l;
    kkt.topRightCorner(n, k) = is;
    kkt.bottomLeftCorner(k, n) = is.transpose();
    Vector rhs = Vector::Zero(n + k);
    rhs.tail(k) = u;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    cod.setThreshold(1e-12);
    return cod.solve(rhs).head(n);
}

} // namespace

TEST_CASE("fig2 frame dimensions")
{
    const Model m = fig2();
    const StubbornSpec spec = m.stubborn_or_none();
    const StubbornFrame frame = build_frame(m.sheaf, spec);
    CHECK(frame.stubborn_dim() == 1);
    CHECK(frame.free_dim() == 5);
    CHECK(spec.stubborn_vertices() == std::vector<VertexIndex>{3});
}

TEST_CASE("empty spec leaves the Laplacian unchanged")
{
    const Sheaf s = fig1_sheaf();
    const BlockLaplacian b = build_free_sheaf(s, StubbornSpec::none(s)).blocks;
    CHECK(b.frame.stubborn_dim() == 0);
    CHECK((b.l_qq.matrix - laplacian(s).matrix).norm() < 1e-14);
    CHECK((b.reassembled() - b.ambient_laplacian).norm() < 1e-14);
}

TEST_CASE("fully stubborn vertex matches Dirichlet elimination")
{
    const Sheaf s = fig1_sheaf();
    const StubbornSpec spec = StubbornSpec::fully_stubborn(s, {1}, fig1_initial());
    const BlockLaplacian b = build_free_sheaf(s, spec).blocks;
    CHECK(b.frame.stubborn_dim() == 2);

    const Matrix l = laplacian(s).matrix;
    const std::vector<Eigen::Index> keep{0, 3, 4, 5};
    Matrix dirichlet(4, 4);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            dirichlet(i, j) = l(keep[i], keep[j]);
        }
    }
    CHECK((sorted_eigenvalues(b.l_qq.matrix) - sorted_eigenvalues(dirichlet)).norm() < 1e-12);

    // Harmonic extension from the eliminated system.
    Matrix l_ku(4, 2);
    for (int i = 0; i < 4; ++i) {
        l_ku(i, 0) = l(keep[i], 1);
        l_ku(i, 1) = l(keep[i], 2);
    }
    const Vector u = spec.packed_values();
    const Vector y0 = b.frame.free_part(fig1_initial().values);
    const PoissonSolution sol = solve_poisson(b, u, y0);
    const Vector harmonic = pinv_apply(dirichlet, -l_ku * fig1_initial().values.segment(1, 2));
    Vector expected_free(4);
    for (int i = 0; i < 4; ++i) {
        expected_free(i) = sol.x_inf(keep[i]);
    }
    CHECK(dirichlet.fullPivLu().rank() == 4);
    CHECK((expected_free - harmonic).norm() < 1e-10);
}

TEST_CASE("fig2 Poisson solution")
{
    const Model m = fig2();
    const StubbornSpec spec = m.stubborn_or_none();
    const BlockLaplacian b = build_free_sheaf(m.sheaf, spec).blocks;
    const Vector y0 = b.frame.free_part(m.require_opinion("fig2").values);
    const PoissonSolution sol = solve_poisson(b, spec.packed_values(), y0);
    const Vector expected = (Vector(6) << 1.25, 0, -1.25, -1.25, 1, -0.25).finished();
    CHECK((sol.x_inf - expected).norm() < 1e-12);
    CHECK(sol.formula_spread < 1e-12);
    const Cochain1 r = coboundary(m.sheaf, Cochain0{sol.x_inf});
    CHECK(r.values.head(3).norm() < 1e-12);
    CHECK(std::abs(std::abs(r.values(4)) - 1.0) < 1e-12);
    CHECK(std::abs(r.values(3)) < 1e-12);
    CHECK(disagreement_energy(m.sheaf, Cochain0{sol.x_inf}) == doctest::Approx(0.5).epsilon(1e-12));

    const CompatibilityResult c = compatibility_obstruction(m.sheaf, spec);
    CHECK_FALSE(c.compatible);
    CHECK(c.obstruction_residual * c.obstruction_residual == doctest::Approx(1.0).epsilon(1e-12));

    const ConstrainedTrajectory tr = constrained_diffuse(b, spec.packed_values(), y0, 1.0);
    CHECK(tr.free.converged());
    CHECK((tr.total.back() - sol.x_inf).norm() < 1e-6);
    CHECK(tr.free.energy_nonincreasing(1e-12));
}

TEST_CASE("homogeneous problem projects onto the free kernel")
{
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Sheaf s = random_sheaf(rng);
        StubbornSpec spec = random_stubborn(rng, s, 0.5);
        for (auto& u : spec.values) {
            u.setZero();
        }
        const BlockLaplacian b = build_free_sheaf(s, spec).blocks;
        const Vector y0 = gaussian_vector(rng, b.frame.free_dim());
        const PoissonSolution sol = solve_poisson(b, spec.packed_values(), y0);
        const Matrix ker = null_space(b.l_qq.matrix);
        const Vector proj = ker * (ker.transpose() * y0);
        CHECK((sol.y_inf - proj).norm() <= 1e-9 * std::max(1.0, y0.norm()));
    }
}

TEST_CASE("Poisson limit agrees with the KKT oracle")
{
    Rng rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const Sheaf s = random_sheaf(rng);
        const StubbornSpec spec = random_stubborn(rng, s, 0.4, trial % 2 == 0);
        const BlockLaplacian b = build_free_sheaf(s, spec).blocks;
        const Vector u = spec.packed_values();
        const Vector y0 = gaussian_vector(rng, b.frame.free_dim());
        const PoissonSolution sol = solve_poisson(b, u, y0);

        const Vector x_kkt = kkt_minimizer(s, b.frame, u);
        const double e_kkt = disagreement_energy(s, Cochain0{x_kkt});
        const double e_sol = disagreement_energy(s, Cochain0{sol.x_inf});
        CHECK(std::abs(e_kkt - e_sol) <= 1e-9 * std::max(1.0, e_kkt));
        CHECK((b.frame.stubborn_part(sol.x_inf) - u).norm() < 1e-12 * std::max(1.0, u.norm()));

        // y_inf - y0 is orthogonal to every admissible direction.
        const Matrix ker = null_space(b.l_qq.matrix);
        CHECK((ker.transpose() * (sol.y_inf - y0)).norm() <= 1e-9 * std::max(1.0, y0.norm()));

        // Variational condition P_Q L_F x_inf = 0.
        const double scale = std::max(1.0, b.ambient_laplacian.norm() * sol.x_inf.norm());
        CHECK(b.frame.free_part(b.ambient_laplacian * sol.x_inf).norm() <= 1e-9 * scale);

        const CompatibilityResult c = compatibility_obstruction(s, spec);
        CHECK(c.compatible == (e_kkt < 1e-12));
    }
}

TEST_CASE("minimal compromise among alternative Poisson solutions")
{
    Rng rng(5);
    int nontrivial = 0;
    for (int trial = 0; trial < 30; ++trial) {
        SheafShape shape;
        shape.max_edge_dim = 1;
        const Sheaf s = random_sheaf(rng, shape);
        const StubbornSpec spec = random_stubborn(rng, s, 0.3);
        const BlockLaplacian b = build_free_sheaf(s, spec).blocks;
        const Vector y0 = gaussian_vector(rng, b.frame.free_dim());
        const PoissonSolution sol = solve_poisson(b, spec.packed_values(), y0);
        const Matrix ker = null_space(b.l_qq.matrix);
        if (ker.cols() == 0) {
            continue;
        }
        ++nontrivial;
        const double best = (sol.y_inf - y0).norm();
        for (int k = 0; k < 10; ++k) {
            const Vector alt = sol.y_inf + ker * gaussian_vector(rng, ker.cols());
            CHECK(best <= (alt - y0).norm() + 1e-12);
        }
    }
    CHECK(nontrivial > 0);
}

TEST_CASE("constrained diffusion from an equilibrium stays put")
{
    const Model m = fig2();
    const StubbornSpec spec = m.stubborn_or_none();
    const BlockLaplacian b = build_free_sheaf(m.sheaf, spec).blocks;
    const Vector u = spec.packed_values();
    const PoissonSolution sol = solve_poisson(b, u, b.frame.free_part(m.require_opinion("fig2").values));
    FlowOptions opts;
    opts.t_end = 5.0;
    opts.convergence_tol = 0.0;
    const ConstrainedTrajectory tr = constrained_diffuse(b, u, sol.y_inf, 2.0, opts);
    for (const auto& y : tr.free.states) {
        CHECK((y - sol.y_inf).norm() < 1e-12);
    }
}

TEST_CASE("global sections give compatible clamps")
{
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const Sheaf s = random_sheaf(rng);
        const Matrix h0 = global_sections(s);
        if (h0.cols() == 0) {
            continue;
        }
        const Cochain0 x{h0 * gaussian_vector(rng, h0.cols())};
        StubbornSpec spec = random_stubborn(rng, s, 0.5);
        for (VertexIndex v = 0; v < s.graph().vertex_count(); ++v) {
            spec.values[v] = spec.basis[v].transpose() * s.vertex_block(x.values, v);
        }
        if (spec.packed_values().norm() < 1e-8 * x.values.norm()) {
            continue; // the section vanishes on S; u is round-off in an arbitrary direction
        }
        CHECK(compatibility_obstruction(s, spec).compatible);
        const BlockLaplacian b = build_free_sheaf(s, spec).blocks;
        const PoissonSolution sol = solve_poisson(b, spec.packed_values(), b.frame.free_part(x.values));
        CHECK(disagreement_energy(s, Cochain0{sol.x_inf}) < 1e-20 + 1e-12 * x.values.squaredNorm());
    }
}

TEST_CASE("stubborn spec validation")
{
    const Sheaf s = fig1_sheaf();
    StubbornSpec spec = StubbornSpec::none(s);
    spec.basis[1] = (Matrix(2, 1) << 1.0, 1.0).finished();
    spec.values[1] = Vector::Ones(1);
    CHECK_THROWS_AS(spec.validate(s), ValidationError);
    CHECK_THROWS_AS(build_frame(s, spec), ValidationError);

    spec.basis[1] = (Matrix(2, 1) << std::sqrt(0.5), std::sqrt(0.5)).finished();
    CHECK_NOTHROW(spec.validate(s));
    spec.values[1] = Vector::Ones(2);
    CHECK_THROWS_AS(spec.validate(s), ConformanceError);
    spec.basis.pop_back();
    CHECK_THROWS_AS(spec.validate(s), ConformanceError);
}

TEST_CASE("exact sequence edge cases")
{
    const Sheaf s = fig1_sheaf();
    const ExactSequenceReport none = exact_sequence_audit(s, StubbornSpec::none(s));
    CHECK(none.exact());
    CHECK(none.c0_stubborn == 0);
    CHECK(none.h0_free == none.h0_full);
    CHECK(none.h1_free == none.h1_full);

    const StubbornSpec all = StubbornSpec::fully_stubborn(s, {0, 1, 2, 3}, fig1_initial());
    const ExactSequenceReport full = exact_sequence_audit(s, all);
    CHECK(full.exact());
    CHECK(full.h0_free == 0);
    CHECK(full.h1_free == s.c1_dim());

    const Model m = fig2();
    const ExactSequenceReport r = exact_sequence_audit(m.sheaf, m.stubborn_or_none());
    CHECK(r.alternating_sum() == 0);
    CHECK(r.exact());
    CHECK(r.connecting_rank == 1);
}
