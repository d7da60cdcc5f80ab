#include "fixtures.hpp"
#include "generators.hpp"

#include <opsheaf/errors.hpp>
#include <opsheaf/sheaf.hpp>

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace opsheaf;
using namespace opsheaf::testing;

TEST_CASE("graph validation")
{
    CHECK_THROWS_AS(Graph({"a"}, {{"e", 0, 0}}), ValidationError);
    CHECK_THROWS_AS(Graph({"a", "a"}, {}), ValidationError);
    CHECK_THROWS_AS(Graph({"a", "b"}, {{"e", 0, 2}}), ValidationError);
    const Graph g({"a", "b", "c"}, {{"e", 0, 1}});
    CHECK_FALSE(g.is_connected());
    CHECK(g.component_count() == 2);
    CHECK(g.incidence_sign(0, 0) == -1);
    CHECK(g.incidence_sign(1, 0) == 1);
    CHECK_THROWS_AS(static_cast<void>(g.vertex_index("zz")), ValidationError);
}

TEST_CASE("restriction shapes are checked")
{
    Graph g({"u", "v"}, {{"e", 0, 1}});
    CHECK_THROWS_AS(Sheaf(g, {2, 1}, {1}, {Matrix::Zero(1, 1)}, {Matrix::Zero(1, 1)}), ConformanceError);
}

TEST_CASE("coboundary on the four-vertex cycle")
{
    const Sheaf s = fig1_sheaf();
    CHECK(coboundary(s, fig1_initial()).values.squaredNorm() == doctest::Approx(6.0));
    CHECK(disagreement_energy(s, fig1_initial()) == doctest::Approx(3.0));
    CHECK(coboundary(s, fig1_limit()).values.norm() < 1e-15);
    CHECK(coboundary(s, Cochain0{Vector::Zero(6)}).values.norm() == 0.0);

    const Vector x = fig1_limit().values;
    CHECK((s.tail_map(0) * x.segment(0, 1))(0) == -2);
    CHECK((s.tail_map(1) * x.segment(1, 2))(0) == -1);
    CHECK((s.tail_map(2) * x.segment(3, 1))(0) == 1);
    CHECK((s.tail_map(3) * x.segment(4, 2)) == (Vector(2) << 1, 0).finished());
}

TEST_CASE("Laplacian quadratic form and kernel")
{
    const Sheaf s = fig1_sheaf();
    const Matrix l = laplacian(s).matrix;
    const Vector x0 = fig1_initial().values;
    CHECK(x0.dot(l * x0) == doctest::Approx(6.0));
    const Matrix h0 = global_sections(s);
    REQUIRE(h0.cols() == 1);
    const Vector dir = fig1_limit().values.normalized();
    CHECK(std::abs(std::abs(h0.col(0).dot(dir)) - 1.0) < 1e-12);
}

TEST_CASE("identity maps give the graph Laplacian")
{
    const Matrix l = laplacian(scalar_edge(1, 1)).matrix;
    CHECK(l == (Matrix(2, 2) << 1, -1, -1, 1).finished());
}

TEST_CASE("zero maps make every cochain a global section")
{
    Graph g({"a", "b", "c"}, {{"e", 0, 1}, {"f", 1, 2}});
    const Sheaf s = Sheaf::with_zero_maps(g, {2, 1, 3}, {1, 2});
    CHECK(global_sections(s).cols() == 6);
}

TEST_CASE("zero-dimensional stalks")
{
    Graph g({"a", "b"}, {{"e", 0, 1}});
    const Sheaf s(g, {0, 2}, {1}, {Matrix::Zero(1, 0)}, {Matrix::Ones(1, 2)});
    CHECK(s.c0_dim() == 2);
    CHECK(laplacian(s).matrix.rows() == 2);
    CHECK(global_sections(s).cols() == 1);
}

TEST_CASE("global sections agree with SVD nullity on random trees")
{
    Rng rng(11);
    SheafShape tree;
    tree.extra_edge_probability = 0.0;
    for (int i = 0; i < 30; ++i) {
        const Sheaf s = random_sheaf(rng, tree);
        const Matrix d = coboundary_matrix(s).matrix;
        Eigen::JacobiSVD<Matrix> svd(d);
        const auto rank = (svd.singularValues().array() > 1e-10 * svd.singularValues().maxCoeff()).count();
        CHECK(global_sections(s).cols() == d.cols() - rank);
    }
}

TEST_CASE("diffusion converges to the projection onto global sections")
{
    const Sheaf s = fig1_sheaf();
    const Trajectory t = diffuse(s, fig1_initial(), 1.0);
    CHECK(t.converged());
    CHECK((t.final_state() - fig1_limit().values).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((project_H0(s, fig1_initial()).values - fig1_limit().values).norm() < 1e-12);
    CHECK(t.energy_nonincreasing(1e-9));
}

TEST_CASE("diffusion from a global section does not move")
{
    const Trajectory t = diffuse(fig1_sheaf(), fig1_limit(), 1.0);
    CHECK(t.converged());
    CHECK(t.times.size() == 1);
}

TEST_CASE("random diffusion matches the spectral projector")
{
    Rng rng(12);
    FlowOptions o;
    o.rtol = 1e-11;
    o.atol = 1e-13;
    o.t_end = 5000;
    o.convergence_tol = 1e-12;
    for (int i = 0; i < 10; ++i) {
        SheafShape shape;
        shape.max_edge_dim = 1;
        const Sheaf s = random_sheaf(rng, shape);
        const Cochain0 x0 = random_cochain(rng, s);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(laplacian(s).matrix);
        const double cut = 1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff());
        Vector oracle = Vector::Zero(x0.values.size());
        for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
            if (eig.eigenvalues()[k] < cut) {
                oracle += eig.eigenvectors().col(k) * eig.eigenvectors().col(k).dot(x0.values);
            }
        }
        const Trajectory t = diffuse(s, x0, 1.0, o);
        // Slow modes need a long horizon; compare only converged runs.
        if (t.converged()) {
            CHECK((t.final_state() - oracle).norm() < 1e-8 * std::max(1.0, x0.values.norm()));
        }
        CHECK((project_H0(s, x0).values - oracle).norm() < 1e-8);
    }
}

TEST_CASE("edge orientation does not change the Laplacian")
{
    Rng rng(13);
    for (int i = 0; i < 20; ++i) {
        const Sheaf s = random_sheaf(rng);
        const EdgeIndex e = static_cast<EdgeIndex>(uniform_int(rng, 0, static_cast<int>(s.graph().edge_count()) - 1));
        const Sheaf f = s.flipped(e);
        CHECK((laplacian(s).matrix - laplacian(f).matrix).cwiseAbs().maxCoeff() < 1e-12);
        const Cochain0 x = random_cochain(rng, s);
        const Vector a = coboundary(s, x).values;
        const Vector b = coboundary(f, x).values;
        CHECK((s.edge_block(a, e) + f.edge_block(b, e)).norm() < 1e-12);
        CHECK(disagreement_energy(s, x) == doctest::Approx(disagreement_energy(f, x)));
    }
}

TEST_CASE("cochain conformance errors name the vertex")
{
    const Sheaf s = fig1_sheaf();
    CHECK_THROWS_AS(coboundary(s, Cochain0{Vector::Zero(5)}), ConformanceError);
    try {
        make_cochain0(s, {Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), Vector::Zero(2)});
        FAIL("expected a conformance error");
    } catch (const ConformanceError& e) {
        CHECK(std::string(e.what()).find("v2") != std::string::npos);
    }
}

TEST_CASE("diffusion parameter checks")
{
    CHECK_THROWS_AS(diffuse(fig1_sheaf(), fig1_initial(), 0.0), ParameterError);
    CHECK_THROWS_AS(global_sections(fig1_sheaf(), 0.0), ParameterError);
}
