#include <opsheaf/free_opinions.hpp>
#include <opsheaf/joint_dynamics.hpp>
#include <opsheaf/sheaf.hpp>

#include <benchmark/benchmark.h>

#include <random>
#include <string>

using namespace opsheaf;

namespace {

// Ring of n vertices with stalk dimension d, plus a chord every fourth vertex.
Sheaf ring(int n, int d, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        ids.push_back("v" + std::to_string(i));
    }
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
        edges.push_back({"r" + std::to_string(i), static_cast<VertexIndex>(i), static_cast<VertexIndex>((i + 1) % n)});
        if (i % 4 == 0 && n > 4) {
            edges.push_back({"c" + std::to_string(i), static_cast<VertexIndex>(i), static_cast<VertexIndex>((i + n / 2) % n)});
        }
    }
    const auto m = edges.size();
    auto random_map = [&] { return Matrix(Matrix::NullaryExpr(d, d, [&] { return g(rng); })); };
    std::vector<Matrix> tails;
    std::vector<Matrix> heads;
    for (std::size_t e = 0; e < m; ++e) {
        tails.push_back(random_map());
        heads.push_back(random_map());
    }
    return Sheaf(Graph(std::move(ids), std::move(edges)), std::vector<Eigen::Index>(n, d),
                 std::vector<Eigen::Index>(m, d), std::move(tails), std::move(heads));
}

Cochain0 random_opinion(const Sheaf& s, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    return Cochain0{Vector::NullaryExpr(s.c0_dim(), [&] { return g(rng); })};
}

void BM_Laplacian(benchmark::State& state)
{
    std::mt19937_64 rng(1);
    const Sheaf s = ring(static_cast<int>(state.range(0)), 3, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(laplacian(s).matrix.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Laplacian)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_PinvApply(benchmark::State& state)
{
    std::mt19937_64 rng(2);
    const Sheaf s = ring(static_cast<int>(state.range(0)), 3, rng);
    const LinearOperator l = laplacian(s);
    const Vector b = l.matrix * random_opinion(s, rng).values;
    for (auto _ : state) {
        benchmark::DoNotOptimize(pinv_apply(l, b).data());
    }
}
BENCHMARK(BM_PinvApply)->RangeMultiplier(2)->Range(8, 64);

void BM_SolvePoisson(benchmark::State& state)
{
    std::mt19937_64 rng(3);
    const Sheaf s = ring(static_cast<int>(state.range(0)), 2, rng);
    const Cochain0 x = random_opinion(s, rng);
    const StubbornSpec spec = StubbornSpec::fully_stubborn(s, {0, 1}, x);
    const BlockLaplacian b = build_free_sheaf(s, spec).blocks;
    const Vector y0 = b.frame.free_part(x.values);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_poisson(b, spec.packed_values(), y0).y_inf.data());
    }
}
BENCHMARK(BM_SolvePoisson)->RangeMultiplier(2)->Range(8, 64);

void BM_JointVelocity(benchmark::State& state)
{
    std::mt19937_64 rng(4);
    const Sheaf s = ring(static_cast<int>(state.range(0)), 2, rng);
    const JointSystem sys(s, StubbornSpec::none(s), AdaptationSpec::all(s.graph()));
    const Vector z = sys.pack(random_opinion(s, rng));
    Vector dz(z.size());
    for (auto _ : state) {
        sys.velocity(z, 1.0, 1.0, dz);
        benchmark::DoNotOptimize(dz.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_JointVelocity)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_JointFlow(benchmark::State& state)
{
    std::mt19937_64 rng(5);
    const Sheaf s = ring(static_cast<int>(state.range(0)), 2, rng);
    const JointSystem sys(s, StubbornSpec::none(s), AdaptationSpec::all(s.graph()));
    const Cochain0 x0 = random_opinion(s, rng);
    JointOptions o;
    o.t_end = 1.0;
    for (auto _ : state) {
        const JointTrajectory t = joint_flow(sys, x0, 1.0, 1.0, o);
        benchmark::DoNotOptimize(t.psi.back());
    }
}
BENCHMARK(BM_JointFlow)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
