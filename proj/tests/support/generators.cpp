#include "generators.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace opsheaf::testing {

double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Vector gaussian_vector(Rng& rng, Eigen::Index n)
{
    std::normal_distribution<double> g;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = g(rng);
    }
    return v;
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    std::normal_distribution<double> g;
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = g(rng);
        }
    }
    return m;
}

Graph random_connected_graph(Rng& rng, const SheafShape& shape)
{
    const int n = uniform_int(rng, shape.min_vertices, shape.max_vertices);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        ids.push_back("v" + std::to_string(i));
    }
    std::vector<std::pair<int, int>> pairs;
    for (int i = 1; i < n; ++i) {
        pairs.emplace_back(uniform_int(rng, 0, i - 1), i);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const bool present = std::any_of(pairs.begin(), pairs.end(), [&](auto p) {
                return (p.first == i && p.second == j) || (p.first == j && p.second == i);
            });
            if (!present && uniform(rng, 0, 1) < shape.extra_edge_probability) {
                pairs.emplace_back(i, j);
            }
        }
    }
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        auto [a, b] = pairs[k];
        if (uniform(rng, 0, 1) < 0.5) {
            std::swap(a, b);
        }
        edges.push_back({"e" + std::to_string(k), static_cast<VertexIndex>(a), static_cast<VertexIndex>(b)});
    }
    return Graph(std::move(ids), std::move(edges));
}

Sheaf random_sheaf(Rng& rng, const SheafShape& shape)
{
    Graph g = random_connected_graph(rng, shape);
    std::vector<Eigen::Index> vdims;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        vdims.push_back(uniform_int(rng, 1, shape.max_vertex_dim));
    }
    std::vector<Eigen::Index> edims;
    std::vector<Matrix> tails;
    std::vector<Matrix> heads;
    for (const Edge& e : g.edges()) {
        const Eigen::Index k = uniform_int(rng, 1, shape.max_edge_dim);
        edims.push_back(k);
        tails.push_back(gaussian_matrix(rng, k, vdims[e.tail]));
        heads.push_back(gaussian_matrix(rng, k, vdims[e.head]));
    }
    return Sheaf(std::move(g), std::move(vdims), std::move(edims), std::move(tails), std::move(heads));
}

Cochain0 random_cochain(Rng& rng, const Sheaf& sheaf)
{
    return Cochain0{gaussian_vector(rng, sheaf.c0_dim())};
}

StubbornSpec random_stubborn(Rng& rng, const Sheaf& sheaf, double p, bool coordinate_only)
{
    StubbornSpec spec = StubbornSpec::none(sheaf);
    for (VertexIndex v = 0; v < sheaf.graph().vertex_count(); ++v) {
        if (uniform(rng, 0, 1) >= p) {
            continue;
        }
        const Eigen::Index n = sheaf.vertex_dim(v);
        const Eigen::Index k = uniform_int(rng, 1, static_cast<int>(n));
        Matrix basis;
        if (coordinate_only || uniform(rng, 0, 1) < 0.5) {
            std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), rng);
            std::sort(idx.begin(), idx.begin() + k);
            basis = Matrix::Zero(n, k);
            for (Eigen::Index j = 0; j < k; ++j) {
                basis(idx[static_cast<std::size_t>(j)], j) = 1.0;
            }
        } else {
            Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(rng, n, k));
            basis = qr.householderQ() * Matrix::Identity(n, k);
        }
        spec.basis[v] = basis;
        spec.values[v] = gaussian_vector(rng, k);
    }
    return spec;
}

AdaptationSpec random_adaptation(Rng& rng, const Graph& graph, double p)
{
    std::vector<Incidence> adapting;
    for (const Incidence& inc : graph.incidences()) {
        if (uniform(rng, 0, 1) < p) {
            adapting.push_back(inc);
        }
    }
    return AdaptationSpec(graph, std::move(adapting));
}

AdaptationSpec symmetric_adaptation(Rng& rng, const Graph& graph, double p)
{
    std::vector<Incidence> adapting;
    for (EdgeIndex e = 0; e < graph.edge_count(); ++e) {
        if (uniform(rng, 0, 1) < p) {
            adapting.push_back({graph.edge(e).tail, e});
            adapting.push_back({graph.edge(e).head, e});
        }
    }
    return AdaptationSpec(graph, std::move(adapting));
}

Cochain0 clamp(const Sheaf& sheaf, const StubbornSpec& spec, const Cochain0& x)
{
    Cochain0 out = x;
    for (VertexIndex v = 0; v < sheaf.graph().vertex_count(); ++v) {
        if (!spec.is_stubborn(v)) {
            continue;
        }
        auto block = sheaf.vertex_block(out.values, v);
        const Matrix& s = spec.basis[v];
        block = block - s * (s.transpose() * block) + s * spec.values[v];
    }
    return out;
}

} // namespace opsheaf::testing
