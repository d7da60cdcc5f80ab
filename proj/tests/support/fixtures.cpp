#include "fixtures.hpp"

namespace opsheaf::testing {

namespace {

Matrix mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> row_major)
{
    Matrix m(r, c);
    auto it = row_major.begin();
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = *it++;
        }
    }
    return m;
}

} // namespace

Sheaf fig1_sheaf()
{
    Graph g({"v1", "v2", "v3", "v4"}, {{"e12", 0, 1}, {"e23", 1, 2}, {"e34", 2, 3}, {"e41", 3, 0}});
    return Sheaf(std::move(g), {1, 2, 1, 2}, {1, 1, 1, 2},
                 {mat(1, 1, {-2}), mat(1, 2, {1, 1}), mat(1, 1, {-1}), mat(2, 2, {1, -1, 1, 0})},
                 {mat(1, 2, {-1, 2}), mat(1, 1, {1}), mat(1, 2, {1, -1}), mat(2, 1, {1, 0})});
}

Cochain0 fig1_initial()
{
    return Cochain0{(Vector(6) << 2, 1, -2, 0, 0, 0).finished()};
}

Cochain0 fig1_limit()
{
    return Cochain0{(Vector(6) << 1, 0, -1, -1, 0, -1).finished()};
}

Sheaf scalar_edge(double p, double q)
{
    Graph g({"u", "v"}, {{"e", 0, 1}});
    return Sheaf(std::move(g), {1, 1}, {1}, {Matrix::Constant(1, 1, p)}, {Matrix::Constant(1, 1, q)});
}

} // namespace opsheaf::testing
