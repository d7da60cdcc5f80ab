#include "opsheaf/linalg.hpp"

#include "opsheaf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace opsheaf {

BlockLayout::BlockLayout(std::vector<std::string> labels, std::vector<Eigen::Index> sizes)
    : labels_(std::move(labels)), sizes_(std::move(sizes))
{
    if (labels_.size() != sizes_.size()) {
        throw ConformanceError("block layout: " + std::to_string(labels_.size()) + " labels for "
                               + std::to_string(sizes_.size()) + " blocks");
    }
    offsets_.assign(1, 0);
    offsets_.reserve(sizes_.size() + 1);
    for (auto s : sizes_) {
        if (s < 0) {
            throw ConformanceError("block layout: negative block size");
        }
        offsets_.push_back(offsets_.back() + s);
    }
}

void LinearOperator::check_layout() const
{
    if (row_blocks.total() != matrix.rows() || col_blocks.total() != matrix.cols()) {
        throw ConformanceError("linear operator: block partition (" + std::to_string(row_blocks.total())
                               + " x " + std::to_string(col_blocks.total())
                               + ") does not match matrix (" + std::to_string(matrix.rows()) + " x "
                               + std::to_string(matrix.cols()) + ")");
    }
}

namespace {

struct Svd {
    Matrix u;
    Vector s;
    Matrix v;
    std::size_t rank = 0;
};

Svd full_svd(const Matrix& m, double rcond)
{
    Svd out;
    if (m.rows() == 0 || m.cols() == 0) {
        out.u = Matrix::Identity(m.rows(), m.rows());
        out.v = Matrix::Identity(m.cols(), m.cols());
        out.s.resize(0);
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.u = svd.matrixU();
    out.v = svd.matrixV();
    out.s = svd.singularValues();
    const double cut = singular_cutoff(m.rows(), m.cols(), out.s, rcond);
    for (Eigen::Index i = 0; i < out.s.size(); ++i) {
        if (out.s[i] > cut) {
            ++out.rank;
        }
    }
    return out;
}

} // namespace

double singular_cutoff(Eigen::Index rows, Eigen::Index cols, const Vector& singular_values, double rcond)
{
    if (singular_values.size() == 0) {
        return 0.0;
    }
    const double smax = singular_values.maxCoeff();
    return static_cast<double>(std::max(rows, cols)) * smax * rcond;
}

Matrix pseudo_inverse(const Matrix& m, double rcond)
{
    const Svd svd = full_svd(m, rcond);
    Matrix out = Matrix::Zero(m.cols(), m.rows());
    for (std::size_t i = 0; i < svd.rank; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out.noalias() += (svd.v.col(k) / svd.s[k]) * svd.u.col(k).transpose();
    }
    return out;
}

Vector pinv_apply(const Matrix& m, const Vector& b, double rcond)
{
    if (b.size() != m.rows()) {
        throw ConformanceError("pinv_apply: right-hand side has length " + std::to_string(b.size())
                               + ", operator has " + std::to_string(m.rows()) + " rows");
    }
    const Svd svd = full_svd(m, rcond);
    Vector out = Vector::Zero(m.cols());
    for (std::size_t i = 0; i < svd.rank; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out += (svd.u.col(k).dot(b) / svd.s[k]) * svd.v.col(k);
    }
    return out;
}

Vector pinv_apply(const LinearOperator& op, const Vector& b, double rcond)
{
    op.check_layout();
    return pinv_apply(op.matrix, b, rcond);
}

std::size_t numerical_rank(const Matrix& m, double rcond)
{
    return full_svd(m, rcond).rank;
}

Matrix null_space(const Matrix& m, double rcond)
{
    const Svd svd = full_svd(m, rcond);
    const auto r = static_cast<Eigen::Index>(svd.rank);
    return svd.v.rightCols(m.cols() - r);
}

Matrix range_space(const Matrix& m, double rcond)
{
    const Svd svd = full_svd(m, rcond);
    return svd.u.leftCols(static_cast<Eigen::Index>(svd.rank));
}

Matrix orthogonal_complement(const Matrix& basis, Eigen::Index ambient)
{
    if (basis.rows() != ambient) {
        throw ConformanceError("orthogonal_complement: basis has " + std::to_string(basis.rows())
                               + " rows, ambient dimension is " + std::to_string(ambient));
    }
    const Eigen::Index k = basis.cols();
    if (k == 0) {
        return Matrix::Identity(ambient, ambient);
    }
    Eigen::HouseholderQR<Matrix> qr(basis);
    Matrix q = qr.householderQ() * Matrix::Identity(ambient, ambient);
    return q.rightCols(ambient - k);
}

double subspace_distance(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.cols()) {
        return 1.0;
    }
    if (a.cols() == 0) {
        return 0.0;
    }
    const Matrix residual = b - a * (a.transpose() * b);
    Eigen::JacobiSVD<Matrix> svd(residual);
    return svd.singularValues().size() == 0 ? 0.0 : svd.singularValues()[0];
}

Vector flatten_row_major(const Matrix& m)
{
    Vector out(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out[k++] = m(i, j);
        }
    }
    return out;
}

Matrix unflatten_row_major(std::span<const double> data, Eigen::Index rows, Eigen::Index cols)
{
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ConformanceError("unflatten: " + std::to_string(data.size()) + " entries for a "
                               + std::to_string(rows) + " x " + std::to_string(cols) + " matrix");
    }
    Matrix out(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = data[k++];
        }
    }
    return out;
}

} // namespace opsheaf
