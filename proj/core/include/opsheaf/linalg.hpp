#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace opsheaf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Partition of an index range into labelled contiguous blocks.
class BlockLayout {
public:
    BlockLayout() = default;
    BlockLayout(std::vector<std::string> labels, std::vector<Eigen::Index> sizes);

    [[nodiscard]] std::size_t block_count() const { return sizes_.size(); }
    [[nodiscard]] Eigen::Index size(std::size_t block) const { return sizes_[block]; }
    [[nodiscard]] Eigen::Index offset(std::size_t block) const { return offsets_[block]; }
    [[nodiscard]] Eigen::Index total() const { return offsets_.empty() ? 0 : offsets_.back(); }
    [[nodiscard]] const std::string& label(std::size_t block) const { return labels_[block]; }
    [[nodiscard]] std::span<const Eigen::Index> sizes() const { return sizes_; }

    friend bool operator==(const BlockLayout&, const BlockLayout&) = default;

private:
    std::vector<std::string> labels_;
    std::vector<Eigen::Index> sizes_;
    std::vector<Eigen::Index> offsets_{0};
};

/// Dense matrix together with the block structure of its domain and codomain.
struct LinearOperator {
    Matrix matrix;
    BlockLayout row_blocks;
    BlockLayout col_blocks;

    [[nodiscard]] Eigen::Index rows() const { return matrix.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return matrix.cols(); }

    /// View of block (i, j).
    [[nodiscard]] auto block(std::size_t i, std::size_t j) const
    {
        return matrix.block(row_blocks.offset(i), col_blocks.offset(j), row_blocks.size(i),
                            col_blocks.size(j));
    }

    /// Throws ConformanceError if the layouts do not cover the matrix.
    void check_layout() const;
};

/// Relative singular-value cutoff; singular values below
/// max(rows, cols) * sigma_max * kDefaultRcond count as zero.
inline constexpr double kDefaultRcond = 1e-12;

/// Absolute cutoff max(m, n) * sigma_max * rcond for the given singular values.
double singular_cutoff(Eigen::Index rows, Eigen::Index cols, const Vector& singular_values,
                       double rcond = kDefaultRcond);

/// Moore-Penrose pseudoinverse through a full SVD.
Matrix pseudo_inverse(const Matrix& m, double rcond = kDefaultRcond);

/// Minimum-norm least-squares solution of op * x = b.
Vector pinv_apply(const LinearOperator& op, const Vector& b, double rcond = kDefaultRcond);
Vector pinv_apply(const Matrix& m, const Vector& b, double rcond = kDefaultRcond);

std::size_t numerical_rank(const Matrix& m, double rcond = kDefaultRcond);

/// Orthonormal basis (columns) of ker(m).
Matrix null_space(const Matrix& m, double rcond = kDefaultRcond);

/// Orthonormal basis (columns) of im(m).
Matrix range_space(const Matrix& m, double rcond = kDefaultRcond);

/// Orthonormal basis of the orthogonal complement of span(columns of basis)
/// inside R^ambient.  The input columns must be orthonormal.
Matrix orthogonal_complement(const Matrix& basis, Eigen::Index ambient);

/// Largest principal-angle sine between two subspaces given by orthonormal
/// bases; zero when the spans coincide. Different dimensions give 1.
double subspace_distance(const Matrix& a, const Matrix& b);

/// Row-major flattening helpers used for matrix-valued cochains.
Vector flatten_row_major(const Matrix& m);
Matrix unflatten_row_major(std::span<const double> data, Eigen::Index rows, Eigen::Index cols);

} // namespace opsheaf
