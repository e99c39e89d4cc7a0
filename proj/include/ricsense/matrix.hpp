#pragma once

#include <Eigen/Dense>
#include <numeric>
#include <string>
#include <vector>

#include "ricsense/errors.hpp"

namespace ricsense {

using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) fail(ErrorCode::non_finite, what + " contains non-finite entries");
}

inline void require_square(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols())
        fail(ErrorCode::dimension_mismatch,
             what + " must be square, got " + std::to_string(m.rows()) + "x" +
                 std::to_string(m.cols()));
}

/// Ordered subsystem dimensions n_1..n_k. Defines the block indexing used by
/// the coupling norm and all block-wise estimates.
struct BlockPartition {
    std::vector<Index> sizes;

    BlockPartition() = default;
    explicit BlockPartition(std::vector<Index> s) : sizes(std::move(s)) { validate(); }

    void validate() const {
        if (sizes.empty()) fail(ErrorCode::validation, "partition needs at least one block");
        for (Index n : sizes)
            if (n <= 0) fail(ErrorCode::validation, "partition sizes must be positive");
    }

    Index blocks() const { return static_cast<Index>(sizes.size()); }

    Index dim() const { return std::accumulate(sizes.begin(), sizes.end(), Index{0}); }

    Index offset(Index i) const {
        Index off = 0;
        for (Index b = 0; b < i; ++b) off += sizes[b];
        return off;
    }

    void require_matches(Index n, const std::string& what) const {
        if (dim() != n)
            fail(ErrorCode::dimension_mismatch,
                 "partition dimension " + std::to_string(dim()) + " does not match " + what +
                     " dimension " + std::to_string(n));
    }
};

/// Block (i,j) of a square matrix partitioned by `part`.
inline Eigen::Block<const Matrix> block(const Matrix& m, const BlockPartition& part, Index i,
                                        Index j) {
    return m.block(part.offset(i), part.offset(j), part.sizes[i], part.sizes[j]);
}

/// Largest Frobenius norm over the diagonal blocks; the reference scale for
/// uncoupledness checks.
inline double diagonal_block_scale(const Matrix& m, const BlockPartition& part) {
    double scale = 0.0;
    for (Index i = 0; i < part.blocks(); ++i) scale = std::max(scale, block(m, part, i, i).norm());
    return scale;
}

/// Largest Frobenius norm over the off-diagonal blocks.
inline double offdiagonal_block_scale(const Matrix& m, const BlockPartition& part) {
    double scale = 0.0;
    for (Index i = 0; i < part.blocks(); ++i)
        for (Index j = 0; j < part.blocks(); ++j)
            if (i != j) scale = std::max(scale, block(m, part, i, j).norm());
    return scale;
}

inline bool is_block_diagonal(const Matrix& m, const BlockPartition& part, double rel_tol) {
    const double scale = diagonal_block_scale(m, part);
    return offdiagonal_block_scale(m, part) <= rel_tol * std::max(scale, 1e-300);
}

/// Zeroes every off-diagonal block in place.
inline Matrix block_diagonal_part(const Matrix& m, const BlockPartition& part) {
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (Index i = 0; i < part.blocks(); ++i)
        out.block(part.offset(i), part.offset(i), part.sizes[i], part.sizes[i]) =
            block(m, part, i, i);
    return out;
}

} // namespace ricsense
