#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <complex>
#include <vector>

#include "ricsense/matrix.hpp"

namespace ricsense {

/// sqrt of the sum of squared entries.
inline double frobenius_norm(const Matrix& m) {
    require_finite(m, "matrix");
    return m.norm();
}

/// Largest singular value.
inline double spectral_norm(const Matrix& m) {
    require_finite(m, "matrix");
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

/// max_{i,j} ||X_{i,j}||_F over the k^2 subsystem blocks.
inline double coupling_norm(const Matrix& m, const BlockPartition& part) {
    require_finite(m, "matrix");
    require_square(m, "matrix");
    part.require_matches(m.rows(), "matrix");
    double best = 0.0;
    for (Index i = 0; i < part.blocks(); ++i)
        for (Index j = 0; j < part.blocks(); ++j)
            best = std::max(best, block(m, part, i, j).norm());
    return best;
}

/// Eigenvalues of a square real matrix. Ordering is whatever the QR iteration
/// produces; it is deterministic for a fixed input.
inline std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
    require_finite(m, "matrix");
    require_square(m, "matrix");
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        fail(ErrorCode::numerical_failure, "eigenvalue iteration did not converge");
    std::vector<std::complex<double>> out(static_cast<size_t>(m.rows()));
    for (Index i = 0; i < m.rows(); ++i) out[static_cast<size_t>(i)] = es.eigenvalues()(i);
    return out;
}

inline double spectral_abscissa(const Matrix& m) {
    double a = -std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues(m)) a = std::max(a, l.real());
    return a;
}

inline double spectral_radius(const Matrix& m) {
    double r = 0.0;
    for (const auto& l : eigenvalues(m)) r = std::max(r, std::abs(l));
    return r;
}

inline bool is_hurwitz(const Matrix& m) { return spectral_abscissa(m) < 0.0; }
inline bool is_schur_stable(const Matrix& m) { return spectral_radius(m) < 1.0; }

inline double smallest_singular_value(const Matrix& m) {
    require_finite(m, "matrix");
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    return s.size() == 0 ? 0.0 : s(s.size() - 1);
}

inline double smallest_singular_value(const ComplexMatrix& m) {
    if (!m.allFinite()) fail(ErrorCode::non_finite, "matrix contains non-finite entries");
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& s = svd.singularValues();
    return s.size() == 0 ? 0.0 : s(s.size() - 1);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

namespace detail {

// Relative floor below which a vectorized matrix-equation operator is treated
// as singular.
inline constexpr double kSingularRatio = 1e-12;

inline Matrix solve_vectorized(const Matrix& op, const Matrix& rhs, Index rows, Index cols,
                               const char* what, double singular_ratio = kSingularRatio) {
    Eigen::JacobiSVD<Matrix> svd(op, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double smax = s(0), smin = s(s.size() - 1);
    if (!(smin > singular_ratio * smax))
        fail(ErrorCode::near_singular, std::string(what) + " operator is numerically singular "
                                           "(sigma_min/sigma_max = " +
                                           std::to_string(smin / std::max(smax, 1e-300)) + ")");
    Vector vec = Eigen::Map<const Vector>(rhs.data(), rhs.size());
    Vector x = svd.solve(vec);
    return Eigen::Map<const Matrix>(x.data(), rows, cols);
}

} // namespace detail

/// Solves F X + X G = C by dense Kronecker vectorization.
inline Matrix solve_sylvester(const Matrix& f, const Matrix& g, const Matrix& c) {
    require_square(f, "F");
    require_square(g, "G");
    if (c.rows() != f.rows() || c.cols() != g.rows())
        fail(ErrorCode::dimension_mismatch, "Sylvester right-hand side has wrong shape");
    require_finite(f, "F");
    require_finite(g, "G");
    require_finite(c, "C");

    const Index p = f.rows(), q = g.rows();
    // Column-major vec: vec(FX) = (I_q (x) F) vec X, vec(XG) = (G^T (x) I_p) vec X.
    Matrix op = kron(Matrix::Identity(q, q), f) + kron(g.transpose(), Matrix::Identity(p, p));
    Matrix x = detail::solve_vectorized(op, c, p, q, "Sylvester");

    const double scale = (f.norm() + g.norm()) * std::max(x.norm(), 1e-300);
    if ((f * x + x * g - c).norm() > 1e-10 * std::max(scale, c.norm()))
        fail(ErrorCode::numerical_failure, "Sylvester residual above tolerance");
    return x;
}

/// Solves X - M1^T X M2 = S by dense Kronecker vectorization.
inline Matrix solve_stein(const Matrix& m1, const Matrix& m2, const Matrix& s) {
    require_square(m1, "M1");
    require_square(m2, "M2");
    if (s.rows() != m1.rows() || s.cols() != m2.rows())
        fail(ErrorCode::dimension_mismatch, "Stein right-hand side has wrong shape");
    require_finite(m1, "M1");
    require_finite(m2, "M2");
    require_finite(s, "S");

    const Index p = m1.rows(), q = m2.rows();
    // vec(M1^T X M2) = (M2^T (x) M1^T) vec X.
    Matrix op = Matrix::Identity(p * q, p * q) - kron(m2.transpose(), m1.transpose());
    Matrix x = detail::solve_vectorized(op, s, p, q, "Stein");

    const double scale =
        std::max(s.norm(), (1.0 + m1.norm() * m2.norm()) * std::max(x.norm(), 1e-300));
    if ((x - m1.transpose() * x * m2 - s).norm() > 1e-10 * scale)
        fail(ErrorCode::numerical_failure, "Stein residual above tolerance");
    return x;
}

} // namespace ricsense
