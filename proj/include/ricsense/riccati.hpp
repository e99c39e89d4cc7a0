#pragma once

#include <Eigen/Cholesky>
#include <optional>

#include "ricsense/linalg.hpp"
#include "ricsense/matrix.hpp"

namespace ricsense {

enum class TimeKind { continuous, discrete };

/// LQ problem (A,B,Q,R) together with the subsystem partition. Q, R and B
/// must be block diagonal whenever the partition has two or more blocks; the
/// coupling lives in A alone.
struct SystemLQ {
    Matrix A;
    Matrix B;
    Matrix Q;
    Matrix R;
    BlockPartition partition;
    TimeKind time_kind = TimeKind::continuous;

    Index dim() const { return A.rows(); }
    Index inputs() const { return B.cols(); }

    /// Contiguous grouping of the input columns that makes B block diagonal
    /// with respect to the state partition. Throws when no such grouping
    /// exists (i.e. some input drives more than one subsystem).
    BlockPartition input_partition() const;

    void validate() const;
};

inline BlockPartition SystemLQ::input_partition() const {
    const Index k = partition.blocks();
    std::vector<Index> owner(static_cast<size_t>(B.cols()), -1);
    for (Index j = 0; j < B.cols(); ++j) {
        for (Index i = 0; i < B.rows(); ++i) {
            if (B(i, j) == 0.0) continue;
            Index b = 0, off = partition.sizes[0];
            while (i >= off) off += partition.sizes[++b];
            if (owner[static_cast<size_t>(j)] != -1 && owner[static_cast<size_t>(j)] != b)
                fail(ErrorCode::not_block_diagonal,
                     "input column " + std::to_string(j) + " drives more than one subsystem");
            owner[static_cast<size_t>(j)] = b;
        }
    }
    // Zero columns attach to the running block so the grouping stays contiguous.
    Index current = 0;
    for (auto& b : owner) {
        if (b == -1)
            b = current;
        else if (b < current)
            fail(ErrorCode::not_block_diagonal, "input columns are not grouped by subsystem");
        else
            current = b;
    }
    std::vector<Index> sizes(static_cast<size_t>(k), 0);
    for (Index b : owner) ++sizes[static_cast<size_t>(b)];

    BlockPartition out;
    out.sizes = sizes; // may contain zero-sized groups for input-less subsystems
    return out;
}

namespace detail {

inline void require_spd(const Matrix& m, const std::string& what) {
    require_square(m, what);
    require_finite(m, what);
    if ((m - m.transpose()).norm() > 1e-10 * std::max(m.norm(), 1e-300))
        fail(ErrorCode::validation, what + " is not symmetric");
    if (m.size() == 0) return;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= 0.0)
        fail(ErrorCode::validation, what + " is not positive definite");
}

inline void require_exact_block_diagonal(const Matrix& m, const std::vector<Index>& row_sizes,
                                         const std::vector<Index>& col_sizes,
                                         const std::string& what) {
    Index roff = 0;
    for (size_t bi = 0; bi < row_sizes.size(); ++bi) {
        Index coff = 0;
        for (size_t bj = 0; bj < col_sizes.size(); ++bj) {
            if (bi != bj &&
                m.block(roff, coff, row_sizes[bi], col_sizes[bj]).cwiseAbs().maxCoeff() != 0.0)
                fail(ErrorCode::validation,
                     what + " has a nonzero off-diagonal block (" + std::to_string(bi) + "," +
                         std::to_string(bj) + ")");
            coff += col_sizes[bj];
        }
        roff += row_sizes[bi];
    }
}

} // namespace detail

inline void SystemLQ::validate() const {
    require_square(A, "A");
    require_finite(A, "A");
    require_finite(B, "B");
    if (B.rows() != A.rows()) fail(ErrorCode::dimension_mismatch, "B row count must match A");
    detail::require_spd(Q, "Q");
    if (Q.rows() != A.rows()) fail(ErrorCode::dimension_mismatch, "Q must match A");
    detail::require_spd(R, "R");
    if (R.rows() != B.cols()) fail(ErrorCode::dimension_mismatch, "R must match the input count");
    partition.validate();
    partition.require_matches(A.rows(), "A");
    if (partition.blocks() >= 2) {
        const BlockPartition inp = input_partition();
        detail::require_exact_block_diagonal(B, partition.sizes, inp.sizes, "B");
        detail::require_exact_block_diagonal(Q, partition.sizes, partition.sizes, "Q");
        if (B.cols() > 0) detail::require_exact_block_diagonal(R, inp.sizes, inp.sizes, "R");
    }
}

/// Riccati solution bundle: value matrix, closed loop, gain, residual.
struct RiccatiSolution {
    Matrix P;
    Matrix A_cl;
    Matrix K;
    double residual = 0.0;
    TimeKind time_kind = TimeKind::continuous;
};

inline double care_residual(const SystemLQ& sys, const Matrix& p) {
    Eigen::LLT<Matrix> rchol(sys.R);
    const Matrix bp = sys.B.transpose() * p;
    return (p * sys.B * rchol.solve(bp) - p * sys.A - sys.A.transpose() * p - sys.Q).norm();
}

inline double dare_residual(const SystemLQ& sys, const Matrix& p) {
    const Matrix g = sys.R + sys.B.transpose() * p * sys.B;
    Eigen::LLT<Matrix> gchol(g);
    const Matrix bpa = sys.B.transpose() * p * sys.A;
    const Matrix next = sys.A.transpose() * (p * sys.A - p * sys.B * gchol.solve(bpa)) + sys.Q;
    return (next - p).norm();
}

/// A - B R^{-1} B^T P (continuous) or A - B (R + B^T P B)^{-1} B^T P A (discrete).
inline Matrix closed_loop(const SystemLQ& sys, const Matrix& p) {
    if (p.rows() != sys.dim() || p.cols() != sys.dim())
        fail(ErrorCode::dimension_mismatch, "P must match the state dimension");
    if (sys.time_kind == TimeKind::continuous) {
        Eigen::LLT<Matrix> rchol(sys.R);
        return sys.A - sys.B * rchol.solve(sys.B.transpose() * p);
    }
    const Matrix g = sys.R + sys.B.transpose() * p * sys.B;
    Eigen::LLT<Matrix> gchol(g);
    return sys.A - sys.B * gchol.solve(sys.B.transpose() * p * sys.A);
}

/// x^T P x.
inline double value_at(const Matrix& p, const Vector& x) {
    if (p.rows() != x.size())
        fail(ErrorCode::dimension_mismatch, "P and x dimensions do not match");
    return x.dot(p * x);
}

/// max_{i!=j} ||P_{i,j}||_F / max_i ||P_{i,i}||_F. Zero exactly when the
/// quadratic value function splits into per-subsystem terms.
inline double mixed_coupling_indicator(const Matrix& p, const BlockPartition& part) {
    require_square(p, "P");
    part.require_matches(p.rows(), "P");
    if (part.blocks() < 2)
        fail(ErrorCode::validation, "mixed coupling indicator needs at least two blocks");
    if ((p - p.transpose()).norm() > 1e-8 * std::max(p.norm(), 1e-300))
        fail(ErrorCode::validation, "P must be symmetric");
    const double diag = diagonal_block_scale(p, part);
    if (diag == 0.0) fail(ErrorCode::numerical_failure, "all diagonal blocks of P vanish");
    return offdiagonal_block_scale(p, part) / diag;
}

namespace detail {

// Pseudo-inverse of a symmetric PSD matrix, dropping directions below a
// relative rank threshold.
inline Matrix psd_pinv(const Matrix& z, double rel_tol = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(z);
    const Vector& w = es.eigenvalues();
    const double cutoff = rel_tol * std::max(w.cwiseAbs().maxCoeff(), 1e-300);
    Vector winv = Vector::Zero(w.size());
    for (Index i = 0; i < w.size(); ++i)
        if (w(i) > cutoff) winv(i) = 1.0 / w(i);
    return es.eigenvectors() * winv.asDiagonal() * es.eigenvectors().transpose();
}

// Riccati iterations may legitimately pass through (or converge to) closed
// loops whose Lyapunov/Stein operators violate the public 1e-12 singularity
// guard (strongly non-normal corpus systems have sep values near 1e-11).
// Iteration solves therefore reject only exact singularity; stability of the
// iterates and the final residual check decide success instead.
inline constexpr double kIterationSingularRatio = 0.0;

// Stabilizing initial gain: shift-and-solve pole placement. With c exceeding
// every |Re lambda(A)| the Lyapunov solution Z of (A+cI)Z + Z(A+cI)^T = 2BB^T
// is PSD with the controllable subspace as its range, and K = B^T Z^+ moves
// every controllable eigenvalue to real part -c while leaving uncontrollable
// (necessarily stable) modes untouched.
inline std::optional<Matrix> stabilizing_gain(const Matrix& a, const Matrix& b) {
    if (spectral_abscissa(a) < 0.0) return Matrix::Zero(b.cols(), a.rows());

    double re_max = 0.0;
    for (const auto& l : eigenvalues(a)) re_max = std::max(re_max, std::abs(l.real()));
    const double c = re_max + 1.0;
    const Matrix shifted = a + c * Matrix::Identity(a.rows(), a.cols());
    try {
        Matrix z = solve_sylvester(shifted, shifted.transpose(), 2.0 * b * b.transpose());
        z = 0.5 * (z + z.transpose());
        Matrix k = b.transpose() * psd_pinv(z);
        if (spectral_abscissa(a - b * k) < 0.0) return k;
    } catch (const Error&) {
        // fall through to the high-gain sweep
    }
    for (double gain = 1.0; gain <= 1e10; gain *= 10.0) {
        Matrix k = gain * b.transpose();
        if (spectral_abscissa(a - b * k) < 0.0) return k;
    }
    return std::nullopt;
}

} // namespace detail

/// Continuous algebraic Riccati equation, Newton-Kleinman iteration: each
/// step solves one Lyapunov equation with the current closed loop.
inline RiccatiSolution solve_care(const SystemLQ& sys) {
    sys.validate();
    if (sys.time_kind != TimeKind::continuous)
        fail(ErrorCode::validation, "solve_care expects a continuous-time system");

    const Index n = sys.dim();
    auto k0 = detail::stabilizing_gain(sys.A, sys.B);
    if (!k0)
        fail(ErrorCode::not_stabilizable, "no stabilizing initial gain found; (A,B) does not "
                                          "appear to be stabilizable");

    Eigen::LLT<Matrix> rchol(sys.R);
    Matrix k = *k0;
    Matrix p = Matrix::Zero(n, n);
    double best_res = std::numeric_limits<double>::infinity();
    Matrix best_p;

    const double a_scale = std::max(1.0, sys.A.norm());
    int stagnant = 0;
    for (int iter = 0; iter < 100; ++iter) {
        const Matrix a_cl = sys.A - sys.B * k;
        if (spectral_abscissa(a_cl) >= 0.0)
            fail(ErrorCode::numerical_failure, "Newton iterate lost stability");
        const Matrix rhs = -(sys.Q + k.transpose() * sys.R * k);
        const Matrix op = kron(Matrix::Identity(n, n), a_cl.transpose()) +
                          kron(a_cl.transpose(), Matrix::Identity(n, n));
        p = detail::solve_vectorized(op, rhs, n, n, "Lyapunov",
                                     detail::kIterationSingularRatio);
        p = 0.5 * (p + p.transpose());

        const double res = care_residual(sys, p);
        const double scale = std::max(p.norm(), 1e-300) * a_scale;
        if (res < best_res) {
            best_res = res;
            best_p = p;
            stagnant = 0;
        } else if (++stagnant >= 5) {
            break;
        }
        if (res <= 1e-12 * scale) break;
        k = rchol.solve(sys.B.transpose() * p);
    }

    RiccatiSolution sol;
    sol.P = best_p;
    sol.K = rchol.solve(sys.B.transpose() * best_p);
    sol.A_cl = sys.A - sys.B * sol.K;
    sol.residual = best_res;
    sol.time_kind = TimeKind::continuous;

    const double accept = 1e-9 * std::max(sol.P.norm(), 1e-300) * a_scale;
    if (!(sol.residual <= accept))
        fail(ErrorCode::numerical_failure, "CARE residual stagnated above tolerance");
    if (!is_hurwitz(sol.A_cl))
        fail(ErrorCode::not_stabilizable, "closed loop is not Hurwitz");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sol.P, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= 0.0)
        fail(ErrorCode::numerical_failure, "Riccati solution is not positive definite");
    return sol;
}

/// Discrete algebraic Riccati equation: damped fixed-point sweep with Newton
/// refinement through Stein solves once the iterate is stabilizing.
inline RiccatiSolution solve_dare(const SystemLQ& sys) {
    sys.validate();
    if (sys.time_kind != TimeKind::discrete)
        fail(ErrorCode::validation, "solve_dare expects a discrete-time system");

    const Index n = sys.dim();
    Matrix p = sys.Q;
    double res = dare_residual(sys, p);
    double prev_res = std::numeric_limits<double>::infinity();

    auto dare_map = [&](const Matrix& pm) {
        const Matrix g = sys.R + sys.B.transpose() * pm * sys.B;
        Eigen::LLT<Matrix> gchol(g);
        const Matrix bpa = sys.B.transpose() * pm * sys.A;
        Matrix next = sys.A.transpose() * (pm * sys.A - pm * sys.B * gchol.solve(bpa)) + sys.Q;
        return Matrix(0.5 * (next + next.transpose()));
    };

    const double diverged = 1e14 * std::max(sys.Q.norm(), 1.0);
    int iter = 0;
    for (; iter < 200; ++iter) {
        const double tol = 1e-11 * std::max(p.norm(), 1e-300);
        if (res <= tol) break;
        if (p.norm() > diverged)
            fail(ErrorCode::not_stabilizable, "fixed-point iterate diverges; (A,B) does not "
                                              "appear to be stabilizable");

        const Matrix a_cl = closed_loop(sys, p);
        bool newton_done = false;
        if (spectral_radius(a_cl) < 1.0 && res <= 1e-2 * std::max(p.norm(), 1.0)) {
            try {
                const Matrix fres = dare_map(p) - p;
                const Matrix op = Matrix::Identity(n * n, n * n) -
                                  kron(a_cl.transpose(), a_cl.transpose());
                Matrix dp = detail::solve_vectorized(op, fres, n, n, "Stein",
                                                     detail::kIterationSingularRatio);
                p += 0.5 * (dp + dp.transpose());
                newton_done = true;
            } catch (const Error&) {
                newton_done = false; // Stein operator too ill-conditioned; keep iterating
            }
        }
        if (!newton_done) {
            Matrix next = dare_map(p);
            // Damp when the residual fails to shrink.
            if (res > prev_res) next = 0.5 * (next + p);
            p = next;
        }
        prev_res = res;
        res = dare_residual(sys, p);
    }

    RiccatiSolution sol;
    sol.P = 0.5 * (p + p.transpose());
    const Matrix g = sys.R + sys.B.transpose() * sol.P * sys.B;
    Eigen::LLT<Matrix> gchol(g);
    sol.K = gchol.solve(sys.B.transpose() * sol.P * sys.A);
    sol.A_cl = sys.A - sys.B * sol.K;
    sol.residual = dare_residual(sys, sol.P);
    sol.time_kind = TimeKind::discrete;

    const double accept = 1e-9 * std::max(sol.P.norm(), 1e-300) * std::max(1.0, sys.A.norm());
    if (!(sol.residual <= accept)) {
        if (!is_schur_stable(sol.A_cl))
            fail(ErrorCode::not_stabilizable, "iteration produced no stabilizing solution");
        fail(ErrorCode::numerical_failure, "DARE residual stagnated above tolerance");
    }
    if (!is_schur_stable(sol.A_cl))
        fail(ErrorCode::not_stabilizable, "closed loop is not Schur stable");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sol.P, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= 0.0)
        fail(ErrorCode::numerical_failure, "Riccati solution is not positive definite");
    if (n > 0 && sol.P.allFinite() == false)
        fail(ErrorCode::numerical_failure, "Riccati solution is not finite");
    return sol;
}

inline RiccatiSolution solve_riccati(const SystemLQ& sys) {
    return sys.time_kind == TimeKind::continuous ? solve_care(sys) : solve_dare(sys);
}

} // namespace ricsense
