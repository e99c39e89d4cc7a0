#pragma once

#include <optional>

#include "ricsense/riccati.hpp"
#include "ricsense/stability.hpp"

namespace ricsense {

/// Additive perturbation of the system matrix. `coupling_induced` marks
/// perturbations whose diagonal blocks vanish identically.
struct Perturbation {
    Matrix delta_a;
    bool coupling_induced = false;

    void validate(const BlockPartition& part) const {
        require_square(delta_a, "deltaA");
        require_finite(delta_a, "deltaA");
        part.require_matches(delta_a.rows(), "deltaA");
        if (coupling_induced)
            for (Index i = 0; i < part.blocks(); ++i)
                if (block(delta_a, part, i, i).cwiseAbs().maxCoeff() != 0.0)
                    fail(ErrorCode::validation,
                         "perturbation flagged coupling-induced has a nonzero diagonal block");
    }
};

/// First-order change of the CARE solution: the unique symmetric X with
/// X A_cl + A_cl^T X = -(P dA + dA^T P).
inline Matrix dp_continuous(const RiccatiSolution& sol, const Matrix& delta_a) {
    if (sol.time_kind != TimeKind::continuous)
        fail(ErrorCode::validation, "dp_continuous expects a continuous-time solution");
    if (delta_a.rows() != sol.P.rows() || delta_a.cols() != sol.P.cols())
        fail(ErrorCode::dimension_mismatch, "deltaA must match the state dimension");
    require_finite(delta_a, "deltaA");

    const Matrix rhs = -(sol.P * delta_a + delta_a.transpose() * sol.P);
    Matrix x = solve_sylvester(sol.A_cl.transpose(), sol.A_cl, rhs);
    x = 0.5 * (x + x.transpose());
    return x;
}

/// First-order change of the DARE solution: X with
/// X - A_cl^T X A_cl = A_cl^T P dA + dA^T P A_cl.
inline Matrix dp_discrete(const RiccatiSolution& sol, const Matrix& delta_a) {
    if (sol.time_kind != TimeKind::discrete)
        fail(ErrorCode::validation, "dp_discrete expects a discrete-time solution");
    if (delta_a.rows() != sol.P.rows() || delta_a.cols() != sol.P.cols())
        fail(ErrorCode::dimension_mismatch, "deltaA must match the state dimension");
    require_finite(delta_a, "deltaA");

    const Matrix rhs =
        sol.A_cl.transpose() * sol.P * delta_a + delta_a.transpose() * sol.P * sol.A_cl;
    Matrix x = solve_stein(sol.A_cl, sol.A_cl, rhs);
    x = 0.5 * (x + x.transpose());
    return x;
}

/// 2 ||P||_F ||dA||_F / sep(A_cl, -A_cl^T).
inline double frobenius_bound(const RiccatiSolution& sol, const Matrix& delta_a) {
    if (sol.time_kind != TimeKind::continuous)
        fail(ErrorCode::validation, "frobenius_bound expects a continuous-time solution");
    require_finite(delta_a, "deltaA");
    const double s = sep(sol.A_cl, Matrix(-sol.A_cl.transpose()));
    if (s == 0.0) fail(ErrorCode::near_singular, "sep(A_cl, -A_cl^T) vanishes");
    return 2.0 * sol.P.norm() * delta_a.norm() / s;
}

namespace detail {

inline void require_uncoupled(const SystemLQ& sys, const RiccatiSolution& sol) {
    const auto& part = sys.partition;
    if (part.blocks() < 2) fail(ErrorCode::validation, "block-wise bounds need k >= 2 blocks");
    for (const Matrix* m : {&sys.A, &sol.P, &sol.A_cl})
        if (!is_block_diagonal(*m, part, 1e-9))
            fail(ErrorCode::not_uncoupled, "base system is not uncoupled "
                                           "(A, P, A_cl must be block diagonal)");
}

inline double max_cross_norm(const Matrix& delta_a, const BlockPartition& part, Index i, Index j) {
    return std::max(block(delta_a, part, i, j).norm(), block(delta_a, part, j, i).norm());
}

} // namespace detail

/// Block-wise first-order bound for an uncoupled continuous-time system:
/// entry (i,j) bounds ||(DP(A) dA)_{i,j}||_F.
inline Matrix blockwise_bound_continuous(const SystemLQ& sys, const RiccatiSolution& sol,
                                         const Matrix& delta_a) {
    if (sol.time_kind != TimeKind::continuous)
        fail(ErrorCode::validation, "expected a continuous-time solution");
    detail::require_uncoupled(sys, sol);
    const auto& part = sys.partition;
    part.require_matches(delta_a.rows(), "deltaA");

    const Index k = part.blocks();
    Matrix out = Matrix::Zero(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) {
            if (i == j) continue;
            const double pnorms =
                block(sol.P, part, i, i).norm() + block(sol.P, part, j, j).norm();
            const Matrix aii = block(sol.A_cl, part, i, i);
            const Matrix ajj = block(sol.A_cl, part, j, j);
            const double s = sep(ajj, Matrix(-aii.transpose()));
            if (s == 0.0) fail(ErrorCode::near_singular, "block separation vanishes");
            out(i, j) = pnorms / s * detail::max_cross_norm(delta_a, part, i, j);
        }
    return out;
}

/// Discrete-time counterpart with the Stein separation in the denominator.
inline Matrix blockwise_bound_discrete(const SystemLQ& sys, const RiccatiSolution& sol,
                                       const Matrix& delta_a) {
    if (sol.time_kind != TimeKind::discrete)
        fail(ErrorCode::validation, "expected a discrete-time solution");
    detail::require_uncoupled(sys, sol);
    const auto& part = sys.partition;
    part.require_matches(delta_a.rows(), "deltaA");

    const Index k = part.blocks();
    Matrix out = Matrix::Zero(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) {
            if (i == j) continue;
            const Matrix aii = block(sol.A_cl, part, i, i);
            const Matrix ajj = block(sol.A_cl, part, j, j);
            const double num = (block(sol.P, part, i, i) * aii).norm() +
                               (ajj.transpose() * block(sol.P, part, j, j)).norm();
            const double s = sep_sharp(aii, ajj);
            if (s == 0.0) fail(ErrorCode::near_singular, "block Stein separation vanishes");
            out(i, j) = num / s * detail::max_cross_norm(delta_a, part, i, j);
        }
    return out;
}

/// First-order bound on the closed-loop coupling blocks induced by dA.
inline Matrix closed_loop_coupling_bound(const SystemLQ& sys, const RiccatiSolution& sol,
                                         const Matrix& delta_a) {
    if (sol.time_kind != TimeKind::continuous)
        fail(ErrorCode::validation, "expected a continuous-time solution");
    detail::require_uncoupled(sys, sol);
    const auto& part = sys.partition;
    part.require_matches(delta_a.rows(), "deltaA");
    const BlockPartition inp = sys.input_partition();

    const Index k = part.blocks();
    std::vector<double> brb(static_cast<size_t>(k), 0.0);
    for (Index i = 0; i < k; ++i) {
        const Index mi = inp.sizes[static_cast<size_t>(i)];
        if (mi == 0) continue;
        const Matrix bii = sys.B.block(part.offset(i), inp.offset(i), part.sizes[i], mi);
        const Matrix rii = sys.R.block(inp.offset(i), inp.offset(i), mi, mi);
        Eigen::LLT<Matrix> rchol(rii);
        brb[static_cast<size_t>(i)] = (bii * rchol.solve(bii.transpose())).norm();
    }

    Matrix out = Matrix::Zero(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) {
            if (i == j) continue;
            const double pnorms =
                block(sol.P, part, i, i).norm() + block(sol.P, part, j, j).norm();
            const Matrix aii = block(sol.A_cl, part, i, i);
            const Matrix ajj = block(sol.A_cl, part, j, j);
            const double s = sep(ajj, Matrix(-aii.transpose()));
            if (s == 0.0) fail(ErrorCode::near_singular, "block separation vanishes");
            out(i, j) = (1.0 + brb[static_cast<size_t>(i)] * pnorms / s) *
                        detail::max_cross_norm(delta_a, part, i, j);
        }
    return out;
}

/// Non-local perturbation bound g(a) together with its domain boundary a*.
struct NonlocalBound {
    double value = 0.0;
    double a_star = 0.0;
};

/// Right boundary a* of the non-local bound: the smaller positive root of
/// 2a + 2 sqrt(2 d p a) - s = 0, located by bisection in t = sqrt(a).
inline double nonlocal_domain_boundary(double s, double d, double p) {
    if (!(s > 0.0 && d > 0.0 && p > 0.0))
        fail(ErrorCode::validation, "nonlocal bound needs s, d, p > 0");
    const double coeff = 2.0 * std::sqrt(2.0 * d * p);
    auto h = [&](double t) { return 2.0 * t * t + coeff * t - s; };
    double lo = 0.0, hi = std::sqrt(0.5 * s);
    if (h(hi) < 0.0) hi = std::sqrt(s); // paranoia; h(sqrt(s/2)) >= 0 analytically
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * std::max(hi, 1e-300); ++it) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) < 0.0 ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    return t * t;
}

/// g(a) = (s - 2a - sqrt((s-2a)^2 - 8 p d a)) / (2d), valid for 0 <= a < a*.
inline NonlocalBound nonlocal_bound(double s, double d, double p, double a) {
    if (a < 0.0) fail(ErrorCode::validation, "perturbation size must be nonnegative");
    NonlocalBound out;
    out.a_star = nonlocal_domain_boundary(s, d, p);
    if (a >= out.a_star)
        fail(ErrorCode::out_of_domain, "perturbation size exceeds the bound's domain a*");
    const double disc = (s - 2.0 * a) * (s - 2.0 * a) - 8.0 * p * d * a;
    if (disc < 0.0) fail(ErrorCode::out_of_domain, "negative discriminant in nonlocal bound");
    out.value = (s - 2.0 * a - std::sqrt(disc)) / (2.0 * d);
    return out;
}

/// Coupling constant of a partitioned matrix:
/// max_{i!=j} ||A_{i,j}||_F / ||A_{i,i}||_F.
inline double coupling_constant(const Matrix& a, const BlockPartition& part) {
    require_square(a, "A");
    part.require_matches(a.rows(), "A");
    double eps = 0.0;
    for (Index i = 0; i < part.blocks(); ++i) {
        const double diag = block(a, part, i, i).norm();
        for (Index j = 0; j < part.blocks(); ++j) {
            if (i == j) continue;
            if (diag == 0.0)
                fail(ErrorCode::zero_diagonal_block,
                     "diagonal block " + std::to_string(i) + " vanishes");
            eps = std::max(eps, block(a, part, i, j).norm() / diag);
        }
    }
    return eps;
}

/// Everything the perturbation analysis produces for one (system, dA) pair.
/// Block-wise tables are present only when the base system is uncoupled; the
/// non-local bound only when ||dA||_F lies inside its domain.
struct SensitivityReport {
    Matrix delta_p_first_order;
    std::optional<double> frobenius;
    std::optional<Matrix> blockwise;
    std::optional<Matrix> closed_loop_blockwise;
    std::optional<double> nonlocal;
    std::optional<double> nonlocal_a_star;
    std::optional<double> coupling_eps;
};

inline SensitivityReport build_sensitivity_report(const SystemLQ& sys, const RiccatiSolution& sol,
                                                  const Matrix& delta_a) {
    SensitivityReport rep;
    const bool continuous = sol.time_kind == TimeKind::continuous;
    rep.delta_p_first_order =
        continuous ? dp_continuous(sol, delta_a) : dp_discrete(sol, delta_a);

    if (continuous) rep.frobenius = frobenius_bound(sol, delta_a);

    try {
        rep.blockwise = continuous ? blockwise_bound_continuous(sys, sol, delta_a)
                                   : blockwise_bound_discrete(sys, sol, delta_a);
        if (continuous) rep.closed_loop_blockwise = closed_loop_coupling_bound(sys, sol, delta_a);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::not_uncoupled && e.code() != ErrorCode::validation) throw;
    }

    if (continuous) {
        Eigen::LLT<Matrix> rchol(sys.R);
        const double d = (sys.B * rchol.solve(sys.B.transpose())).norm();
        const double s = sep(sol.A_cl, Matrix(-sol.A_cl.transpose()));
        const double p = sol.P.norm();
        if (s > 0.0 && d > 0.0 && p > 0.0) {
            try {
                const NonlocalBound nl = nonlocal_bound(s, d, p, delta_a.norm());
                rep.nonlocal = nl.value;
                rep.nonlocal_a_star = nl.a_star;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::out_of_domain) throw;
                rep.nonlocal_a_star = nonlocal_domain_boundary(s, d, p);
            }
        }
    }

    try {
        rep.coupling_eps = coupling_constant(Matrix(sys.A + delta_a), sys.partition);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::zero_diagonal_block) throw;
    }
    return rep;
}

} // namespace ricsense
