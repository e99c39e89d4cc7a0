#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>

#include "ricsense/linalg.hpp"
#include "ricsense/riccati.hpp"

namespace ricsense {

/// Separation of two square matrices: sigma_min(I (x) X - Y^T (x) I).
/// Symmetric in its arguments and invariant under joint transposition.
inline double sep(const Matrix& x, const Matrix& y) {
    require_square(x, "X");
    require_square(y, "Y");
    const Index p = x.rows(), q = y.rows();
    const Matrix op =
        kron(Matrix::Identity(q, q), x) - kron(y.transpose(), Matrix::Identity(p, p));
    return smallest_singular_value(op);
}

/// Stein-equation separation: sigma_min(I - M1^T (x) M2^T).
inline double sep_sharp(const Matrix& m1, const Matrix& m2) {
    require_square(m1, "M1");
    require_square(m2, "M2");
    const Index n = m1.rows() * m2.rows();
    const Matrix op = Matrix::Identity(n, n) - kron(m1.transpose(), m2.transpose());
    return smallest_singular_value(op);
}

/// Distance to instability together with the frequency (or angle) attaining
/// it and a rank-one complex perturbation that places an eigenvalue on the
/// critical boundary.
struct RadiusResult {
    double radius = 0.0;
    double witness_frequency = 0.0;
    std::optional<ComplexMatrix> witness_perturbation;
};

namespace detail {

struct ScanMinimum {
    double arg = 0.0;
    double value = 0.0;
};

// Coarse scan followed by golden-section refinement of every local minimum.
// sigma(.) must be 1-Lipschitz (true for sigma_min(A - zI) along any line).
inline ScanMinimum minimize_scan(const std::function<double(double)>& sigma, double lo, double hi,
                                 int points) {
    std::vector<double> vals(static_cast<size_t>(points) + 1);
    const double step = (hi - lo) / points;
    for (int i = 0; i <= points; ++i) vals[static_cast<size_t>(i)] = sigma(lo + i * step);

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    ScanMinimum best{lo, vals[0]};
    auto refine = [&](double a, double b) {
        double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
        double f1 = sigma(x1), f2 = sigma(x2);
        for (int it = 0; it < 200 && (b - a) > 1e-9 * std::max(1.0, std::abs(b)); ++it) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - golden * (b - a);
                f1 = sigma(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + golden * (b - a);
                f2 = sigma(x2);
            }
        }
        const double xm = 0.5 * (a + b), fm = sigma(xm);
        if (fm < best.value) best = {xm, fm};
    };

    for (int i = 0; i <= points; ++i) {
        const double v = vals[static_cast<size_t>(i)];
        const bool left_ok = (i == 0) || vals[static_cast<size_t>(i - 1)] >= v;
        const bool right_ok = (i == points) || vals[static_cast<size_t>(i + 1)] >= v;
        if (!(left_ok && right_ok)) continue;
        if (v < best.value) best = {lo + i * step, v};
        const double a = (i == 0) ? lo : lo + (i - 1) * step;
        const double b = (i == points) ? hi : lo + (i + 1) * step;
        refine(a, b);
    }
    return best;
}

inline ComplexMatrix radius_witness(const ComplexMatrix& shifted, double& sigma_out) {
    Eigen::JacobiSVD<ComplexMatrix> svd(shifted, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Index last = svd.singularValues().size() - 1;
    sigma_out = svd.singularValues()(last);
    const Eigen::VectorXcd u = svd.matrixU().col(last);
    const Eigen::VectorXcd v = svd.matrixV().col(last);
    return -sigma_out * u * v.adjoint();
}

} // namespace detail

/// Continuous-time stability radius min_w sigma_min(A - iwI) of a Hurwitz
/// matrix. Scan over [0, 2||A||_2] (the radius is even in w for real A) plus
/// golden-section refinement of every local minimum.
inline RadiusResult stability_radius_continuous(const Matrix& a, int scan_points = 2000) {
    require_square(a, "A");
    if (!is_hurwitz(a)) fail(ErrorCode::not_stable, "matrix is not Hurwitz");

    const ComplexMatrix ac = a.cast<std::complex<double>>();
    const Index n = a.rows();
    auto sigma = [&](double w) {
        ComplexMatrix shifted = ac;
        shifted.diagonal().array() -= std::complex<double>(0.0, w);
        return smallest_singular_value(shifted);
    };

    double hi = 2.0 * spectral_norm(a);
    if (hi == 0.0) hi = 1.0;
    detail::ScanMinimum best = detail::minimize_scan(sigma, 0.0, hi, scan_points);
    // sigma_min(A - iwI) >= w - ||A||_2 grows past the scan window; retry once
    // wider if the minimum sits on the boundary.
    if (best.arg > hi * (1.0 - 2.0 / scan_points)) {
        detail::ScanMinimum wider = detail::minimize_scan(sigma, 0.0, 2.0 * hi, 2 * scan_points);
        if (wider.value < best.value) best = wider;
    }

    RadiusResult out;
    ComplexMatrix shifted = ac;
    shifted.diagonal().array() -= std::complex<double>(0.0, best.arg);
    double sigma_at = 0.0;
    out.witness_perturbation = detail::radius_witness(shifted, sigma_at);
    out.radius = sigma_at;
    out.witness_frequency = best.arg;
    (void)n;
    return out;
}

/// Discrete-time stability radius min_theta sigma_min(A - e^{i theta} I) of a
/// Schur-stable matrix, theta scanned over [0, pi].
inline RadiusResult stability_radius_discrete(const Matrix& a, int scan_points = 2000) {
    require_square(a, "A");
    if (!is_schur_stable(a)) fail(ErrorCode::not_stable, "matrix is not Schur stable");

    const ComplexMatrix ac = a.cast<std::complex<double>>();
    auto sigma = [&](double theta) {
        ComplexMatrix shifted = ac;
        shifted.diagonal().array() -= std::exp(std::complex<double>(0.0, theta));
        return smallest_singular_value(shifted);
    };

    detail::ScanMinimum best = detail::minimize_scan(sigma, 0.0, M_PI, scan_points);

    RadiusResult out;
    ComplexMatrix shifted = ac;
    shifted.diagonal().array() -= std::exp(std::complex<double>(0.0, best.arg));
    double sigma_at = 0.0;
    out.witness_perturbation = detail::radius_witness(shifted, sigma_at);
    out.radius = sigma_at;
    out.witness_frequency = best.arg;
    return out;
}

/// He's lower bound  pi r^2 ||A||_2 / (2 ||A||_2^2 + pi r^2)  <= sep(A, -A^T).
inline double he_lower_bound(const Matrix& a) {
    const double r = stability_radius_continuous(a).radius;
    const double n2 = spectral_norm(a);
    return M_PI * r * r * n2 / (2.0 * n2 * n2 + M_PI * r * r);
}

/// Leading-order sensitivity bound 2 (2/rho^2 + pi) ||dA||_F / (pi ||A_cl||_2)
/// valid under the robustness premise r(A_cl) >= rho ||A_cl||_2.
inline double robust_sensitivity_bound(const RiccatiSolution& sol, const Matrix& delta_a,
                                       double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) fail(ErrorCode::validation, "rho must lie in (0, 1]");
    require_finite(delta_a, "deltaA");
    const double n2 = spectral_norm(sol.A_cl);
    const double r = stability_radius_continuous(sol.A_cl).radius;
    if (r < rho * n2)
        fail(ErrorCode::rho_violated, "robustness premise r(A_cl) >= rho*||A_cl||_2 fails");
    return 2.0 * (2.0 / (rho * rho) + M_PI) * delta_a.norm() / (M_PI * n2);
}

/// For block-diagonal A, sep(A,-A^T) = min_{i,j} sep(A_ii, -A_jj^T). Computes
/// the block-wise minimum and cross-checks it against the full operator.
inline double blockwise_sep(const Matrix& a, const BlockPartition& part) {
    require_square(a, "A");
    part.require_matches(a.rows(), "A");
    if (!is_block_diagonal(a, part, 1e-12))
        fail(ErrorCode::not_block_diagonal, "matrix is not block diagonal");

    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < part.blocks(); ++i)
        for (Index j = 0; j < part.blocks(); ++j) {
            const Matrix aii = block(a, part, i, i);
            const Matrix ajj = block(a, part, j, j);
            best = std::min(best, sep(aii, Matrix(-ajj.transpose())));
        }

    const double full = sep(a, Matrix(-a.transpose()));
    if (std::abs(best - full) > 1e-8 * std::max(full, 1e-300))
        fail(ErrorCode::numerical_failure,
             "block-wise separation disagrees with the full operator");
    return best;
}

struct CouplingRadiusBounds {
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
};

namespace detail {

// Scaling at which A + tD first loses Hurwitz stability, or nullopt if no
// instability is found below the cap.
inline std::optional<double> destabilizing_scale(const Matrix& a, const Matrix& d) {
    const double cap = 1e9 * (1.0 + a.norm());
    double lo = 0.0, hi = std::max(1e-6, 1e-2 * std::max(a.norm(), 1.0));
    while (spectral_abscissa(a + hi * d) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > cap) return std::nullopt;
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-9 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (spectral_abscissa(a + mid * d) < 0.0 ? lo : hi) = mid;
    }
    return hi;
}

} // namespace detail

/// Bounds on the coupling-restricted stability radius r^C (smallest
/// ||.||_C-norm zero-diagonal-block perturbation that destabilizes A).
/// Lower bound: sep(A,-A^T) / (2(k-1)). Upper bound: randomized directional
/// search over unit-C-norm coupling directions, bisecting the destabilizing
/// scale along each.
inline CouplingRadiusBounds coupling_radius_bounds(const Matrix& a, const BlockPartition& part,
                                                   std::uint64_t seed = 12345,
                                                   int n_directions = 500) {
    require_square(a, "A");
    part.require_matches(a.rows(), "A");
    if (part.blocks() < 2) fail(ErrorCode::validation, "coupling radius needs k >= 2 blocks");
    if (!is_hurwitz(a)) fail(ErrorCode::not_stable, "matrix is not Hurwitz");

    const Index k = part.blocks();
    CouplingRadiusBounds out;
    out.lower = sep(a, Matrix(-a.transpose())) / (2.0 * static_cast<double>(k - 1));

    std::vector<Matrix> directions;
    auto normalized_blocks = [&](Matrix d) {
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < k; ++j) {
                if (i == j) {
                    d.block(part.offset(i), part.offset(j), part.sizes[i], part.sizes[j])
                        .setZero();
                    continue;
                }
                auto blk = d.block(part.offset(i), part.offset(j), part.sizes[i], part.sizes[j]);
                const double nrm = blk.norm();
                if (nrm > 0.0) blk /= nrm;
            }
        return d;
    };

    // Structured sign patterns on single block pairs; these catch symmetric
    // couplings exactly (e.g. the all-ones pair for scalar blocks).
    const Index n = a.rows();
    for (Index i = 0; i < k; ++i)
        for (Index j = i + 1; j < k; ++j)
            for (int si = -1; si <= 1; si += 2)
                for (int sj = -1; sj <= 1; sj += 2) {
                    Matrix d = Matrix::Zero(n, n);
                    d.block(part.offset(i), part.offset(j), part.sizes[i], part.sizes[j])
                        .setConstant(si);
                    d.block(part.offset(j), part.offset(i), part.sizes[j], part.sizes[i])
                        .setConstant(sj);
                    directions.push_back(normalized_blocks(std::move(d)));
                }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::pair<Index, Index>> pairs;
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j)
            if (i != j) pairs.emplace_back(i, j);
    for (int s = 0; s < n_directions; ++s) {
        Matrix d = Matrix::Zero(n, n);
        if (s % 2 == 0) {
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j) d(i, j) = gauss(rng);
        } else {
            const auto [bi, bj] = pairs[static_cast<size_t>(s / 2) % pairs.size()];
            for (Index i = 0; i < part.sizes[bi]; ++i)
                for (Index j = 0; j < part.sizes[bj]; ++j)
                    d(part.offset(bi) + i, part.offset(bj) + j) = gauss(rng);
            for (Index i = 0; i < part.sizes[bj]; ++i)
                for (Index j = 0; j < part.sizes[bi]; ++j)
                    d(part.offset(bj) + i, part.offset(bi) + j) = gauss(rng);
        }
        directions.push_back(normalized_blocks(std::move(d)));
    }

    for (const Matrix& d : directions) {
        if (d.norm() == 0.0) continue;
        if (auto t = detail::destabilizing_scale(a, d)) out.upper = std::min(out.upper, *t);
    }

    if (out.lower > out.upper * (1.0 + 1e-9))
        fail(ErrorCode::numerical_failure, "coupling radius bounds crossed");
    return out;
}

/// Eigenvalue verdict on A + dA, plus the consistency record
/// ||dA||_2 >= r(A) whenever a stable A is destabilized.
struct DestabilizationResult {
    bool base_stable = false;
    bool perturbed_stable = false;
    double delta_norm2 = 0.0;
    std::optional<double> base_radius;
    std::optional<bool> radius_consistent;

    const char* verdict() const { return perturbed_stable ? "stable" : "unstable"; }
};

inline DestabilizationResult destabilization_check(const Matrix& a, const Matrix& delta_a) {
    require_square(a, "A");
    if (delta_a.rows() != a.rows() || delta_a.cols() != a.cols())
        fail(ErrorCode::dimension_mismatch, "deltaA must match A");
    DestabilizationResult out;
    out.base_stable = is_hurwitz(a);
    out.perturbed_stable = is_hurwitz(a + delta_a);
    out.delta_norm2 = spectral_norm(delta_a);
    if (out.base_stable && !out.perturbed_stable) {
        out.base_radius = stability_radius_continuous(a).radius;
        out.radius_consistent = out.delta_norm2 >= *out.base_radius * (1.0 - 1e-8);
    }
    return out;
}

} // namespace ricsense
