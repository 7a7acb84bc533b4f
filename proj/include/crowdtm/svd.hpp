#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "crowdtm/errors.hpp"
#include "crowdtm/matrix.hpp"

namespace crowdtm {

struct SvdResult {
    DenseMatrix u;                 // m x n, columns u_i
    std::vector<double> singular;  // descending
    DenseMatrix v;                 // n x n, columns v_i
};

/// One-sided Jacobi SVD (orthogonalizes the columns of A). Adequate for the
/// small, well-scaled matrices used here.
inline SvdResult jacobi_svd(const DenseMatrix& a, int max_sweeps = 100, double tol = 1e-11) {
    const std::size_t m = a.rows(), n = a.cols();
    DenseMatrix b = a;
    DenseMatrix v = DenseMatrix::identity(n);

    double fro2 = 0.0;
    for (const double x : b.values()) fro2 += x * x;
    // Columns whose norm collapses to roundoff residue after a rotation stay
    // exactly parallel to their annihilator and would keep triggering
    // rotations forever; treat them as zero.
    const double negligible = fro2 * 1e-26;

    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += b(i, p) * b(i, p);
                    beta += b(i, q) * b(i, q);
                    gamma += b(i, p) * b(i, q);
                }
                if (alpha <= negligible) {
                    for (std::size_t i = 0; i < m; ++i) b(i, p) = 0.0;
                    continue;
                }
                if (beta <= negligible) {
                    for (std::size_t i = 0; i < m; ++i) b(i, q) = 0.0;
                    continue;
                }
                if (std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) throw NumericError("jacobi_svd: no convergence after max sweeps");

    SvdResult res;
    res.singular.resize(n);
    res.u = DenseMatrix(m, n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += b(i, j) * b(i, j);
        res.singular[j] = std::sqrt(s);
        if (res.singular[j] > 0.0)
            for (std::size_t i = 0; i < m; ++i) res.u(i, j) = b(i, j) / res.singular[j];
    }
    // sort descending, permuting u and v columns alike
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t x, std::size_t y) { return res.singular[x] > res.singular[y]; });
    SvdResult sorted;
    sorted.singular.resize(n);
    sorted.u = DenseMatrix(m, n);
    sorted.v = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        sorted.singular[j] = res.singular[perm[j]];
        for (std::size_t i = 0; i < m; ++i) sorted.u(i, j) = res.u(i, perm[j]);
        for (std::size_t i = 0; i < n; ++i) sorted.v(i, j) = v(i, perm[j]);
    }
    return sorted;
}

/// Rank-r truncated reconstruction sum_{i<r} sigma_i u_i v_i^T.
inline DenseMatrix truncated_reconstruction(const SvdResult& svd, std::size_t rank) {
    const std::size_t m = svd.u.rows(), n = svd.v.rows();
    DenseMatrix out(m, n);
    rank = std::min(rank, svd.singular.size());
    for (std::size_t k = 0; k < rank; ++k) {
        const double s = svd.singular[k];
        for (std::size_t i = 0; i < m; ++i) {
            const double us = svd.u(i, k) * s;
            if (us == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += us * svd.v(j, k);
        }
    }
    return out;
}

} // namespace crowdtm
