#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdtm/errors.hpp"

namespace crowdtm {

/// Dense row-major matrix of doubles. All accumulation is done in 64-bit.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {v_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {v_.data() + r * cols_, cols_}; }

    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    void fill(double x) { v_.assign(v_.size(), x); }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    bool operator==(const DenseMatrix& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require_shape(a.cols() == b.rows(), "matmul " + std::to_string(a.cols()) + " vs " +
                                            std::to_string(b.rows()));
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_l2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_l1(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += std::fabs(x);
    return s;
}

/// Spectral norm via power iteration on A^T A (deterministic start vector).
inline double spectral_norm(const DenseMatrix& a, int iters = 200) {
    if (a.size() == 0) return 0.0;
    std::vector<double> v(a.cols(), 1.0 / std::sqrt(double(a.cols())));
    std::vector<double> av(a.rows()), atav(a.cols());
    double sigma = 0.0;
    for (int it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < a.rows(); ++i) av[i] = dot(a.row(i), v);
        std::fill(atav.begin(), atav.end(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) atav[j] += a(i, j) * av[i];
        double n = norm_l2(atav);
        if (n == 0.0) return 0.0;
        for (auto& x : atav) x /= n;
        v = atav;
        sigma = std::sqrt(n);
    }
    return sigma;
}

} // namespace crowdtm
