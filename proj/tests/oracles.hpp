#pragma once

// Independent reference computations used by the tests. Deliberately naive:
// nothing here calls into the library's numerical routines.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

using cd = std::complex<double>;

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

/// First `len` power-series coefficients of num/den (den[0] != 0).
inline std::vector<double> long_division(const std::vector<double>& num, const std::vector<double>& den,
                                         std::size_t len) {
    std::vector<double> q(len, 0.0);
    std::vector<double> rem(len, 0.0);
    for (std::size_t k = 0; k < std::min(len, num.size()); ++k) rem[k] = num[k];
    for (std::size_t k = 0; k < len; ++k) {
        q[k] = rem[k] / den[0];
        for (std::size_t j = 1; j < den.size() && k + j < len; ++j) rem[k + j] -= q[k] * den[j];
    }
    return q;
}

/// sum_k c_k e^{-i w k}
inline cd poly_at(const std::vector<double>& c, double w) {
    cd s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * std::polar(1.0, -w * static_cast<double>(k));
    return s;
}

/// (1/2pi) int_{-pi}^{pi} f(w) dw by the midpoint rule.
template <class F>
inline auto spectral_mean(F&& f, std::size_t points) {
    const double h = 2.0 * std::numbers::pi / static_cast<double>(points);
    auto acc = f(-std::numbers::pi + 0.5 * h);
    for (std::size_t j = 1; j < points; ++j) acc += f(-std::numbers::pi + (static_cast<double>(j) + 0.5) * h);
    return acc / static_cast<double>(points);
}

/// Dense Gauss-Jordan inverse with partial pivoting.
inline Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index p = c;
        for (Eigen::Index r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
        a.row(c).swap(a.row(p));
        inv.row(c).swap(inv.row(p));
        const double d = a(c, c);
        a.row(c) /= d;
        inv.row(c) /= d;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a(r, c);
            a.row(r) -= f * a.row(c);
            inv.row(r) -= f * inv.row(c);
        }
    }
    return inv;
}

/// Quantile by the (n-1)p rank rule on a copy that is sorted here.
inline double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

/// Lower-triangular Toeplitz by its definition.
inline Eigen::MatrixXd toeplitz(const std::vector<double>& x, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j <= i && j < cols; ++j) {
            const auto k = static_cast<std::size_t>(i - j);
            t(i, j) = k < x.size() ? x[k] : 0.0;
        }
    return t;
}

}  // namespace oracle
