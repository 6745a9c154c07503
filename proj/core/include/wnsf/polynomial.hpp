#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace wnsf {

/// Finite polynomial in the backward shift q^-1:
/// c_0 + c_1 q^-1 + ... + c_d q^-d.
class Polynomial {
public:
    /// The constant polynomial 1.
    Polynomial() : coeffs_{1.0} {}
    explicit Polynomial(std::vector<double> coeffs);
    Polynomial(std::initializer_list<double> coeffs);

    static Polynomial constant(double c) { return Polynomial(std::vector<double>{c}); }
    /// q^-k
    static Polynomial delay(std::size_t k);

    std::size_t degree() const noexcept { return coeffs_.size() - 1; }
    std::size_t size() const noexcept { return coeffs_.size(); }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    const std::vector<double>& vec() const noexcept { return coeffs_; }
    double operator[](std::size_t k) const noexcept {
        return k < coeffs_.size() ? coeffs_[k] : 0.0;
    }

    bool is_monic() const noexcept { return coeffs_.front() == 1.0; }
    bool is_zero() const noexcept;

    /// Evaluate at q = e^{i omega}, i.e. sum_k c_k e^{-i omega k}.
    std::complex<double> at_frequency(double omega) const;
    /// Evaluate with an explicit value for q^-1.
    std::complex<double> evaluate_shift(std::complex<double> q_inv) const;

    /// Drop trailing zero coefficients (keeps at least one).
    Polynomial trimmed() const;

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    std::vector<double> coeffs_;
};

/// Coefficient convolution; degree(result) = degree(a) + degree(b).
Polynomial poly_mul(const Polynomial& a, const Polynomial& b);
Polynomial poly_add(const Polynomial& a, const Polynomial& b);
Polynomial poly_scale(const Polynomial& a, double s);

inline Polynomial operator*(const Polynomial& a, const Polynomial& b) { return poly_mul(a, b); }
inline Polynomial operator+(const Polynomial& a, const Polynomial& b) { return poly_add(a, b); }

/// Roots in the z-plane of c_0 z^d + c_1 z^{d-1} + ... + c_d (the poles/zeros
/// of the corresponding q^-1 polynomial). Computed from companion-matrix
/// eigenvalues; leading zeros of the z-polynomial are stripped.
std::vector<std::complex<double>> roots(const Polynomial& p);

/// Strict stability margin used by all stability queries.
inline constexpr double kStabilityMargin = 1e-9;

/// True when every root satisfies |z| < 1 - kStabilityMargin.
bool is_stable(const Polynomial& p);

/// Largest root modulus, 0 for constant polynomials.
double spectral_radius(const Polynomial& p);

}  // namespace wnsf
