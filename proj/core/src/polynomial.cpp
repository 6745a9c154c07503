#include "wnsf/polynomial.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "wnsf/error.hpp"

namespace wnsf {

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw InvalidModelError("polynomial needs at least one coefficient");
    for (double c : coeffs_) {
        if (!std::isfinite(c)) throw InvalidModelError("polynomial coefficient is not finite");
    }
}

Polynomial::Polynomial(std::initializer_list<double> coeffs)
    : Polynomial(std::vector<double>(coeffs)) {}

Polynomial Polynomial::delay(std::size_t k) {
    std::vector<double> c(k + 1, 0.0);
    c[k] = 1.0;
    return Polynomial(std::move(c));
}

bool Polynomial::is_zero() const noexcept {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
}

std::complex<double> Polynomial::evaluate_shift(std::complex<double> q_inv) const {
    // Horner in q^-1, starting from the highest lag.
    std::complex<double> acc{0.0, 0.0};
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * q_inv + *it;
    return acc;
}

std::complex<double> Polynomial::at_frequency(double omega) const {
    return evaluate_shift(std::polar(1.0, -omega));
}

Polynomial Polynomial::trimmed() const {
    std::size_t len = coeffs_.size();
    while (len > 1 && coeffs_[len - 1] == 0.0) --len;
    return Polynomial(std::vector<double>(coeffs_.begin(), coeffs_.begin() + len));
}

Polynomial poly_mul(const Polynomial& a, const Polynomial& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += ai * b[j];
    }
    return Polynomial(std::move(out));
}

Polynomial poly_add(const Polynomial& a, const Polynomial& b) {
    std::vector<double> out(std::max(a.size(), b.size()), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] + b[k];
    return Polynomial(std::move(out));
}

Polynomial poly_scale(const Polynomial& a, double s) {
    std::vector<double> out(a.vec());
    for (double& c : out) c *= s;
    return Polynomial(std::move(out));
}

std::vector<std::complex<double>> roots(const Polynomial& p) {
    const auto& c = p.vec();
    std::size_t lead = 0;
    while (lead < c.size() && c[lead] == 0.0) ++lead;
    if (lead + 1 >= c.size()) return {};
    const std::size_t d = c.size() - 1 - lead;
    const double c0 = c[lead];

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                      static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) companion(0, static_cast<Eigen::Index>(k)) = -c[lead + 1 + k] / c0;
    for (std::size_t k = 1; k < d; ++k)
        companion(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = 1.0;

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    std::vector<std::complex<double>> out;
    out.reserve(d);
    for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) out.push_back(solver.eigenvalues()[k]);
    return out;
}

double spectral_radius(const Polynomial& p) {
    double radius = 0.0;
    for (const auto& z : roots(p)) radius = std::max(radius, std::abs(z));
    return radius;
}

bool is_stable(const Polynomial& p) { return spectral_radius(p) < 1.0 - kStabilityMargin; }

}  // namespace wnsf
