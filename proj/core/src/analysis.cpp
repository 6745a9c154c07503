#include "wnsf/analysis.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include "wnsf/error.hpp"

namespace wnsf {

namespace {

// The spectral expressions need a strictly stable loop.
TransferFunction stable_sensitivity(const LoopSystem& sys) {
    TransferFunction S = sensitivity(sys.G, sys.K);
    if (!S.is_stable()) {
        throw UnstableLoopError("sensitivity has poles on or outside the unit circle (spectral radius " +
                                format_number(spectral_radius(S.den())) + ")");
    }
    return S;
}

using cplx = std::complex<double>;

/// Neumaier-compensated complex accumulator.
class CompensatedSum {
public:
    void add(cplx v) {
        add_part(re_, re_c_, v.real());
        add_part(im_, im_c_, v.imag());
    }
    cplx value() const { return {re_ + re_c_, im_ + im_c_}; }

private:
    static void add_part(double& sum, double& comp, double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
        else comp += (v - t) + sum;
        sum = t;
    }
    double re_ = 0.0, re_c_ = 0.0, im_ = 0.0, im_c_ = 0.0;
};

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

/// e^{-i w_j tau} on the uniform grid, computed from exact index arithmetic.
class GridPhase {
public:
    explicit GridPhase(std::size_t size) : size_(size), table_(size) {
        for (std::size_t m = 0; m < size; ++m) {
            table_[m] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(size));
        }
    }
    cplx operator()(std::size_t j, long long tau) const {
        const auto N = static_cast<long long>(size_);
        long long idx = (static_cast<long long>(j) * tau) % N;
        if (idx < 0) idx += N;
        const cplx base = table_[static_cast<std::size_t>(idx)];
        return (tau % 2 == 0) ? base : -base;  // e^{i pi tau}
    }

private:
    std::size_t size_;
    std::vector<cplx> table_;
};

void check_grid(std::size_t grid_size, std::size_t minimum) {
    if (!is_power_of_two(grid_size) || grid_size < minimum) {
        throw ResolutionError("frequency grid must be a power of two >= " + std::to_string(minimum) + ", got " +
                              std::to_string(grid_size));
    }
}

}  // namespace

std::vector<double> frequency_grid(std::size_t size) {
    std::vector<double> w(size);
    for (std::size_t j = 0; j < size; ++j) {
        w[j] = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(size);
    }
    return w;
}

CovarianceReport compute_M(const LoopSystem& sys, const ModelStructure& ms, std::size_t grid_size) {
    ms.validate();
    check_grid(grid_size, 256);
    if (!(sys.lambda_r >= 0.0) || !(sys.sigma2 > 0.0)) throw ConfigError("variances must be positive");

    const TransferFunction S = stable_sensitivity(sys);
    const auto grid = frequency_grid(grid_size);
    const auto p = static_cast<std::size_t>(ms.dynamic_size());
    const GridPhase phase(grid_size);

    double h_max = 0.0, h_min = std::numeric_limits<double>::infinity();
    std::vector<CompensatedSum> acc(p * p);
    std::vector<cplx> omega(p);
    for (std::size_t j = 0; j < grid_size; ++j) {
        const double w = grid[j];
        const cplx H = sys.H.at_frequency(w);
        const cplx F = sys.G.den().at_frequency(w);
        h_max = std::max(h_max, std::abs(H * F));
        h_min = std::min(h_min, std::abs(H * F));
        const cplx G = sys.G.at_frequency(w);
        const double phi = sys.lambda_r * std::norm(S.at_frequency(w));
        const cplx base = 1.0 / (H * F);
        for (int k = 0; k < ms.mf; ++k) omega[static_cast<std::size_t>(k)] = -G * base * phase(j, k + 1);
        for (int k = 0; k < ms.ml; ++k) omega[static_cast<std::size_t>(ms.mf + k)] = base * phase(j, k + 1);
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) acc[a * p + b].add(phi * omega[a] * std::conj(omega[b]));
        }
    }
    if (!(h_min > 1e-8 * h_max)) {
        throw SingularWeightError("noise model or plant denominator vanishes on the unit circle; 1/(H F) is unbounded");
    }

    CovarianceReport rep;
    rep.grid_size = grid_size;
    rep.noise_variance = sys.sigma2;
    rep.M.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
            const cplx v = acc[a * p + b].value() / static_cast<double>(grid_size);
            rep.M(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v.real();
            rep.imag_residue = std::max(rep.imag_residue, std::abs(v.imag()));
        }
    }
    rep.M = 0.5 * (rep.M + rep.M.transpose()).eval();
    if (rep.imag_residue > 1e-8 * std::max(rep.M.norm(), 1e-300)) {
        throw Error("asymptotic covariance quadrature left an imaginary residue of " + format_number(rep.imag_residue));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(rep.M);
    const double rc = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (!(rc > 0.0) || 1.0 / rc > kConditionLimit) {
        throw IdentifiabilityError("M is singular: the experiment is not informative for this model structure",
                                   rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity());
    }
    rep.M_inv_trace = llt.solve(Eigen::MatrixXd::Identity(rep.M.rows(), rep.M.cols())).trace();
    return rep;
}

Eigen::MatrixXd compute_Rbar_analytic(const LoopSystem& sys, std::size_t n, std::size_t grid_size) {
    if (n == 0) throw ShapeError("order n must be positive");
    std::size_t minimum = 1;
    while (minimum < 2 * n) minimum <<= 1;
    check_grid(grid_size, minimum);

    const TransferFunction S = stable_sensitivity(sys);
    const auto grid = frequency_grid(grid_size);
    const GridPhase phase(grid_size);
    const double fr = std::sqrt(sys.lambda_r);
    const double sg = std::sqrt(sys.sigma2);
    const auto lags = static_cast<long long>(n) - 1;

    // c[tau + lags] for tau in [-(n-1), n-1]: (-y,-y), (-y,u), (u,u).
    const std::size_t span = 2 * n - 1;
    std::vector<CompensatedSum> cyy(span), cyu(span), cuu(span);
    for (std::size_t j = 0; j < grid_size; ++j) {
        const double w = grid[j];
        const cplx s = S.at_frequency(w);
        const cplx g = sys.G.at_frequency(w);
        const cplx h = sys.H.at_frequency(w);
        const cplx k = sys.K.at_frequency(w);
        // Columns: reference source, noise source.
        const cplx my_r = -g * s * fr, my_e = -h * s * sg;
        const cplx u_r = s * fr, u_e = -k * h * s * sg;
        const cplx syy = my_r * std::conj(my_r) + my_e * std::conj(my_e);
        const cplx syu = my_r * std::conj(u_r) + my_e * std::conj(u_e);
        const cplx suu = u_r * std::conj(u_r) + u_e * std::conj(u_e);
        for (long long tau = -lags; tau <= lags; ++tau) {
            const cplx ph = phase(j, tau);
            const auto idx = static_cast<std::size_t>(tau + lags);
            cyy[idx].add(syy * ph);
            cyu[idx].add(syu * ph);
            cuu[idx].add(suu * ph);
        }
    }

    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd R(2 * ni, 2 * ni);
    const double inv = 1.0 / static_cast<double>(grid_size);
    for (Eigen::Index a = 0; a < ni; ++a) {
        for (Eigen::Index b = 0; b < ni; ++b) {
            const auto idx = static_cast<std::size_t>(a - b + lags);
            R(a, b) = cyy[idx].value().real() * inv;
            R(ni + a, ni + b) = cuu[idx].value().real() * inv;
            R(a, ni + b) = cyu[idx].value().real() * inv;
            R(ni + b, a) = cyu[idx].value().real() * inv;
        }
    }
    R = 0.5 * (R + R.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) {
        throw ResolutionError("analytic R is not positive definite on a grid of " + std::to_string(grid_size) +
                              " points");
    }
    return R;
}

ArxEstimate true_arx_truncation(const TransferFunction& G, const TransferFunction& H, std::size_t n) {
    if (n == 0) throw ShapeError("order n must be positive");
    if (!H.num().is_monic()) throw InvalidModelError("noise model numerator must be monic");
    const TransferFunction inv_h(H.den(), H.num());
    const TransferFunction g_over_h(poly_mul(G.num(), H.den()), poly_mul(G.den(), H.num()));
    const auto a = impulse_response(inv_h, n + 1);
    const auto b = impulse_response(g_over_h, n + 1);
    Eigen::VectorXd av(static_cast<Eigen::Index>(n)), bv(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        av(static_cast<Eigen::Index>(k)) = a[k + 1];
        bv(static_cast<Eigen::Index>(k)) = b[k + 1];
    }
    return ArxEstimate::from_coefficients(av, bv);
}

ThetaParams true_theta(const TransferFunction& G, const ModelStructure& ms) {
    ms.validate();
    const Polynomial L = G.num().trimmed();
    const Polynomial F = G.den().trimmed();
    if (L[0] != 0.0) throw InvalidModelError("plant numerator must start at q^-1 (no direct feedthrough)");
    if (static_cast<int>(L.degree()) > ms.ml || static_cast<int>(F.degree()) > ms.mf) {
        throw ShapeError("plant orders exceed the model structure");
    }
    ThetaParams t;
    t.f = Eigen::VectorXd::Zero(ms.mf);
    t.l = Eigen::VectorXd::Zero(ms.ml);
    for (int k = 1; k <= ms.mf; ++k) t.f(k - 1) = F[static_cast<std::size_t>(k)];
    for (int k = 1; k <= ms.ml; ++k) t.l(k - 1) = L[static_cast<std::size_t>(k)];
    return t;
}

Eigen::MatrixXd compute_Mbar_finite_n(const LoopSystem& sys, std::size_t n, const ModelStructure& ms,
                                      std::size_t grid_size) {
    const Eigen::MatrixXd Rbar = compute_Rbar_analytic(sys, n, grid_size);
    const ArxEstimate eta_o = true_arx_truncation(sys.G, sys.H, n);
    const ModelStructure dyn{ms.mf, ms.ml, 0, 0};
    const ThetaParams theta_o = true_theta(sys.G, dyn);
    const Eigen::MatrixXd Q = build_Q(eta_o, dyn);
    Eigen::MatrixXd W;
    try {
        W = build_weighting(theta_o, Rbar);
    } catch (const WeightingBreakdownError& e) {
        throw WeightingBreakdownError(std::string(e.what()) + " at n = " + std::to_string(n), e.condition());
    }
    Eigen::MatrixXd Mbar = Q.transpose() * W * Q;
    return 0.5 * (Mbar + Mbar.transpose());
}

double mse_metric(const ThetaParams& theta_hat, const ThetaParams& theta_true) {
    const ModelStructure a = theta_hat.structure();
    const ModelStructure b = theta_true.structure();
    if (a.mf != b.mf || a.ml != b.ml || a.mc != b.mc || a.md != b.md) {
        throw ShapeError("parameter structures differ");
    }
    return (theta_hat.stacked() - theta_true.stacked()).squaredNorm();
}

double fit_metric(std::span<const double> g_hat, std::span<const double> g_true) {
    if (g_hat.size() != g_true.size() || g_true.empty()) throw ShapeError("impulse responses must have equal length");
    const double mean = std::accumulate(g_true.begin(), g_true.end(), 0.0) / static_cast<double>(g_true.size());
    double err = 0.0, spread = 0.0;
    for (std::size_t k = 0; k < g_true.size(); ++k) {
        err += (g_true[k] - g_hat[k]) * (g_true[k] - g_hat[k]);
        spread += (g_true[k] - mean) * (g_true[k] - mean);
    }
    if (!(spread > 0.0)) throw UndefinedFitError("FIT is undefined for a constant true impulse response");
    return 100.0 * (1.0 - std::sqrt(err) / std::sqrt(spread));
}

namespace {

double tail_norm(const std::vector<double>& g, std::size_t from) {
    double s = 0.0;
    for (std::size_t k = from; k < g.size(); ++k) s += g[k] * g[k];
    return std::sqrt(s);
}

double full_norm(const std::vector<double>& g) { return tail_norm(g, 0); }

constexpr std::size_t kMaxImpulseLength = std::size_t{1} << 20;
constexpr double kTailTolerance = 1e-9;

}  // namespace

std::size_t fit_impulse_length(const TransferFunction& G_hat, const TransferFunction& G_true) {
    const bool hat_stable = G_hat.is_stable();
    std::size_t len = 64;
    while (len < kMaxImpulseLength) {
        const auto g = impulse_response(G_true, 2 * len);
        const double scale = full_norm(g);
        bool done = tail_norm(g, len) < kTailTolerance * scale;
        if (done && hat_stable) {
            const auto gh = impulse_response(G_hat, 2 * len);
            done = tail_norm(gh, len) < kTailTolerance * scale;
        }
        if (done) return len;
        len *= 2;
    }
    return len;
}

double fit_between(const TransferFunction& G_hat, const TransferFunction& G_true) {
    const std::size_t len = fit_impulse_length(G_hat, G_true);
    const auto g = impulse_response(G_true, len);
    const auto gh = impulse_response(G_hat, len);
    return fit_metric(gh, g);
}

void write_covariance_csv(std::ostream& os, const CovarianceReport& report) {
    write_matrix_csv(os, report.M);
    os << "M_inv_trace," << format_number(report.M_inv_trace) << '\n'
       << "grid_size," << report.grid_size << '\n'
       << "noise_variance," << format_number(report.noise_variance) << '\n'
       << "sigma2_trace_Minv," << format_number(report.noise_variance * report.M_inv_trace) << '\n';
}

}  // namespace wnsf
