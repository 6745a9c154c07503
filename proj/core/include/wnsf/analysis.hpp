#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "wnsf/arx.hpp"
#include "wnsf/estimator.hpp"
#include "wnsf/lti.hpp"

namespace wnsf {

/// Loop configuration for the theoretical quantities: plant G = L/F, noise
/// filter H = C/D (stable, inversely stable), controller K, white reference
/// with variance lambda_r and white noise with variance sigma2.
struct LoopSystem {
    TransferFunction G;
    TransferFunction H;
    TransferFunction K = TransferFunction::gain(0.0);
    double lambda_r = 1.0;
    double sigma2 = 1.0;
};

/// Asymptotic covariance summary: sqrt(N)(theta_hat - theta_o) ~ N(0, sigma2 M^-1).
struct CovarianceReport {
    Eigen::MatrixXd M;
    double M_inv_trace = 0.0;
    std::size_t grid_size = 0;
    double noise_variance = 1.0;
    /// Largest |Im| entry of the quadrature before it was discarded.
    double imag_residue = 0.0;

    /// sigma2 trace(M^-1) / N
    double asymptotic_mse(double N) const { return noise_variance * M_inv_trace / N; }
};

/// Uniform grid omega_j = -pi + 2 pi j / size, j = 0..size-1.
std::vector<double> frequency_grid(std::size_t size);

/// M = (1/2pi) int Omega Phi_u^r Omega^* dw with
/// Omega = [-G/(H F) Gamma_mf ; 1/(H F) Gamma_ml] and Phi_u^r = lambda_r |S|^2,
/// evaluated by the rectangle rule on a power-of-two grid (>= 2^8 points).
CovarianceReport compute_M(const LoopSystem& sys, const ModelStructure& ms, std::size_t grid_size = 1u << 14);

/// Limit of the ARX normal-equation matrix, from the 2x2 spectral factor of
/// (-y, u) driven by (r, e).
Eigen::MatrixXd compute_Rbar_analytic(const LoopSystem& sys, std::size_t n, std::size_t grid_size);

/// Truncated true ARX coefficients: a from the series of 1/H, b from G/H.
ArxEstimate true_arx_truncation(const TransferFunction& G, const TransferFunction& H, std::size_t n);

/// theta_o read off G = L/F, zero-padded to the structure's orders.
ThetaParams true_theta(const TransferFunction& G, const ModelStructure& ms);

/// Q_n' [T_n R_bar^-1 T_n']^-1 Q_n at the truth, for finite n.
Eigen::MatrixXd compute_Mbar_finite_n(const LoopSystem& sys, std::size_t n, const ModelStructure& ms,
                                      std::size_t grid_size);

/// ||theta_hat - theta_true||^2 over all stacked parameters.
double mse_metric(const ThetaParams& theta_hat, const ThetaParams& theta_true);

/// 100 (1 - ||g_o - g_hat|| / ||g_o - mean(g_o)||).
double fit_metric(std::span<const double> g_hat, std::span<const double> g_true);

/// Impulse-response length at which both responses have tail energy beyond
/// it below 1e-9 ||g_true|| (doubling from 64; unstable estimates only use
/// the true response's length).
std::size_t fit_impulse_length(const TransferFunction& G_hat, const TransferFunction& G_true);

/// FIT between two models over fit_impulse_length().
double fit_between(const TransferFunction& G_hat, const TransferFunction& G_true);

/// Dense M, then `key,value` rows for the scalar fields.
void write_covariance_csv(std::ostream& os, const CovarianceReport& report);

}  // namespace wnsf
