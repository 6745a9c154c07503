#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>

#include "wnsf/lti.hpp"

namespace wnsf {

/// Regression problem y_t = phi_t' eta + e_t for an order-n ARX model, with
/// phi_t = [-y_{t-1} ... -y_{t-n}, u_{t-1} ... u_{t-n}]'.
struct ArxRegression {
    Eigen::MatrixXd regressors;  // one row per sample t = start..N
    Eigen::VectorXd target;      // y_t
    std::size_t start = 0;       // 1-based index of the first row's sample
};

/// Build the ARX regressors. Rows start at t = n + 1, or at t = 1 with
/// zero-padded lags when `known_initial` is set.
ArxRegression build_regressors(const TimeSeriesDataset& data, std::size_t n, bool known_initial);

struct ArxOptions {
    bool known_initial = false;
    /// Ridge term added to R (reported in the estimate when nonzero).
    double ridge = 0.0;
};

/// High-order ARX least-squares estimate.
struct ArxEstimate {
    std::size_t n = 0;
    /// (a_1..a_n, b_1..b_n)
    Eigen::VectorXd eta;
    /// Averaged Gram matrix (1/N) sum phi_t phi_t'.
    Eigen::MatrixXd R;
    double sigma2_hat = 0.0;
    double condition_estimate = 1.0;
    double ridge = 0.0;
    std::size_t sample_count = 0;

    auto a() const { return eta.head(static_cast<Eigen::Index>(n)); }
    auto b() const { return eta.tail(static_cast<Eigen::Index>(n)); }

    /// Estimate assembled from known coefficients (no data). R defaults to identity.
    static ArxEstimate from_coefficients(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
};

/// Step 1: least-squares ARX fit via Householder QR of the regressor matrix.
/// Throws InsufficientDataError when N <= 2n and RankDeficiencyError when the
/// normal-equation matrix has condition estimate above kConditionLimit.
ArxEstimate estimate_arx(const TimeSeriesDataset& data, std::size_t n, const ArxOptions& options = {});

/// n = min(2 floor(N^{1/3}), 200).
std::size_t default_arx_order(std::size_t sample_count);

/// CSV: `n,sigma2_hat` header, value row, then `a_k,<v>` and `b_k,<v>` rows.
void write_arx_csv(std::ostream& os, const ArxEstimate& est);
ArxEstimate read_arx_csv(std::istream& is);
/// Dense matrix CSV (no header), one row per line.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m);

}  // namespace wnsf
