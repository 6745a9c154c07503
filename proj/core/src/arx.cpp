#include "wnsf/arx.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "wnsf/error.hpp"
#include "wnsf/io.hpp"

namespace wnsf {

ArxRegression build_regressors(const TimeSeriesDataset& data, std::size_t n, bool known_initial) {
    data.validate();
    if (n == 0) throw ShapeError("ARX order must be at least 1");
    const std::size_t N = data.size();
    const std::size_t start = known_initial ? 1 : n + 1;
    if (N < start) {
        throw InsufficientDataError("ARX order " + std::to_string(n) + " needs more than " + std::to_string(n) +
                                    " samples, got " + std::to_string(N));
    }
    const std::size_t rows = N - start + 1;
    const auto n_idx = static_cast<Eigen::Index>(n);

    ArxRegression reg;
    reg.start = start;
    reg.regressors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), 2 * n_idx);
    reg.target.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t t = start - 1 + row;  // 0-based sample index
        const auto r = static_cast<Eigen::Index>(row);
        reg.target(r) = data.y[t];
        const std::size_t lags = std::min(n, t);
        for (std::size_t k = 1; k <= lags; ++k) {
            reg.regressors(r, static_cast<Eigen::Index>(k - 1)) = -data.y[t - k];
            reg.regressors(r, n_idx + static_cast<Eigen::Index>(k - 1)) = data.u[t - k];
        }
    }
    return reg;
}

std::size_t default_arx_order(std::size_t sample_count) {
    const auto cube = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(sample_count))));
    return std::max<std::size_t>(1, std::min<std::size_t>(2 * cube, 200));
}

ArxEstimate ArxEstimate::from_coefficients(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size() || a.size() == 0) throw ShapeError("ARX a and b blocks must have equal, positive length");
    ArxEstimate est;
    est.n = static_cast<std::size_t>(a.size());
    est.eta.resize(2 * a.size());
    est.eta << a, b;
    est.R = Eigen::MatrixXd::Identity(2 * a.size(), 2 * a.size());
    return est;
}

ArxEstimate estimate_arx(const TimeSeriesDataset& data, std::size_t n, const ArxOptions& options) {
    data.validate();
    const std::size_t N = data.size();
    if (n == 0) throw ShapeError("ARX order must be at least 1");
    if (N <= 2 * n) {
        throw InsufficientDataError("ARX order " + std::to_string(n) + " needs N > " + std::to_string(2 * n) +
                                    " samples, got " + std::to_string(N));
    }
    if (options.ridge < 0.0) throw ConfigError("ridge must be nonnegative");

    ArxRegression reg = build_regressors(data, n, options.known_initial);
    const Eigen::Index rows = reg.regressors.rows();
    const Eigen::Index cols = reg.regressors.cols();
    const double scale = 1.0 / static_cast<double>(N);

    Eigen::MatrixXd A = std::move(reg.regressors);
    Eigen::VectorXd rhs = reg.target;
    if (options.ridge > 0.0) {
        // Augmented rows sqrt(ridge N) I turn the QR solve into the ridge solution.
        A.conservativeResize(rows + cols, Eigen::NoChange);
        A.bottomRows(cols) = std::sqrt(options.ridge * static_cast<double>(N)) * Eigen::MatrixXd::Identity(cols, cols);
        rhs.conservativeResize(rows + cols);
        rhs.tail(cols).setZero();
    }

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::MatrixXd upper = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();

    ArxEstimate est;
    est.n = n;
    est.sample_count = N;
    est.ridge = options.ridge;
    est.R = scale * (upper.transpose() * upper);
    est.R = 0.5 * (est.R + est.R.transpose()).eval();

    Eigen::LLT<Eigen::MatrixXd> llt(est.R);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    est.condition_estimate = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(est.condition_estimate <= kConditionLimit)) {
        throw RankDeficiencyError("ARX normal-equation matrix is rank deficient (condition estimate " +
                                      format_number(est.condition_estimate) + ")",
                                  est.condition_estimate);
    }

    est.eta = qr.solve(rhs);

    const Eigen::VectorXd residual = reg.target - A.topRows(rows) * est.eta;
    est.sigma2_hat = residual.squaredNorm() / static_cast<double>(rows - cols);
    return est;
}

void write_arx_csv(std::ostream& os, const ArxEstimate& est) {
    os << "n,sigma2_hat\n" << est.n << ',' << format_number(est.sigma2_hat) << '\n';
    for (std::size_t k = 0; k < est.n; ++k) os << "a_" << (k + 1) << ',' << format_number(est.a()(static_cast<Eigen::Index>(k))) << '\n';
    for (std::size_t k = 0; k < est.n; ++k) os << "b_" << (k + 1) << ',' << format_number(est.b()(static_cast<Eigen::Index>(k))) << '\n';
}

ArxEstimate read_arx_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || io::split_csv_line(line) != std::vector<std::string>{"n", "sigma2_hat"}) {
        throw ConfigError("ARX CSV must start with header 'n,sigma2_hat'");
    }
    if (!std::getline(is, line)) throw ConfigError("ARX CSV is missing its value row");
    const auto head = io::split_csv_line(line);
    if (head.size() != 2) throw ConfigError("ARX CSV value row needs two fields");
    const auto n = io::parse_int(head[0]);
    if (n < 1) throw ConfigError("ARX CSV has invalid order");
    Eigen::VectorXd a(n), b(n);
    std::vector<bool> seen(2 * static_cast<std::size_t>(n), false);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = io::split_csv_line(line);
        if (f.size() != 2 || f[0].size() < 3 || (f[0][0] != 'a' && f[0][0] != 'b') || f[0][1] != '_') {
            throw ConfigError("bad ARX CSV row '" + line + "'");
        }
        const auto k = io::parse_int(std::string_view(f[0]).substr(2));
        if (k < 1 || k > n) throw ConfigError("ARX CSV index out of range in '" + line + "'");
        const bool is_a = f[0][0] == 'a';
        (is_a ? a : b)(k - 1) = io::parse_double(f[1]);
        seen[static_cast<std::size_t>((is_a ? 0 : n) + k - 1)] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw ConfigError("ARX CSV is missing coefficients");
    ArxEstimate est = ArxEstimate::from_coefficients(a, b);
    est.sigma2_hat = io::parse_double(head[1]);
    return est;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) os << ',';
            os << format_number(m(i, j));
        }
        os << '\n';
    }
}

}  // namespace wnsf
