#include "wnsf/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "wnsf/error.hpp"
#include "wnsf/io.hpp"

namespace wnsf {

// --- model structure / parameters ------------------------------------------

void ModelStructure::validate() const {
    if (ml < 1) throw ShapeError("numerator order m_l must be at least 1");
    if (mf < 0 || mc < 0 || md < 0) throw ShapeError("model orders must be nonnegative");
}

int ModelStructure::max_order() const noexcept { return std::max({mf, ml, mc, md}); }

Eigen::VectorXd ThetaParams::stacked() const {
    Eigen::VectorXd v(f.size() + l.size() + c.size() + d.size());
    v << f, l, c, d;
    return v;
}

Eigen::VectorXd ThetaParams::dynamic() const {
    Eigen::VectorXd v(f.size() + l.size());
    v << f, l;
    return v;
}

ThetaParams ThetaParams::from_stacked(const Eigen::VectorXd& v, const ModelStructure& ms) {
    if (v.size() != ms.size()) {
        throw ShapeError("parameter vector has " + std::to_string(v.size()) + " entries, structure needs " +
                         std::to_string(ms.size()));
    }
    ThetaParams p;
    Eigen::Index at = 0;
    p.f = v.segment(at, ms.mf);
    at += ms.mf;
    p.l = v.segment(at, ms.ml);
    at += ms.ml;
    p.c = v.segment(at, ms.mc);
    at += ms.mc;
    p.d = v.segment(at, ms.md);
    return p;
}

ModelStructure ThetaParams::structure() const {
    return ModelStructure{static_cast<int>(f.size()), static_cast<int>(l.size()), static_cast<int>(c.size()),
                          static_cast<int>(d.size())};
}

namespace {

Polynomial with_lead(double lead, const Eigen::VectorXd& tail) {
    std::vector<double> c(static_cast<std::size_t>(tail.size()) + 1);
    c[0] = lead;
    for (Eigen::Index k = 0; k < tail.size(); ++k) c[static_cast<std::size_t>(k) + 1] = tail(k);
    return Polynomial(std::move(c));
}

}  // namespace

Polynomial ThetaParams::L() const { return with_lead(0.0, l); }
Polynomial ThetaParams::F() const { return with_lead(1.0, f); }
Polynomial ThetaParams::C() const { return with_lead(1.0, c); }
Polynomial ThetaParams::D() const { return with_lead(1.0, d); }

TransferFunction ThetaParams::dynamic_model() const { return TransferFunction(L(), F()); }
TransferFunction ThetaParams::noise_model() const { return TransferFunction(C(), D()); }

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::step2: return "step2";
        case Stage::step3: return "step3";
        case Stage::iterated: return "iterated";
    }
    return "unknown";
}

// --- Toeplitz constructions --------------------------------------------------

Eigen::MatrixXd toeplitz_from_series(std::span<const double> x, Eigen::Index rows, Eigen::Index cols) {
    if (cols > rows) {
        throw ShapeError("Toeplitz matrix needs cols <= rows, got " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (rows < 0 || cols < 0) throw ShapeError("Toeplitz dimensions must be nonnegative");
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(rows, cols);
    const auto len = static_cast<Eigen::Index>(x.size());
    for (Eigen::Index j = 0; j < cols; ++j) {
        const Eigen::Index last = std::min(rows - j, len);
        for (Eigen::Index k = 0; k < last; ++k) T(j + k, j) = x[static_cast<std::size_t>(k)];
    }
    return T;
}

std::vector<double> a_sequence(const ArxEstimate& eta) {
    std::vector<double> seq(eta.n + 1);
    seq[0] = 1.0;
    for (std::size_t k = 0; k < eta.n; ++k) seq[k + 1] = eta.eta(static_cast<Eigen::Index>(k));
    return seq;
}

std::vector<double> b_sequence(const ArxEstimate& eta) {
    std::vector<double> seq(eta.n + 1);
    seq[0] = 0.0;
    for (std::size_t k = 0; k < eta.n; ++k) seq[k + 1] = eta.eta(static_cast<Eigen::Index>(eta.n + k));
    return seq;
}

namespace {

void require_order(std::size_t n, const ModelStructure& ms) {
    ms.validate();
    if (static_cast<int>(n) < ms.max_order()) {
        throw ShapeError("ARX order " + std::to_string(n) + " is below the model order " +
                         std::to_string(ms.max_order()));
    }
}

std::vector<double> vec_of(const Polynomial& p) { return p.vec(); }

}  // namespace

Eigen::MatrixXd build_Q(const ArxEstimate& eta, const ModelStructure& ms) {
    require_order(eta.n, ms);
    const auto n = static_cast<Eigen::Index>(eta.n);
    const auto A = a_sequence(eta);
    const auto B = b_sequence(eta);
    Eigen::MatrixXd Q(n, ms.mf + ms.ml);
    Q.leftCols(ms.mf) = -toeplitz_from_series(B, n, ms.mf);
    Q.rightCols(ms.ml) = toeplitz_from_series(A, n, ms.ml);
    return Q;
}

Eigen::MatrixXd build_T(const ThetaParams& theta, Eigen::Index n) {
    const ModelStructure ms = theta.structure();
    if (n < std::max<Eigen::Index>(ms.mf, ms.ml)) throw ShapeError("order n is below the model order");
    Eigen::MatrixXd T(n, 2 * n);
    T.leftCols(n) = -toeplitz_from_series(vec_of(theta.L()), n, n);
    T.rightCols(n) = toeplitz_from_series(vec_of(theta.F()), n, n);
    return T;
}

Eigen::MatrixXd build_Q_full(const ArxEstimate& eta, const ModelStructure& ms) {
    require_order(eta.n, ms);
    const auto n = static_cast<Eigen::Index>(eta.n);
    const auto A = a_sequence(eta);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2 * n, ms.size());
    // noise block: a_k = -sum_j c_j a_{k-j} + d_k
    Q.block(0, ms.mf + ms.ml, n, ms.mc) = -toeplitz_from_series(A, n, ms.mc);
    Q.block(0, ms.mf + ms.ml + ms.mc, n, ms.md) = Eigen::MatrixXd::Identity(n, ms.md);
    // dynamic block: b_k = -sum_j f_j b_{k-j} + sum_j l_j a_{k-j}
    Q.block(n, 0, n, ms.dynamic_size()) = build_Q(eta, ms);
    return Q;
}

Eigen::MatrixXd build_T_full(const ThetaParams& theta, Eigen::Index n) {
    const ModelStructure ms = theta.structure();
    if (n < ms.max_order()) throw ShapeError("order n is below the model order");
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    T.topLeftCorner(n, n) = toeplitz_from_series(vec_of(theta.C()), n, n);
    T.bottomLeftCorner(n, n) = -toeplitz_from_series(vec_of(theta.L()), n, n);
    T.bottomRightCorner(n, n) = toeplitz_from_series(vec_of(theta.F()), n, n);
    return T;
}

// --- least-squares kernels ---------------------------------------------------

namespace {

struct LsSolution {
    Eigen::VectorXd x;
    double condition = 1.0;
};

double condition_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double rc = llt.rcond();
    return rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
}

/// min ||y - Z x|| by Householder QR, refusing ill-posed problems.
LsSolution solve_ls(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y) {
    LsSolution sol;
    if (Z.cols() == 0) {
        sol.x = Eigen::VectorXd(0);
        return sol;
    }
    Eigen::MatrixXd gram = Z.transpose() * Z;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    sol.condition = condition_from_llt(llt);
    if (!(sol.condition <= kConditionLimit)) {
        throw IdentifiabilityError("reduced least-squares problem is not identifiable (condition estimate " +
                                       format_number(sol.condition) +
                                       "); check that L and F share no common factors",
                                   sol.condition);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
    sol.x = qr.solve(y);
    return sol;
}

Eigen::VectorXd b_hat(const ArxEstimate& eta) { return eta.b(); }

/// Cholesky factor of T R^-1 T' for the semi-parametric weighting.
struct SemiWeighting {
    Eigen::LLT<Eigen::MatrixXd> inner;
    double condition = 1.0;
};

SemiWeighting semi_weighting(const ThetaParams& theta, const Eigen::MatrixXd& R) {
    const Eigen::Index twice_n = R.rows();
    if (R.cols() != twice_n || twice_n % 2 != 0) throw ShapeError("R must be square with even dimension");
    const Eigen::Index n = twice_n / 2;
    const Eigen::MatrixXd T = build_T(theta, n);

    Eigen::LLT<Eigen::MatrixXd> r_llt(R);
    if (r_llt.info() != Eigen::Success) {
        throw WeightingBreakdownError("weighting breakdown: R is not positive definite",
                                      std::numeric_limits<double>::infinity());
    }
    // X = L_R^-1 T' so that X'X = T R^-1 T'.
    const Eigen::MatrixXd X = r_llt.matrixL().solve(T.transpose());
    Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(n, n);
    inner.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    inner = inner.selfadjointView<Eigen::Lower>();

    SemiWeighting w;
    w.inner.compute(inner);
    w.condition = condition_from_llt(w.inner);
    if (!(w.condition <= kConditionLimit)) {
        throw WeightingBreakdownError("weighting breakdown: T R^-1 T' is numerically singular (condition estimate " +
                                          format_number(w.condition) + ")",
                                      w.condition);
    }
    return w;
}

WnsfResult semi_step3(const ArxEstimate& eta, const ThetaParams& theta_prev, const ModelStructure& ms,
                      const Step3Options& options) {
    const Eigen::MatrixXd Q = build_Q(eta, ms);
    const Eigen::VectorXd b = b_hat(eta);

    WnsfResult res;
    res.stage = Stage::step3;
    res.iterations = 1;
    res.converged = true;
    LsSolution sol;
    if (options.identity_weighting) {
        sol = solve_ls(Q, b);
        res.weighting_condition = 1.0;
    } else {
        const Eigen::MatrixXd& R = options.R_override ? *options.R_override : eta.R;
        if (R.rows() != static_cast<Eigen::Index>(2 * eta.n)) throw ShapeError("R does not match the ARX order");
        const SemiWeighting w = semi_weighting(ThetaParams{theta_prev.f, theta_prev.l, {}, {}}, R);
        const auto Lw = w.inner.matrixL();
        sol = solve_ls(Lw.solve(Q), Lw.solve(b));
        res.weighting_condition = w.condition;
    }
    res.theta = ThetaParams::from_stacked(sol.x, ModelStructure{ms.mf, ms.ml, 0, 0});
    return res;
}

WnsfResult full_step3(const ArxEstimate& eta, const ThetaParams& theta_prev, const ModelStructure& ms,
                      const Step3Options& options) {
    const auto n = static_cast<Eigen::Index>(eta.n);
    const Eigen::MatrixXd Q = build_Q_full(eta, ms);

    WnsfResult res;
    res.stage = Stage::step3;
    res.iterations = 1;
    res.converged = true;
    LsSolution sol;
    if (options.identity_weighting) {
        sol = solve_ls(Q, eta.eta);
        res.weighting_condition = 1.0;
    } else {
        const Eigen::MatrixXd& R = options.R_override ? *options.R_override : eta.R;
        if (R.rows() != 2 * n) throw ShapeError("R does not match the ARX order");
        if (theta_prev.structure().mc != ms.mc || theta_prev.structure().md != ms.md ||
            theta_prev.structure().mf != ms.mf || theta_prev.structure().ml != ms.ml) {
            throw ShapeError("previous estimate does not match the model structure");
        }
        Eigen::LLT<Eigen::MatrixXd> r_llt(R);
        const double r_cond = condition_from_llt(r_llt);
        if (!std::isfinite(r_cond)) {
            throw WeightingBreakdownError("weighting breakdown: R is not positive definite", r_cond);
        }
        // W = T^-T R T^-1; T is unit lower triangular, so W^{1/2} = L_R' T^-1.
        const Eigen::MatrixXd T = build_T_full(theta_prev, n);
        const Eigen::MatrixXd T_inv =
            T.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(2 * n, 2 * n));
        if (!T_inv.allFinite()) {
            throw WeightingBreakdownError("weighting breakdown: T is not invertible", std::numeric_limits<double>::infinity());
        }
        const Eigen::MatrixXd upper = r_llt.matrixU();
        const Eigen::MatrixXd root = upper * T_inv;
        // cond(W) equals cond(T R^-1 T'); estimated from the Cholesky factor of W.
        const Eigen::MatrixXd W = root.transpose() * root;
        Eigen::LLT<Eigen::MatrixXd> w_llt(W);
        res.weighting_condition = condition_from_llt(w_llt);
        if (!(res.weighting_condition <= kConditionLimit)) {
            throw WeightingBreakdownError(
                "weighting breakdown: T R^-1 T' is numerically singular (condition estimate " +
                    format_number(res.weighting_condition) + ")",
                res.weighting_condition);
        }
        sol = solve_ls(root * Q, root * eta.eta);
    }
    res.theta = ThetaParams::from_stacked(sol.x, ms);
    return res;
}

double relative_change(const Eigen::VectorXd& next, const Eigen::VectorXd& prev) {
    const double denom = prev.norm();
    const double diff = (next - prev).norm();
    return denom > 0.0 ? diff / denom : diff;
}

template <class Step3>
WnsfResult iterate_from(WnsfResult current, const IterationOptions& options, Step3&& step3) {
    if (options.max_iter < 1) throw ConfigError("max_iter must be at least 1");
    current.converged = false;
    for (int k = 1; k <= options.max_iter; ++k) {
        WnsfResult next;
        try {
            next = step3(current.theta);
        } catch (const WeightingBreakdownError& e) {
            current.converged = false;
            current.diagnostic = e.what();
            return current;
        } catch (const IdentifiabilityError& e) {
            current.converged = false;
            current.diagnostic = e.what();
            return current;
        }
        const double change = relative_change(next.theta.stacked(), current.theta.stacked());
        next.stage = Stage::iterated;
        next.iterations = k;
        next.converged = change < options.tol;
        current = std::move(next);
        if (current.converged) break;
    }
    return current;
}

WnsfResult noise_step2(const ArxEstimate& eta, const ModelStructure& ms) {
    const auto n = static_cast<Eigen::Index>(eta.n);
    const Eigen::MatrixXd Q = build_Q_full(eta, ms);
    const Eigen::MatrixXd Qn = Q.block(0, ms.dynamic_size(), n, ms.noise_size());
    const LsSolution sol = solve_ls(Qn, eta.a());
    WnsfResult res;
    res.theta.c = sol.x.head(ms.mc);
    res.theta.d = sol.x.tail(ms.md);
    return res;
}

}  // namespace

WnsfResult step2_ls(const ArxEstimate& eta, const ModelStructure& ms) {
    require_order(eta.n, ms);
    const ModelStructure dyn{ms.mf, ms.ml, 0, 0};
    const LsSolution sol = solve_ls(build_Q(eta, dyn), b_hat(eta));
    WnsfResult res;
    res.theta = ThetaParams::from_stacked(sol.x, dyn);
    res.stage = Stage::step2;
    res.iterations = 0;
    res.converged = true;
    if (!ms.semi_parametric()) {
        // Without weighting the noise and dynamic blocks decouple.
        const WnsfResult noise = noise_step2(eta, ms);
        res.theta.c = noise.theta.c;
        res.theta.d = noise.theta.d;
    }
    return res;
}

Eigen::MatrixXd build_weighting(const ThetaParams& theta, const Eigen::MatrixXd& R) {
    const SemiWeighting w = semi_weighting(theta, R);
    const Eigen::Index n = R.rows() / 2;
    Eigen::MatrixXd W = w.inner.solve(Eigen::MatrixXd::Identity(n, n));
    return 0.5 * (W + W.transpose());
}

WnsfResult step3_wls(const ArxEstimate& eta, const ThetaParams& theta_prev, const ModelStructure& ms,
                     const Step3Options& options) {
    require_order(eta.n, ms);
    if (ms.semi_parametric()) return semi_step3(eta, theta_prev, ms, options);
    return full_step3(eta, theta_prev, ms, options);
}

WnsfResult iterate_wnsf(const ArxEstimate& eta, const ModelStructure& ms, const IterationOptions& options) {
    WnsfResult start = step2_ls(eta, ms);
    return iterate_from(std::move(start), options,
                        [&](const ThetaParams& prev) { return step3_wls(eta, prev, ms); });
}

WnsfResult fully_parametric_wnsf(const ArxEstimate& eta, const ModelStructure& ms, const IterationOptions& options) {
    return iterate_wnsf(eta, ms, options);
}

WnsfResult estimate_wnsf(const ArxEstimate& eta, const ModelStructure& ms, bool iterate,
                         const IterationOptions& options) {
    if (iterate) return iterate_wnsf(eta, ms, options);
    const WnsfResult ls = step2_ls(eta, ms);
    return step3_wls(eta, ls.theta, ms);
}

// --- CSV -----------------------------------------------------------------------

void write_wnsf_csv(std::ostream& os, const WnsfResult& result) {
    os << "stage,iterations,converged\n"
       << to_string(result.stage) << ',' << result.iterations << ',' << (result.converged ? "true" : "false") << '\n';
    auto rows = [&os](const char* label, const Eigen::VectorXd& v) {
        for (Eigen::Index k = 0; k < v.size(); ++k) os << label << '_' << (k + 1) << ',' << format_number(v(k)) << '\n';
    };
    rows("f", result.theta.f);
    rows("l", result.theta.l);
    rows("c", result.theta.c);
    rows("d", result.theta.d);
}

WnsfResult read_wnsf_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) ||
        io::split_csv_line(line) != std::vector<std::string>{"stage", "iterations", "converged"}) {
        throw ConfigError("WNSF CSV must start with header 'stage,iterations,converged'");
    }
    if (!std::getline(is, line)) throw ConfigError("WNSF CSV is missing its value row");
    const auto head = io::split_csv_line(line);
    if (head.size() != 3) throw ConfigError("WNSF CSV value row needs three fields");
    WnsfResult res;
    if (head[0] == "step2") res.stage = Stage::step2;
    else if (head[0] == "step3") res.stage = Stage::step3;
    else if (head[0] == "iterated") res.stage = Stage::iterated;
    else throw ConfigError("unknown stage '" + head[0] + "'");
    res.iterations = static_cast<int>(io::parse_int(head[1]));
    res.converged = head[2] == "true";

    std::vector<double> f, l, c, d;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto fields = io::split_csv_line(line);
        if (fields.size() != 2 || fields[0].size() < 3 || fields[0][1] != '_') {
            throw ConfigError("bad WNSF CSV row '" + line + "'");
        }
        std::vector<double>* dst = nullptr;
        switch (fields[0][0]) {
            case 'f': dst = &f; break;
            case 'l': dst = &l; break;
            case 'c': dst = &c; break;
            case 'd': dst = &d; break;
            default: throw ConfigError("bad WNSF CSV label '" + fields[0] + "'");
        }
        const auto k = io::parse_int(std::string_view(fields[0]).substr(2));
        if (k != static_cast<long long>(dst->size()) + 1) throw ConfigError("WNSF CSV rows out of order");
        dst->push_back(io::parse_double(fields[1]));
    }
    auto to_vec = [](const std::vector<double>& v) {
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    res.theta = ThetaParams{to_vec(f), to_vec(l), to_vec(c), to_vec(d)};
    return res;
}

}  // namespace wnsf
