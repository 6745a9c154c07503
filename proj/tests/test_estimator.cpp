#include <doctest.h>

#include <limits>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "wnsf/analysis.hpp"
#include "wnsf/arx.hpp"
#include "wnsf/error.hpp"
#include "wnsf/estimator.hpp"

using namespace wnsf;

namespace {

const TransferFunction kG{Polynomial{0.0, 1.0, 0.1}, Polynomial{1.0, -0.5, 0.75}};
const TransferFunction kH{Polynomial{1.0, 0.7}, Polynomial{1.0, -0.9}};
const ModelStructure kMs{2, 2, 0, 0};

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ThetaParams params(std::initializer_list<double> f, std::initializer_list<double> l,
                   std::initializer_list<double> c = {}, std::initializer_list<double> d = {}) {
    return ThetaParams{vec(f), vec(l), vec(c), vec(d)};
}

// F*B - L*A over lags 1..n, straight from the convolution definition.
Eigen::VectorXd dynamic_residual(const ThetaParams& th, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index n = a.size();
    std::vector<double> A{1.0}, B{0.0}, F{1.0}, L{0.0};
    for (Eigen::Index k = 0; k < n; ++k) A.push_back(a(k)), B.push_back(b(k));
    for (Eigen::Index k = 0; k < th.f.size(); ++k) F.push_back(th.f(k));
    for (Eigen::Index k = 0; k < th.l.size(); ++k) L.push_back(th.l(k));
    const auto fb = oracle::convolve(F, B), la = oracle::convolve(L, A);
    Eigen::VectorXd r(n);
    for (Eigen::Index k = 1; k <= n; ++k) r(k - 1) = fb[k] - la[k];
    return r;
}

// C*A - D over lags 1..n.
Eigen::VectorXd noise_residual(const ThetaParams& th, const Eigen::VectorXd& a) {
    const Eigen::Index n = a.size();
    std::vector<double> A{1.0}, C{1.0};
    for (Eigen::Index k = 0; k < n; ++k) A.push_back(a(k));
    for (Eigen::Index k = 0; k < th.c.size(); ++k) C.push_back(th.c(k));
    const auto ca = oracle::convolve(C, A);
    Eigen::VectorXd r(n);
    for (Eigen::Index k = 1; k <= n; ++k) r(k - 1) = ca[k] - (k <= th.d.size() ? th.d(k - 1) : 0.0);
    return r;
}

TimeSeriesDataset noise_free_fir(double l1, double l2, std::size_t N) {
    TimeSeriesDataset d;
    d.u = gaussian_white(77, N, 1.0);
    d.y.assign(N, 0.0);
    for (std::size_t t = 0; t < N; ++t) {
        if (t >= 1) d.y[t] += l1 * d.u[t - 1];
        if (t >= 2) d.y[t] += l2 * d.u[t - 2];
    }
    return d;
}

TimeSeriesDataset fig1_data(std::uint64_t seed, std::size_t N) {
    return simulate_closed_loop(kG, kH, TransferFunction::gain(1.0), gaussian_white(seed, N, 1.0),
                                gaussian_white(seed + 500, N, 1.0));
}

}  // namespace

TEST_CASE("toeplitz_from_series") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    Eigen::MatrixXd expect(3, 2);
    expect << 1, 0, 2, 1, 3, 2;
    CHECK(toeplitz_from_series(x, 3, 2) == expect);
    const std::vector<double> one{1.0};
    CHECK(toeplitz_from_series(one, 2, 2) == Eigen::MatrixXd::Identity(2, 2));
    CHECK_THROWS_AS(toeplitz_from_series(x, 2, 3), ShapeError);
    const std::vector<double> y{0.3, -1.0, 2.0, 0.5, 7.0};
    const auto t = toeplitz_from_series(y, 7, 4);
    CHECK(t == oracle::toeplitz(y, 7, 4));
    for (Eigen::Index i = 0; i < 7; ++i) CHECK(t(i, 0) == (i < 5 ? y[static_cast<std::size_t>(i)] : 0.0));
}

TEST_CASE("build_Q and build_T") {
    SUBCASE("two-lag example") {
        const auto eta = ArxEstimate::from_coefficients(vec({0.3, 0.1}), vec({0.7, -0.2}));
        Eigen::MatrixXd expect(2, 2);
        expect << 0, 1, -0.7, 0.3;
        CHECK(build_Q(eta, ModelStructure{1, 1, 0, 0}) == expect);
        CHECK_THROWS_AS(build_Q(eta, ModelStructure{3, 1, 0, 0}), ShapeError);
    }
    SUBCASE("T for a unit delay") {
        Eigen::MatrixXd expect(2, 4);
        expect << 0, 0, 1, 0, -1, 0, 0, 1;
        CHECK(build_T(params({}, {1.0}), 2) == expect);
    }
    SUBCASE("monic-only F gives an identity block") {
        const auto T = build_T(params({}, {0.4, -0.1}), 6);
        CHECK(T.rightCols(6) == Eigen::MatrixXd::Identity(6, 6));
    }
}

TEST_CASE("null-space identity at the truth") {
    SUBCASE("first-order output error, every n") {
        const TransferFunction G(Polynomial{0.0, 0.8}, Polynomial{1.0, -0.6});
        const ModelStructure ms{1, 1, 0, 0};
        const auto th = true_theta(G, ms);
        for (std::size_t n : {1u, 2u, 5u, 30u}) {
            const auto eta = true_arx_truncation(G, TransferFunction{}, n);
            const Eigen::VectorXd res = eta.b() - build_Q(eta, ms) * th.stacked();
            CHECK(res.norm() <= 1e-15);
        }
    }
    SUBCASE("closed-loop plant at n = 100") {
        const auto eta = true_arx_truncation(kG, kH, 100);
        const auto th = true_theta(kG, kMs);
        CHECK((eta.b() - build_Q(eta, kMs) * th.stacked()).norm() < 1e-8);
    }
    SUBCASE("truncation is exact row by row for every n") {
        // The identity involves only lags 1..n of each series, so it has no
        // truncation tail; the exponential bound degenerates to rounding error.
        const auto th = true_theta(kG, kMs);
        for (std::size_t n : {20u, 40u, 80u}) {
            const auto eta = true_arx_truncation(kG, kH, n);
            CHECK((eta.b() - build_Q(eta, kMs) * th.stacked()).norm() <= 1e-12 * eta.b().norm());
        }
    }
}

TEST_CASE("residual bilinearity on an FIR truth") {
    // A = 1 - 0.4 q^-1, B = 0.9 q^-1 + 0.3 q^-2 exactly, so G = B/A and H = 1/A.
    const std::size_t n = 5;
    const Eigen::VectorXd a0 = vec({-0.4, 0, 0, 0, 0}), b0 = vec({0.9, 0.3, 0, 0, 0});
    const auto th = params({-0.4}, {0.9, 0.3});
    const ModelStructure ms{1, 2, 0, 0};
    const auto eta0 = ArxEstimate::from_coefficients(a0, b0);
    CHECK((eta0.b() - build_Q(eta0, ms) * th.stacked()).norm() == 0.0);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd delta(2 * n);
        for (auto& v : delta) v = nd(rng);
        const auto eta = ArxEstimate::from_coefficients(a0 + delta.head(n), b0 + delta.tail(n));
        const Eigen::VectorXd lhs = eta.b() - build_Q(eta, ms) * th.stacked();
        const Eigen::VectorXd rhs = build_T(th, n) * delta;
        const Eigen::VectorXd sym = dynamic_residual(th, eta.a(), eta.b());
        CHECK((lhs - rhs).norm() <= 1e-14 * (1 + lhs.norm()));
        CHECK((lhs - sym).norm() <= 1e-14 * (1 + lhs.norm()));
    }
}

TEST_CASE("fully parametric residual identity") {
    const Eigen::Index n = 6;
    // H = (1 + 0.5 q^-1)/(1 - 0.2 q^-1) is not FIR in A, so build an exact
    // truncated truth with C A = D on lags 1..n and F B = L A.
    const auto th = params({-0.3}, {1.0, 0.2}, {0.5}, {-0.2});
    const auto a_true = oracle::long_division({1.0, -0.2}, {1.0, 0.5}, n + 1);
    const auto b_true = oracle::long_division(oracle::convolve({0.0, 1.0, 0.2}, {1.0, -0.2}),
                                              oracle::convolve({1.0, -0.3}, {1.0, 0.5}), n + 1);
    Eigen::VectorXd a0(n), b0(n);
    for (Eigen::Index k = 0; k < n; ++k) a0(k) = a_true[k + 1], b0(k) = b_true[k + 1];
    const ModelStructure ms{1, 2, 1, 1};
    const auto T = build_T_full(th, n);
    REQUIRE(T.rows() == 2 * n);
    // Unit lower triangular by construction.
    CHECK(T.diagonal() == Eigen::VectorXd::Ones(2 * n));
    CHECK(T.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero());

    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd delta(2 * n);
        for (auto& v : delta) v = nd(rng);
        const auto eta = ArxEstimate::from_coefficients(a0 + delta.head(n), b0 + delta.tail(n));
        const Eigen::VectorXd stacked = eta.eta - build_Q_full(eta, ms) * th.stacked();
        Eigen::VectorXd sym(2 * n);
        sym << noise_residual(th, eta.a()), dynamic_residual(th, eta.a(), eta.b());
        CHECK((stacked - sym).norm() <= 1e-13 * (1 + sym.norm()));
        CHECK((stacked - T * delta).norm() <= 1e-13 * (1 + sym.norm()));
    }
}

TEST_CASE("step2_ls") {
    SUBCASE("noise-free FIR recovered exactly") {
        const auto eta = estimate_arx(noise_free_fir(0.8, -0.35, 400), 2);
        const auto res = step2_ls(eta, ModelStructure{0, 2, 0, 0});
        CHECK(res.stage == Stage::step2);
        CHECK(res.iterations == 0);
        CHECK(std::abs(res.theta.l(0) - 0.8) < 1e-10);
        CHECK(std::abs(res.theta.l(1) + 0.35) < 1e-10);
    }
    SUBCASE("exact truncated ARX gives the truth") {
        const auto res = step2_ls(true_arx_truncation(kG, kH, 100), kMs);
        CHECK((res.theta.stacked() - true_theta(kG, kMs).stacked()).norm() < 1e-6);
    }
    SUBCASE("common factors are not identifiable") {
        const TransferFunction G(Polynomial{0.0, 1.0}, Polynomial{1.0, -0.5});
        CHECK_THROWS_AS(step2_ls(true_arx_truncation(G, TransferFunction{}, 20), kMs), IdentifiabilityError);
    }
    SUBCASE("input scaling equivariance") {
        const auto eta = estimate_arx(fig1_data(31, 2000), 20);
        const double alpha = 3.0;
        const auto scaled = ArxEstimate::from_coefficients(eta.a(), eta.b() / alpha);
        const auto r1 = step2_ls(eta, kMs), r2 = step2_ls(scaled, kMs);
        CHECK((r1.theta.f - r2.theta.f).norm() <= 1e-12 * r1.theta.f.norm());
        CHECK((r1.theta.l / alpha - r2.theta.l).norm() <= 1e-12 * r2.theta.l.norm());
    }
}

TEST_CASE("build_weighting") {
    SUBCASE("hand example") {
        const auto W = build_weighting(params({}, {1.0}), Eigen::MatrixXd::Identity(4, 4));
        Eigen::MatrixXd expect(2, 2);
        expect << 1, 0, 0, 0.5;
        CHECK((W - expect).norm() < 1e-15);
    }
    SUBCASE("symmetric and matching a dense inverse") {
        const LoopSystem sys{kG, kH, TransferFunction::gain(1.0), 1.0, 1.0};
        const Eigen::MatrixXd R = compute_Rbar_analytic(sys, 20, 1 << 12);
        const auto th = true_theta(kG, kMs);
        const auto W = build_weighting(th, R);
        CHECK((W - W.transpose()).norm() <= 1e-10 * W.norm());
        const Eigen::MatrixXd T = build_T(th, 20);
        const Eigen::MatrixXd oracle_W = oracle::gauss_jordan_inverse(T * oracle::gauss_jordan_inverse(R) * T.transpose());
        CHECK((W - oracle_W).norm() <= 1e-8 * oracle_W.norm());
    }
}

TEST_CASE("step3_wls") {
    const auto eta = estimate_arx(fig1_data(41, 3000), 30);
    const auto ls = step2_ls(eta, kMs);
    SUBCASE("identity weighting reduces to Step 2") {
        Step3Options opt;
        opt.identity_weighting = true;
        const auto res = step3_wls(eta, ls.theta, kMs, opt);
        CHECK(res.theta.stacked() == ls.theta.stacked());
        CHECK(res.stage == Stage::step3);
    }
    SUBCASE("records the weighting condition") {
        const auto res = step3_wls(eta, ls.theta, kMs);
        CHECK(res.weighting_condition >= 1.0);
        CHECK(res.weighting_condition < kConditionLimit);
        CHECK(res.iterations == 1);
    }
    SUBCASE("noise-free fixed point") {
        const auto fir = estimate_arx(noise_free_fir(0.8, -0.35, 400), 2);
        const ModelStructure ms{0, 2, 0, 0};
        const auto s2 = step2_ls(fir, ms);
        const auto s3 = step3_wls(fir, s2.theta, ms);
        CHECK(std::abs(s3.theta.l(0) - 0.8) < 1e-10);
        CHECK(std::abs(s3.theta.l(1) + 0.35) < 1e-10);
    }
    SUBCASE("ill-conditioned R breaks the weighting") {
        Eigen::MatrixXd R = Eigen::MatrixXd::Identity(60, 60);
        R(5, 5) = 1e-15;
        R(45, 45) = 1e-15;
        Step3Options opt;
        opt.R_override = R;
        CHECK_THROWS_AS(step3_wls(eta, ls.theta, kMs, opt), WeightingBreakdownError);
    }
    SUBCASE("shape mismatches") {
        Step3Options opt;
        opt.R_override = Eigen::MatrixXd::Identity(4, 4);
        CHECK_THROWS_AS(step3_wls(eta, ls.theta, kMs, opt), ShapeError);
    }
}

TEST_CASE("iterate_wnsf") {
    SUBCASE("noise-free exact order converges in one pass") {
        const auto fir = estimate_arx(noise_free_fir(0.8, -0.35, 400), 2);
        const auto res = iterate_wnsf(fir, ModelStructure{0, 2, 0, 0});
        CHECK(res.converged);
        CHECK(res.iterations == 1);
        CHECK(res.stage == Stage::iterated);
        CHECK(std::abs(res.theta.l(0) - 0.8) < 1e-10);
    }
    SUBCASE("infinite tolerance is Algorithm 1") {
        const auto eta = estimate_arx(fig1_data(42, 2000), 20);
        const auto one = iterate_wnsf(eta, kMs, IterationOptions{100, std::numeric_limits<double>::infinity()});
        const auto alg1 = estimate_wnsf(eta, kMs, false);
        CHECK(one.iterations == 1);
        CHECK(one.theta.stacked() == alg1.theta.stacked());
    }
    SUBCASE("breakdown returns the last valid iterate") {
        auto eta = estimate_arx(fig1_data(43, 2000), 20);
        eta.R = Eigen::MatrixXd::Identity(40, 40);
        eta.R(3, 3) = 1e-16;
        eta.R(30, 30) = 1e-16;
        const auto res = iterate_wnsf(eta, kMs);
        CHECK_FALSE(res.converged);
        CHECK_FALSE(res.diagnostic.empty());
        CHECK(res.theta.stacked() == step2_ls(eta, kMs).theta.stacked());
    }
    SUBCASE("iteration limit") {
        const auto eta = estimate_arx(fig1_data(44, 1000), 20);
        const auto res = iterate_wnsf(eta, kMs, IterationOptions{1, 1e-300});
        CHECK(res.iterations == 1);
        CHECK_FALSE(res.converged);
        CHECK_THROWS(iterate_wnsf(eta, kMs, IterationOptions{0, 1e-4}));
    }
}

TEST_CASE("fully parametric WNSF") {
    SUBCASE("no noise parameters is the semi-parametric estimator") {
        const auto eta = estimate_arx(fig1_data(51, 2000), 20);
        const IterationOptions one{1, 1e-4};
        CHECK(fully_parametric_wnsf(eta, kMs, one).theta.stacked() == iterate_wnsf(eta, kMs, one).theta.stacked());
        CHECK(fully_parametric_wnsf(eta, kMs).theta.stacked() == iterate_wnsf(eta, kMs).theta.stacked());
    }
    SUBCASE("ARMA noise parameters from the exact truncation") {
        const auto eta = true_arx_truncation(kG, kH, 100);
        const ModelStructure ms{2, 2, 1, 1};
        const auto s2 = step2_ls(eta, ms);
        CHECK(std::abs(s2.theta.c(0) - 0.7) < 1e-6);
        CHECK(std::abs(s2.theta.d(0) + 0.9) < 1e-6);
        CHECK((s2.theta.dynamic() - true_theta(kG, kMs).stacked()).norm() < 1e-6);
        const auto full = fully_parametric_wnsf(eta, ms, IterationOptions{3, 1e-4});
        CHECK(std::abs(full.theta.c(0) - 0.7) < 1e-6);
        CHECK(std::abs(full.theta.d(0) + 0.9) < 1e-6);
    }
    SUBCASE("closed-loop data") {
        const auto eta = estimate_arx(fig1_data(52, 5000), 40);
        const auto res = fully_parametric_wnsf(eta, ModelStructure{2, 2, 1, 1});
        CHECK(res.theta.c.size() == 1);
        CHECK(std::abs(res.theta.c(0) - 0.7) < 0.1);
        CHECK(std::abs(res.theta.d(0) + 0.9) < 0.05);
        CHECK(res.theta.noise_model().num() == Polynomial{1.0, res.theta.c(0)});
    }
}

TEST_CASE("parameter containers") {
    const auto th = params({0.1, 0.2}, {0.3}, {0.4}, {0.5, 0.6});
    const ModelStructure ms = th.structure();
    CHECK(ms.mf == 2);
    CHECK(ms.md == 2);
    CHECK(to_std(th.stacked()) == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    CHECK(ThetaParams::from_stacked(th.stacked(), ms).stacked() == th.stacked());
    CHECK(th.F() == Polynomial{1.0, 0.1, 0.2});
    CHECK(th.L() == Polynomial{0.0, 0.3});
    CHECK_THROWS_AS((ModelStructure{0, 0, 0, 0}.validate()), ShapeError);
    CHECK_THROWS_AS((ModelStructure{-1, 1, 0, 0}.validate()), ShapeError);
}

TEST_CASE("WNSF CSV round trip") {
    WnsfResult r;
    r.theta = params({0.1}, {0.3, -1e-17}, {0.25}, {});
    r.stage = Stage::iterated;
    r.iterations = 7;
    r.converged = true;
    std::stringstream ss;
    write_wnsf_csv(ss, r);
    CHECK(ss.str().rfind("stage,iterations,converged\niterated,7,true\n", 0) == 0);
    const auto back = read_wnsf_csv(ss);
    CHECK(back.stage == Stage::iterated);
    CHECK(back.iterations == 7);
    CHECK(back.converged);
    CHECK(back.theta.stacked() == r.theta.stacked());
    CHECK(back.theta.c.size() == 1);
    CHECK(back.theta.d.size() == 0);
}
