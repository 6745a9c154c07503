#include "wnsf/lti.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wnsf/error.hpp"
#include "wnsf/rng.hpp"

namespace wnsf {

TransferFunction::TransferFunction(Polynomial num, Polynomial den)
    : num_(std::move(num)), den_(std::move(den)) {
    if (!den_.is_monic()) {
        throw InvalidModelError("transfer function denominator must be monic (leading coefficient 1), got " +
                                format_number(den_[0]));
    }
}

std::complex<double> TransferFunction::at_frequency(double omega) const {
    return num_.at_frequency(omega) / den_.at_frequency(omega);
}

TransferFunction series(const TransferFunction& a, const TransferFunction& b) {
    return TransferFunction(poly_mul(a.num(), b.num()), poly_mul(a.den(), b.den()));
}

NoiseModelSpec::NoiseModelSpec(TransferFunction tf) : kind_(std::move(tf)) {
    const auto& h = std::get<TransferFunction>(kind_);
    if (!h.num().is_monic()) throw InvalidModelError("rational noise model needs a monic numerator");
}

NoiseModelSpec::NoiseModelSpec(FirNoiseModel fir) : kind_(std::move(fir)) {
    const auto& c = std::get<FirNoiseModel>(kind_).coeffs;
    if (c.empty() || c.front() != 1.0) throw InvalidModelError("FIR noise model needs leading coefficient 1");
    for (double v : c) {
        if (!std::isfinite(v)) throw InvalidModelError("FIR noise model coefficient is not finite");
    }
}

const TransferFunction& NoiseModelSpec::rational() const {
    if (!is_rational()) throw InvalidModelError("noise model is FIR, not rational");
    return std::get<TransferFunction>(kind_);
}

const FirNoiseModel& NoiseModelSpec::fir() const {
    if (is_rational()) throw InvalidModelError("noise model is rational, not FIR");
    return std::get<FirNoiseModel>(kind_);
}

std::vector<double> NoiseModelSpec::apply(std::span<const double> e) const {
    if (is_rational()) return filter_apply(rational(), e);
    const auto& h = fir().coeffs;
    std::vector<double> out(e.size(), 0.0);
    for (std::size_t t = 0; t < e.size(); ++t) {
        const std::size_t kmax = std::min(t, h.size() - 1);
        double acc = 0.0;
        for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * e[t - k];
        out[t] = acc;
    }
    return out;
}

void TimeSeriesDataset::validate() const {
    const std::size_t n = u.size();
    if (n == 0) throw InvalidModelError("dataset is empty");
    auto check = [n](const std::vector<double>& v, const char* name) {
        if (v.size() != n) {
            throw InvalidModelError(std::string("dataset column '") + name + "' has length " +
                                    std::to_string(v.size()) + ", expected " + std::to_string(n));
        }
        for (double x : v) {
            if (!std::isfinite(x)) throw InvalidModelError(std::string("dataset column '") + name + "' is not finite");
        }
    };
    check(u, "u");
    check(y, "y");
    if (r) check(*r, "r");
    if (e) check(*e, "e");
}

std::vector<double> filter_apply(const TransferFunction& tf, std::span<const double> x,
                                 std::span<const double> state) {
    const auto& b = tf.num();
    const auto& a = tf.den();
    if (!a.is_monic()) throw InvalidModelError("filter denominator must be monic");
    const std::size_t order = std::max(b.size(), a.size()) - 1;
    if (!state.empty() && state.size() != order) {
        throw ShapeError("filter state has " + std::to_string(state.size()) + " entries, expected " +
                         std::to_string(order));
    }
    std::vector<double> z(order, 0.0);
    std::copy(state.begin(), state.end(), z.begin());

    std::vector<double> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double xt = x[t];
        const double yt = b[0] * xt + (order > 0 ? z[0] : 0.0);
        for (std::size_t i = 0; i < order; ++i) {
            const double next = i + 1 < order ? z[i + 1] : 0.0;
            z[i] = b[i + 1] * xt - a[i + 1] * yt + next;
        }
        y[t] = yt;
    }
    return y;
}

std::vector<double> impulse_response(const TransferFunction& tf, std::size_t length) {
    std::vector<double> impulse(length, 0.0);
    if (length > 0) impulse[0] = 1.0;
    return filter_apply(tf, impulse);
}

std::vector<std::complex<double>> frequency_response(const TransferFunction& tf,
                                                     std::span<const double> grid) {
    double scale = 0.0;
    for (double c : tf.den().coeffs()) scale += std::abs(c);
    std::vector<std::complex<double>> out;
    out.reserve(grid.size());
    for (double w : grid) {
        const auto den = tf.den().at_frequency(w);
        if (std::abs(den) <= 1e-12 * scale) {
            throw SingularFrequencyError("denominator vanishes at omega = " + format_number(w));
        }
        out.push_back(tf.num().at_frequency(w) / den);
    }
    return out;
}

Polynomial closed_loop_characteristic(const TransferFunction& G, const TransferFunction& K) {
    Polynomial chr = poly_mul(G.den(), K.den()) + poly_mul(G.num(), K.num());
    const double lead = chr[0];
    if (lead == 0.0) throw InvalidModelError("closed loop is ill-posed: 1 + K G has zero direct term");
    return poly_scale(chr, 1.0 / lead).trimmed();
}

namespace {

// Roots on the unit circle are tolerated here (bounded finite-horizon
// simulation); the frequency-domain routines reject them separately.
void require_stable_loop(const Polynomial& chr) {
    const auto zs = roots(chr);
    std::vector<double> bad;
    for (const auto& z : zs) {
        if (std::abs(z) > 1.0 + kStabilityMargin) bad.push_back(std::abs(z));
    }
    if (bad.empty()) return;
    std::ostringstream msg;
    msg << "closed loop is unstable; offending root moduli:";
    for (double m : bad) msg << ' ' << format_number(m);
    throw UnstableLoopError(msg.str());
}

}  // namespace

TransferFunction sensitivity(const TransferFunction& G, const TransferFunction& K) {
    if (K.is_zero() || G.is_zero()) return TransferFunction{};
    Polynomial chr = poly_mul(G.den(), K.den()) + poly_mul(G.num(), K.num());
    const double lead = chr[0];
    if (lead == 0.0) throw InvalidModelError("closed loop is ill-posed: 1 + K G has zero direct term");
    Polynomial den = poly_scale(chr, 1.0 / lead).trimmed();
    require_stable_loop(den);
    Polynomial num = poly_scale(poly_mul(G.den(), K.den()), 1.0 / lead).trimmed();
    return TransferFunction(std::move(num), std::move(den));
}

TimeSeriesDataset simulate_closed_loop(const TransferFunction& G, const NoiseModelSpec& H,
                                       const TransferFunction& K, std::span<const double> r,
                                       std::span<const double> e) {
    if (r.size() != e.size()) {
        throw ShapeError("reference and noise sequences differ in length (" + std::to_string(r.size()) + " vs " +
                         std::to_string(e.size()) + ")");
    }
    const TransferFunction S = sensitivity(G, K);
    const TransferFunction GS = series(G, S);
    const TransferFunction KS = series(K, S);

    const std::vector<double> v = H.apply(e);  // H e
    const std::vector<double> sv = filter_apply(S, v);
    const std::vector<double> ur = filter_apply(S, r);
    const std::vector<double> yr = filter_apply(GS, r);

    TimeSeriesDataset data;
    data.u.resize(r.size());
    data.y.resize(r.size());
    if (K.is_zero()) {
        for (std::size_t t = 0; t < r.size(); ++t) {
            data.u[t] = ur[t];
            data.y[t] = yr[t] + sv[t];
        }
    } else {
        const std::vector<double> ukv = filter_apply(KS, v);
        for (std::size_t t = 0; t < r.size(); ++t) {
            data.u[t] = ur[t] - ukv[t];
            data.y[t] = yr[t] + sv[t];
        }
    }
    data.r.emplace(r.begin(), r.end());
    data.e.emplace(e.begin(), e.end());
    return data;
}

std::vector<double> gaussian_white(std::uint64_t seed, std::size_t length, double variance) {
    if (!(variance > 0.0) || !std::isfinite(variance)) {
        throw InvalidModelError("white-noise variance must be positive, got " + format_number(variance));
    }
    Engine engine(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(variance));
    std::vector<double> out(length);
    for (double& x : out) x = normal(engine);
    return out;
}

FirNoiseModel fir_noise_from_weights(std::span<const double> weights) {
    FirNoiseModel fir;
    fir.coeffs.resize(weights.size() + 1);
    fir.coeffs[0] = 1.0;
    for (std::size_t k = 1; k <= weights.size(); ++k) {
        fir.coeffs[k] = weights[k - 1] * std::exp(-kFirNoiseDecay * static_cast<double>(k));
    }
    return fir;
}

FirNoiseModel random_fir_noise_model(std::uint64_t seed, std::size_t length) {
    if (length < 2) throw InvalidModelError("random FIR noise model needs length >= 2");
    const std::vector<double> w = gaussian_white(seed, length - 1, 1.0);
    return fir_noise_from_weights(w);
}

}  // namespace wnsf
