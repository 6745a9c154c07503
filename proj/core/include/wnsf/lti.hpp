#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "wnsf/polynomial.hpp"

namespace wnsf {

/// Discrete-time SISO rational transfer function num(q)/den(q) with a monic
/// denominator. Stability is not enforced here; see is_stable().
class TransferFunction {
public:
    TransferFunction() = default;  // identity
    TransferFunction(Polynomial num, Polynomial den);
    explicit TransferFunction(Polynomial num) : num_(std::move(num)) {}

    static TransferFunction gain(double k) { return TransferFunction(Polynomial::constant(k)); }

    const Polynomial& num() const noexcept { return num_; }
    const Polynomial& den() const noexcept { return den_; }

    bool is_stable() const { return wnsf::is_stable(den_); }
    bool is_zero() const noexcept { return num_.is_zero(); }

    std::complex<double> at_frequency(double omega) const;

    friend bool operator==(const TransferFunction&, const TransferFunction&) = default;

private:
    Polynomial num_{};
    Polynomial den_{};
};

/// Product without pole/zero cancellation.
TransferFunction series(const TransferFunction& a, const TransferFunction& b);

/// FIR noise filter 1 + sum_{k>=1} lambda_k q^-k, applied by direct convolution.
struct FirNoiseModel {
    std::vector<double> coeffs;  // coeffs[0] == 1
};

/// Noise shaping filter H: either rational with monic numerator and
/// denominator, or a long explicit FIR.
class NoiseModelSpec {
public:
    using Kind = std::variant<TransferFunction, FirNoiseModel>;

    NoiseModelSpec() : kind_(TransferFunction{}) {}
    NoiseModelSpec(TransferFunction tf);  // NOLINT(google-explicit-constructor)
    NoiseModelSpec(FirNoiseModel fir);    // NOLINT(google-explicit-constructor)

    const Kind& kind() const noexcept { return kind_; }
    bool is_rational() const noexcept { return std::holds_alternative<TransferFunction>(kind_); }
    const TransferFunction& rational() const;
    const FirNoiseModel& fir() const;

    /// H(q) e_t with zero initial state.
    std::vector<double> apply(std::span<const double> e) const;

private:
    Kind kind_;
};

/// One experiment's aligned signals. known_initial marks data whose
/// pre-sample values are known to be zero, so regressions may start at t = 1.
struct TimeSeriesDataset {
    std::vector<double> u;
    std::vector<double> y;
    std::optional<std::vector<double>> r;
    std::optional<std::vector<double>> e;
    bool known_initial = false;

    std::size_t size() const noexcept { return u.size(); }
    /// Throws InvalidModelError on empty/mismatched/non-finite signals.
    void validate() const;
};

/// Direct-form II transposed filter. `state` (if given) has
/// max(deg num, deg den) entries; missing state means zero initial conditions.
std::vector<double> filter_apply(const TransferFunction& tf, std::span<const double> x,
                                 std::span<const double> state = {});

std::vector<double> impulse_response(const TransferFunction& tf, std::size_t length);

/// num(e^{i w})/den(e^{i w}) for each grid point; throws SingularFrequencyError
/// where the denominator vanishes.
std::vector<std::complex<double>> frequency_response(const TransferFunction& tf,
                                                     std::span<const double> grid);

/// Closed-loop signals u = S r - K H S e, y = G S r + H S e with
/// S = 1/(1 + K G), built by composing the rational factors symbolically.
/// Throws UnstableLoopError when 1 + K G has zeros outside the unit circle.
TimeSeriesDataset simulate_closed_loop(const TransferFunction& G, const NoiseModelSpec& H,
                                       const TransferFunction& K, std::span<const double> r,
                                       std::span<const double> e);

/// Characteristic polynomial F_G F_K + L_G L_K of the loop, normalized monic.
Polynomial closed_loop_characteristic(const TransferFunction& G, const TransferFunction& K);

/// Sensitivity S = (1 + K G)^-1. K = 0 yields exactly 1. Loops with zeros
/// outside the unit circle throw UnstableLoopError.
TransferFunction sensitivity(const TransferFunction& G, const TransferFunction& K);

// --- stochastic excitation ------------------------------------------------

/// I.i.d. N(0, variance) draws, deterministic in (seed, length, variance).
std::vector<double> gaussian_white(std::uint64_t seed, std::size_t length, double variance);

/// Random FIR noise model 1 + sum_{k=1}^{length-1} w_k e^{-0.2k} q^-k with
/// w_k ~ N(0,1) drawn from `seed`.
FirNoiseModel random_fir_noise_model(std::uint64_t seed, std::size_t length);

/// Same construction with caller-provided weights w_1..w_{L-1}.
FirNoiseModel fir_noise_from_weights(std::span<const double> weights);

/// Decay rate of the random FIR envelope.
inline constexpr double kFirNoiseDecay = 0.2;

}  // namespace wnsf
