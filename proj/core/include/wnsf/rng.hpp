#pragma once

#include <cstdint>
#include <random>

namespace wnsf {

/// Engine behind every stochastic signal in the library.
using Engine = std::mt19937_64;

/// Purpose tags for per-run stream derivation.
enum class StreamPurpose : std::uint64_t {
    reference = 1,
    noise = 2,
    noise_model = 3,
};

/// One splitmix64 step.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Independent child seed for (base seed, run index, purpose):
/// splitmix64(splitmix64(splitmix64(base) ^ run) ^ purpose).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run, StreamPurpose purpose) noexcept;

}  // namespace wnsf
