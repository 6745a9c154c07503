#include "wnsf/rng.hpp"

namespace wnsf {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run, StreamPurpose purpose) noexcept {
    return splitmix64(splitmix64(splitmix64(base) ^ run) ^ static_cast<std::uint64_t>(purpose));
}

}  // namespace wnsf
