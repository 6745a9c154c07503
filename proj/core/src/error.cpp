#include "wnsf/error.hpp"

#include <array>
#include <charconv>

namespace wnsf {

std::string format_number(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), ptr);
}

}  // namespace wnsf
