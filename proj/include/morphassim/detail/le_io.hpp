/// @file le_io.hpp
/// @brief Little-endian scalar I/O on byte streams (internal helper).
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace morphassim::detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
    std::array<unsigned char, 8> b{};
    is.read(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

inline void put_f64_le(std::ostream& os, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    put_u64_le(os, u);
}

inline double get_f64_le(std::istream& is) {
    const std::uint64_t u = get_u64_le(is);
    double d;
    std::memcpy(&d, &u, 8);
    return d;
}

}  // namespace morphassim::detail
