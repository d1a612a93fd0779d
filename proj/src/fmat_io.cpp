/// @file fmat_io.cpp
/// @brief FMAT1 binary matrix reader/writer.
#include "morphassim/fmat_io.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "morphassim/errors.hpp"

namespace morphassim {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'M', 'A', 'T', '1', '\0', '\0', '\0'};

// The format is little-endian by definition; we serialize through explicit
// byte shuffling so the code is correct independently of host endianness.
void put_u64(std::ofstream& os, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64(std::ifstream& is) {
    std::array<unsigned char, 8> b{};
    is.read(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

}  // namespace

Eigen::MatrixXd read_fmat(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_fmat: cannot open '" + path + "'");
    std::array<char, 8> magic{};
    is.read(magic.data(), 8);
    if (!is || std::memcmp(magic.data(), kMagic.data(), 8) != 0)
        throw SchemaError("read_fmat: '" + path + "' is not an FMAT1 file");
    const std::uint64_t rows = get_u64(is);
    const std::uint64_t cols = get_u64(is);
    if (!is) throw IoError("read_fmat: '" + path + "' truncated header");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::array<unsigned char, 8> b{};
            is.read(reinterpret_cast<char*>(b.data()), 8);
            std::uint64_t u = 0;
            for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(k)]) << (8 * k);
            double d;
            std::memcpy(&d, &u, 8);
            m(i, j) = d;
        }
    }
    if (!is) throw IoError("read_fmat: '" + path + "' truncated payload");
    return m;
}

void write_fmat(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("write_fmat: cannot open '" + path + "' for writing");
    os.write(kMagic.data(), 8);
    put_u64(os, static_cast<std::uint64_t>(m.rows()));
    put_u64(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::uint64_t u;
            const double d = m(i, j);
            std::memcpy(&u, &d, 8);
            std::array<unsigned char, 8> b{};
            for (int k = 0; k < 8; ++k) b[static_cast<std::size_t>(k)] = static_cast<unsigned char>(u >> (8 * k));
            os.write(reinterpret_cast<const char*>(b.data()), 8);
        }
    }
    if (!os) throw IoError("write_fmat: failed writing '" + path + "'");
}

}  // namespace morphassim
