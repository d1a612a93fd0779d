/// @file fmat_io.hpp
/// @brief Binary dense-matrix exchange format "FMAT1".
///
/// Layout: bytes 0-7 ASCII "FMAT1\0\0\0"; bytes 8-15 u64 little-endian row
/// count; bytes 16-23 u64 column count; then rows*cols f64 little-endian
/// values in column-major order. Used for snapshots, bases, dissimilarity
/// matrices, measurement vectors and registration images.
#pragma once

#include <Eigen/Dense>
#include <string>

namespace morphassim {

/// Reads an FMAT1 file. Throws IoError on missing/short files and
/// SchemaError on a bad magic header.
Eigen::MatrixXd read_fmat(const std::string& path);

/// Writes an FMAT1 file. Throws IoError when the file cannot be written.
void write_fmat(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace morphassim
