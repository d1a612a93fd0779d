/// @file rbf_transport.hpp
/// @brief Thin-plate-spline interpolation of registration maps and
///        pushforward/pullback of fields between registered domains.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "morphassim/warnings.hpp"

namespace morphassim {

/// Scattered-data interpolant with local thin-plate fits.
///
/// Each query is answered from its k nearest centers with the kernel
/// φ(r) = r²·ln r (φ(0)=0), a full linear polynomial tail (1,x,y,z) and the
/// standard orthogonality side conditions. Values may be target positions
/// (a deformation map), displacements, or any per-center field.
struct RbfMap {
    Eigen::MatrixX3d centers;  ///< interpolation nodes (n×3, distinct)
    Eigen::MatrixXd values;    ///< per-center data (n×d)
    int k = 30;                ///< local neighborhood size
    std::string kernel = "tps-r2lnr";
};

/// Validates and wraps the data. Throws SchemaError on non-finite input,
/// row-count mismatch, k out of range, or duplicate centers.
RbfMap fit_rbf_map(const Eigen::MatrixX3d& centers, const Eigen::MatrixXd& values, int k = 30);

/// Evaluates the map at each query row; returns nq×d values.
/// Throws NumericalError (with the query index) when a local system is
/// singular, e.g. for coplanar degenerate neighborhoods.
Eigen::MatrixXd rbf_interpolate(const RbfMap& map, const Eigen::MatrixX3d& queries);

/// A sampled field: position → value vector (dimension fixed across calls).
using FieldFn = std::function<Eigen::VectorXd(const Eigen::Vector3d&)>;

/// Pushforward g∘φ⁻¹ of a source-domain field onto target sample points.
/// `inverse_map` interpolates target positions → source positions; g is
/// sampled at the mapped points.
Eigen::MatrixXd pushforward_field(const FieldFn& g, const RbfMap& inverse_map,
                                  const Eigen::MatrixX3d& target_points);

/// Pullback g∘φ of a target-domain field onto source sample points.
/// `forward_map` interpolates source positions → target positions.
Eigen::MatrixXd pullback_field(const FieldFn& g, const RbfMap& forward_map,
                               const Eigen::MatrixX3d& source_points);

/// Map file: little-endian u64 header length, JSON header (kernel, k, rows,
/// value columns), then centers and values as f64 LE row-major blobs.
void save_rbf_map(const std::string& path, const RbfMap& map);
RbfMap load_rbf_map(const std::string& path);

}  // namespace morphassim
