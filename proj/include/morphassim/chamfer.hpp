/// @file chamfer.hpp
/// @brief Chamfer distance between point clouds and the mesh-aware
///        region-wise variant used as the registration data term.
#pragma once

#include <Eigen/Dense>

#include "morphassim/mesh.hpp"
#include "morphassim/warnings.hpp"

namespace morphassim {

struct ChamferConfig {
    double lambda_n = 5e-5;  ///< weight of the normal-alignment term
};

/// Symmetric Chamfer distance with unsquared Euclidean norms:
///   (1/|X|)·Σ_x min_y ‖x−y‖ + (1/|Y|)·Σ_y min_x ‖y−x‖.
/// Nearest neighbors come from the exact k-d tree. Throws SchemaError on an
/// empty cloud.
double chamfer(const Eigen::MatrixX3d& X, const Eigen::MatrixX3d& Y);

/// O(n²) reference evaluation, kept as the oracle the index is checked
/// against.
double chamfer_bruteforce(const Eigen::MatrixX3d& X, const Eigen::MatrixX3d& Y);

/// Region-wise modified Chamfer between a (possibly deformed) source mesh S
/// and a target mesh T. Sum of:
///   (a) chamfer on the WALL point clouds,
///   (b) lambda_n · [ (1/n_{p,S})·Σ_{x∈S wall} (1−|n_x·n*_{T,x}|) + symmetric ],
///       normalized by the FULL cloud cardinalities n_{p,S}, n_{p,T},
///   (c) chamfer on each OUTLET_k cap cloud and on the INLET cloud,
///   (d) chamfer on each ring OUTLET_k∩WALL and INLET∩WALL.
/// A region present on neither/one mesh contributes zero and emits a
/// structured warning. Throws SchemaError when either WALL cloud is empty.
double chamfer_star(const LabeledSurfaceMesh& S, const LabeledSurfaceMesh& T,
                    const ChamferConfig& cfg, WarningLog* log = nullptr);

}  // namespace morphassim
