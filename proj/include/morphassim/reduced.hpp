/// @file reduced.hpp
/// @brief Randomized SVD bases, reconstruction errors and local basis
///        selection over snapshot pools.
#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace morphassim {

/// Orthonormal reduced basis with its singular values.
struct ReducedBasis {
    Eigen::MatrixXd phi;    ///< d×r, ‖ΦᵀΦ − I‖_max < 1e-10
    Eigen::VectorXd sigma;  ///< length r, non-increasing, nonnegative
};

/// Halko-style randomized SVD: Gaussian sketch of width r+oversample,
/// `power_iters` subspace iterations with re-orthonormalization, then a
/// dense SVD of the projected matrix. Deterministic given the seed.
/// Throws SchemaError when r exceeds min(rows, cols) or inputs are invalid.
ReducedBasis rsvd(const Eigen::MatrixXd& X, int r, int oversample = 10, int power_iters = 2,
                  std::uint64_t seed = 0);

enum class FieldKind { Velocity, Pressure };

/// Relative L² reconstruction error of a DOF vector in the basis.
/// Velocity: ‖u−ΦΦᵀu‖/‖u‖. Pressure: ‖p−ΦΦᵀp‖/‖p−p̄‖ with p̄ the mean.
/// Throws NumericalError on a zero denominator (zero velocity or constant
/// pressure) and SchemaError on dimension mismatch.
double reconstruction_error(const Eigen::VectorXd& field, const ReducedBasis& basis,
                            FieldKind kind);

/// Basis from the snapshots of the ⌈r/n_T⌉ nearest training shapes.
/// `dissimilarity_row` holds the distances from the test shape to each
/// training shape; `pool` stores one d×n_T block per shape, concatenated
/// column-wise. Distance ties break toward the lower shape index.
ReducedBasis local_basis(const Eigen::VectorXd& dissimilarity_row, const Eigen::MatrixXd& pool,
                         int n_T, int r, int oversample = 10, int power_iters = 2,
                         std::uint64_t seed = 0);

}  // namespace morphassim
