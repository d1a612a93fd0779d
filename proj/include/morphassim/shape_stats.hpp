/// @file shape_stats.hpp
/// @brief Subspace dissimilarities, Mantel permutation tests, classical MDS,
///        geometry encodings and statistical shape model sampling.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace morphassim {

/// Hausdorff-style subspace distance on raw column sets:
/// d_H² = max over both directions of the worst column-wise relative
/// projection residual, projectors built from the thin QR of the other
/// matrix. Always in [0, 1]. Throws SchemaError on zero columns.
double hausdorff_subspace(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Grassmann distance √(Σᵢ arccos²(σᵢ)) with σᵢ the singular values of AᵀB
/// clamped to [0,1]. Inputs must have the same column count; when
/// `orthonormalize` is set they are replaced by a thin-QR basis first,
/// otherwise non-orthonormal inputs are rejected.
double grassmann_subspace(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          bool orthonormalize = false);

enum class DissimilarityMetric { Encoding, Phi, Hausdorff, Grassmann };

std::string metric_name(DissimilarityMetric metric);

/// Symmetric pairwise-distance matrix with zero diagonal.
struct DissimilarityMatrix {
    Eigen::MatrixXd d;
    DissimilarityMetric metric = DissimilarityMetric::Encoding;
};

/// Pairwise distances over the items. Encoding/Phi items are flattened
/// vectors compared in the Euclidean norm; Hausdorff/Grassmann items are
/// snapshot matrices (Grassmann inputs are orthonormalized via thin QR).
DissimilarityMatrix dissimilarity_matrix(const std::vector<Eigen::MatrixXd>& items,
                                         DissimilarityMetric metric);

struct MantelResult {
    double r_m = 0.0;     ///< Pearson correlation of the centered triangles
    double p_value = 1.0; ///< (1 + #{permuted r ≥ observed}) / (1 + n_perm)
};

/// Mantel permutation test. Both matrices are double-centered, the
/// correlation is taken over strict-upper-triangle entries, and rows+columns
/// of the second matrix are permuted jointly. Deterministic given the seed.
/// Throws NumericalError when either centered triangle has zero variance.
MantelResult mantel_test(const DissimilarityMatrix& d1, const DissimilarityMatrix& d2,
                         int n_perm = 999, std::uint64_t seed = 0);

/// Classical MDS: B = −½·J(D∘D)J, top-k eigenpairs, coordinates V·√Λ with
/// negative eigenvalues clamped to zero. Requires k ≤ n−1.
Eigen::MatrixXd mds_embed(const DissimilarityMatrix& d, int k);

/// Per-vertex distance to the closest centerline point (pointwise metric).
Eigen::VectorXd centerline_encoding(const Eigen::MatrixX3d& mapped_vertices,
                                    const Eigen::MatrixX3d& centerline);

/// Linear statistical shape model over centerline tubes (coordinates+radius).
struct SsmModel {
    Eigen::MatrixXd mean;    ///< n_cntrl×4: x, y, z, radius
    Eigen::MatrixXd modes;   ///< (4·n_cntrl)×k, one flattened mode per column
    Eigen::VectorXd scales;  ///< per-mode scale factors, length k

    void validate() const;
};

/// S̃ = S_mean + unflatten(P·(scales ∘ b)); rows flatten point-major
/// (x, y, z, radius per centerline point). Throws SchemaError when the
/// coefficient length differs from the mode count.
Eigen::MatrixXd ssm_sample(const SsmModel& model, const Eigen::VectorXd& b);

/// Convenience overload: draws b from a seeded standard normal.
Eigen::MatrixXd ssm_sample(const SsmModel& model, std::uint64_t seed);

}  // namespace morphassim
