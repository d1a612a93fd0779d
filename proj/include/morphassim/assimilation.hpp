/// @file assimilation.hpp
/// @brief PBDW velocity reconstruction from voxel-averaged observations with
///        a heteroscedastic noise model: observation operators, noise
///        covariance assembly, the two-stage solve and its posterior
///        covariance factors.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <vector>

#include "morphassim/tetmesh.hpp"
#include "morphassim/warnings.hpp"

namespace morphassim {

/// Axis-aligned voxel grid; only voxels whose center lies inside the domain
/// are admitted.
struct VoxelGrid {
    double edge = 2e-3;  ///< voxel edge length, meters
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3i extents = Eigen::Vector3i::Zero();  ///< voxel counts per axis
    Eigen::MatrixX3d centers;                           ///< admitted voxel centers
};

/// Covers the mesh bounding box with voxels of the given edge and admits
/// those with centers inside the domain. Throws SchemaError when edge <= 0
/// or no voxel center falls inside.
VoxelGrid make_voxel_grid(const TetMesh& mesh, double edge = 2e-3);

/// Voxel observation operators: for each admitted voxel and each velocity
/// component, the average of the P1 point-evaluation functionals at the 8
/// voxel corners and the center, restricted to sample points inside the
/// domain and normalized by the inside count.
struct VoxelObservations {
    Eigen::SparseMatrix<double> rows;  ///< 3M x d_u coefficient rows
    Eigen::MatrixX3d centers;          ///< M centers that survived assembly
};

/// Builds the rows for the given centers (normally grid.centers). A voxel
/// with zero inside sample points is excluded with a warning and removed
/// from the returned center list.
VoxelObservations build_voxel_observations(const TetMesh& mesh, const Eigen::MatrixX3d& centers,
                                           double edge, WarningLog* log = nullptr);

/// Coefficients of u -> sum_K |K| tr(grad u |_K) = integral of div u,
/// exact for P1 fields.
Eigen::VectorXd divergence_row(const TetMesh& mesh);

/// Stacked measurement operator and derived matrices. Z's columns are the
/// l2 Riesz representers (coefficient rows transposed); the final column is
/// the divergence observation, so m = 3 M_voxels + 1.
struct ObservationSystem {
    Eigen::SparseMatrix<double> z;  ///< d_u x m
    Eigen::MatrixXd phi;            ///< d_u x r reduced basis
    Eigen::MatrixXd l;              ///< m x r, L = Z^T Phi
    Eigen::MatrixXd k;              ///< m x m, K = Z^T Z
    Eigen::MatrixXd w;              ///< K + I

    Eigen::Index m() const { return z.cols(); }
    Eigen::Index r() const { return phi.cols(); }
    Eigen::Index dim() const { return z.rows(); }
};

/// Assembles Z = [voxel rows; divergence row]^T and the derived L, K, W.
ObservationSystem build_observation_system(const VoxelObservations& obs,
                                           const Eigen::VectorXd& div_row,
                                           const Eigen::MatrixXd& phi);

/// Same from an arbitrary stacked row matrix (m x d_u), for synthetic tests.
ObservationSystem build_observation_system(const Eigen::SparseMatrix<double>& rows,
                                           const Eigen::MatrixXd& phi);

/// Applies the measurement operator: y = Z^T u (length m).
Eigen::VectorXd observe(const ObservationSystem& obs, const Eigen::VectorXd& u);

/// Heteroscedastic noise model parameters. Optional entries resolve at
/// assembly time: sigma_div2 -> (u_bar * 1e-2)^2, sigma_floor2 ->
/// (u_bar / snr_ho)^2 * 1e-4, delta -> the voxel edge, l_t -> diam(Omega)/12.
struct NoiseModel {
    double snr_ho = 10.0;
    double snr_he = 0.5;
    double eps2 = 0.1;  ///< kernel jitter
    std::optional<double> sigma_div2;
    std::optional<double> sigma_floor2;
    std::optional<double> delta;  ///< boundary-layer thickness, meters
    std::optional<double> l_t;    ///< kernel length scale
};

/// Named (SNR-ho, SNR-he) presets: calm (10, 0.5), noisy (0.4, 0.1),
/// extreme (0.2, 0.05).
NoiseModel noise_preset(const std::string& name);

/// Assembled m x m noise covariance with the resolved parameters.
/// Voxels are heteroscedastic when their center is closer than delta to the
/// WALL boundary surface. Homoscedastic rows carry (u_bar/snr_ho)^2 on the
/// diagonal; heteroscedastic rows the correlated multiplicative model
/// (u_bar/snr_he)^2 P C P^T plus the isotropic floor; the last diagonal
/// entry is sigma_div2.
struct NoiseCovariance {
    Eigen::MatrixXd s;  ///< m x m, symmetric positive definite
    double u_bar = 0.0;
    double sigma_div2 = 0.0;
    double sigma_floor2 = 0.0;
    double delta = 0.0;
    double l_t = 0.0;
    std::vector<int> heteroscedastic;  ///< indices of he-voxels
};

/// observed: the 3M voxel measurements (the divergence entry is not part of
/// the magnitude statistics). u_bar = mean over voxels of the observed
/// 3-vector norm. Direction blocks of P come from those same observations;
/// a zero observed vector contributes a zero block.
NoiseCovariance build_noise_covariance(const TetMesh& mesh, const Eigen::MatrixX3d& centers,
                                       double voxel_edge, const NoiseModel& model,
                                       const Eigen::VectorXd& observed);

/// Two-stage PBDW solution. With options.with_covariance the linear factors
///   H_z  = (L^T S^-1 W^-1 L)^-1 L^T S^-1 W^-1
///   H_eta= (K S^-1 K + K S^-1)^-1 K S^-1
///   H_u  = Phi H_z + Z H_eta - Z H_eta L H_z
/// are retained and noise_trace = tr(H_u S H_u^T).
struct PbdwSolution {
    Eigen::VectorXd z;
    Eigen::VectorXd eta;
    Eigen::VectorXd u_hat;
    Eigen::MatrixXd h_z;    ///< r x m, empty unless requested
    Eigen::MatrixXd h_eta;  ///< m x m, empty unless requested
    Eigen::MatrixXd h_u;    ///< d_u x m, empty unless requested
    double noise_trace = 0.0;
};

struct PbdwOptions {
    bool with_covariance = false;
};

/// Solves the two stages in order:
///   z   = (L^T S^-1 W^-1 L)^-1 L^T S^-1 W^-1 y,
///   eta = (K S^-1 K + K S^-1)^-1 K S^-1 (y - L z),
///   u   = Phi z + Z eta.
/// Throws NumericalError (with a condition estimate) when a normal matrix is
/// singular, SchemaError on dimension mismatches.
PbdwSolution pbdw_solve(const ObservationSystem& obs, const Eigen::MatrixXd& s,
                        const Eigen::VectorXd& y, const PbdwOptions& options = {});

/// Posterior state covariance Sigma_u = H_u S H_u^T and the noise-trace
/// diagnostic. Requires a solution computed with_covariance; the full matrix
/// is only formed for d_u <= 10^4 (SchemaError beyond).
struct PbdwCovariance {
    Eigen::MatrixXd sigma_u;
    double noise_trace = 0.0;
};

PbdwCovariance pbdw_state_covariance(const ObservationSystem& obs, const Eigen::MatrixXd& s,
                                     const PbdwSolution& solution);

/// Drops measurements marked unusable by an infinite variance: rows i with
/// S(i,i) = +inf are removed from the rows, the data and the covariance
/// (the infinite-variance limit of the estimator).
struct FilteredObservations {
    Eigen::SparseMatrix<double> rows;  ///< kept rows, m' x d_u
    Eigen::VectorXd y;
    Eigen::MatrixXd s;
    std::vector<int> kept;  ///< original indices of the surviving rows
};

FilteredObservations filter_infinite_variance(const Eigen::SparseMatrix<double>& rows,
                                              const Eigen::VectorXd& y,
                                              const Eigen::MatrixXd& s);

}  // namespace morphassim
