/// @file biomarkers.hpp
/// @brief Hemodynamic wall biomarkers from P1 velocity fields: per-face wall
///        shear stress, its time average (TWSS) and the oscillatory shear
///        index (OSI) over an eight-instant cycle.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "morphassim/tetmesh.hpp"

namespace morphassim {

/// Shear traction on one WALL boundary face.
struct WallTraction {
    int face = -1;          ///< row into mesh.boundary_faces
    double area = 0.0;      ///< face area, m^2
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();  ///< outward unit normal
    Eigen::Vector3d tau = Eigen::Vector3d::Zero();     ///< tangential shear, Pa
};

/// Computes the wall shear stress per WALL face from the owning tet's
/// constant P1 Jacobian J (J_kl = du_k/dx_l):
///   tau = mu (I - n n^T) J n,
/// the tangential part of the normal derivative of the velocity. The outward
/// normal points away from the owning tet. Throws SchemaError when u is not
/// a 3 n_v vector or the mesh has no WALL faces.
std::vector<WallTraction> wall_shear_stress(const TetMesh& mesh, const Eigen::VectorXd& u,
                                            double mu);

/// Cycle statistics per wall face.
struct WssStatistics {
    std::vector<int> faces;   ///< face ids (shared across the series)
    Eigen::VectorXd areas;    ///< per-face areas
    Eigen::MatrixX3d twss;    ///< time-averaged shear vector per face
    Eigen::VectorXd osi;      ///< oscillatory shear index per face, in [0, 1/2]
};

/// Averages an eight-instant series:
///   twss = (1/8) sum_i tau_i,
///   osi  = 1/2 (1 - ||mean tau|| / mean ||tau||),  0 when the denominator is 0.
/// Throws SchemaError unless exactly 8 samples with consistent faces are given.
WssStatistics twss_osi(const std::vector<std::vector<WallTraction>>& series);

}  // namespace morphassim
