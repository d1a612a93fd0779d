/// @file tetmesh.hpp
/// @brief Volumetric P1 tetrahedral mesh: cached element geometry, boundary
///        bookkeeping with region labels, point location, JSON exchange and
///        structured/refined mesh construction for studies and demos.
#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "morphassim/mesh.hpp"

namespace morphassim {

/// Tetrahedral mesh with precomputed per-element data.
///
/// DOF layouts used throughout the FEM layer:
///   scalar fields: one value per vertex (d_p = n_vertices),
///   vector fields: interleaved, DOF(vertex j, component a) = 3j + a
///   (d_u = 3 n_vertices).
struct TetMesh {
    Eigen::MatrixX3d vertices;              ///< n_v x 3, meters
    Eigen::MatrixX4i tets;                  ///< n_t x 4, positively oriented
    Eigen::MatrixX3i boundary_faces;        ///< n_bf x 3 vertex triples
    std::vector<RegionId> boundary_labels;  ///< one region per boundary face
    /// Optional named face-id lists (indices into boundary_faces), e.g.
    /// measurement cross-sections for pressure drops.
    std::map<std::string, std::vector<int>> sections;

    // Cached element geometry (filled by build_tet_mesh / finalize_tet_mesh).
    Eigen::VectorXd volumes;  ///< n_t, all > 0
    /// Constant P1 shape-function gradients: grads[k].row(a) = grad N_a on tet k.
    std::vector<Eigen::Matrix<double, 4, 3>> grads;
    Eigen::VectorXd diameters;  ///< n_t, element diameter h_K (longest edge)

    Eigen::Index n_vertices() const { return vertices.rows(); }
    Eigen::Index n_tets() const { return tets.rows(); }
};

/// Validates connectivity and geometry, then fills the cached volumes,
/// gradients and diameters. Throws SchemaError on index violations, labels of
/// the wrong length, boundary faces not matching exactly one tet, or
/// non-finite coordinates; NumericalError on non-positive tet volumes.
void finalize_tet_mesh(TetMesh& mesh);

/// Convenience constructor: moves the arrays in and finalizes.
TetMesh build_tet_mesh(Eigen::MatrixX3d vertices, Eigen::MatrixX4i tets,
                       Eigen::MatrixX3i boundary_faces, std::vector<RegionId> boundary_labels,
                       std::map<std::string, std::vector<int>> sections = {});

/// JSON exchange: {"vertices", "tets", "boundary_faces", "boundary_labels",
/// optional "sections"}. Throws IoError on unreadable/unwritable files and
/// SchemaError on malformed content.
TetMesh load_tet_mesh(const std::string& path);
void save_tet_mesh(const std::string& path, const TetMesh& mesh);

/// True per vertex when the vertex lies on some boundary face.
std::vector<bool> boundary_vertex_mask(const TetMesh& mesh);

/// Largest pairwise vertex distance (domain diameter).
double mesh_diameter(const TetMesh& mesh);

/// Result of point location: owning tet and the four barycentric coordinates.
struct PointLocation {
    Eigen::Index tet = -1;
    Eigen::Vector4d bary = Eigen::Vector4d::Zero();
};

/// Spatial index for repeated point location queries on one mesh.
class TetLocator {
  public:
    explicit TetLocator(const TetMesh& mesh);

    /// Tet containing p (barycentric coordinates >= -tol), or nullopt.
    std::optional<PointLocation> locate(const Eigen::Vector3d& p, double tol = 1e-10) const;

    /// Always answers: the tet whose barycentric coordinates violate the
    /// inside condition the least (exact containment when p is inside).
    /// Evaluating P1 fields with the returned (unclamped) coordinates
    /// extrapolates linearly outside the domain.
    PointLocation locate_nearest(const Eigen::Vector3d& p) const;

  private:
    const TetMesh& mesh_;
    std::vector<std::vector<Eigen::Index>> vertex_tets_;  ///< incident tets per vertex
    // Defined in tetmesh.cpp; holds the vertex k-d tree.
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

/// Evaluates a nodal field at p using the given location. Scalar fields
/// (n_v values) yield one number; vector fields (3 n_v) three. Throws
/// SchemaError on any other length.
Eigen::VectorXd sample_p1(const TetMesh& mesh, const Eigen::VectorXd& nodal,
                          const PointLocation& loc);

/// Structured tetrahedralization of the box [0,L1]x[0,L2]x[0,L3] with
/// n1 x n2 x n3 cells, six tets per cell. Boundary labels: x=0 -> Inlet,
/// x=L1 -> Outlet1, other box sides -> Wall. Sections "sec_in" (x=0 faces)
/// and "sec_out" (x=L1 faces) are populated.
TetMesh make_box_mesh(int n1, int n2, int n3,
                      const Eigen::Vector3d& lengths = Eigen::Vector3d::Ones());

/// Uniform midpoint (red) refinement: every tet splits into 8 via edge
/// midpoints, every boundary face into 4. Labels are inherited; section face
/// ids are remapped to the four children. Halves the mesh size h.
TetMesh refine_tet_mesh(const TetMesh& mesh);

}  // namespace morphassim
