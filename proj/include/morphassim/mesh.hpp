/// @file mesh.hpp
/// @brief Labeled triangulated-surface data model, region bookkeeping,
///        angle-weighted normals, midpoint refinement and geometric
///        utilities shared by the registration and metric layers.
///
/// Region labels live on faces; a vertex's region set is the union over its
/// incident faces, which is what makes ring sets such as OUTLET_k ∩ WALL
/// expressible (a single per-vertex label could not represent them).
#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace morphassim {

/// Exactly six region ids.
enum class RegionId : int {
    Wall = 0,
    Inlet = 1,
    Outlet1 = 2,
    Outlet2 = 3,
    Outlet3 = 4,
    Outlet4 = 5,
};

constexpr std::array<RegionId, 6> kAllRegions = {RegionId::Wall,    RegionId::Inlet,
                                                 RegionId::Outlet1, RegionId::Outlet2,
                                                 RegionId::Outlet3, RegionId::Outlet4};

/// JSON label string ("wall", "inlet", "outlet1".."outlet4") for a region.
std::string region_name(RegionId r);
/// Inverse of region_name; throws SchemaError on unknown labels.
RegionId region_from_name(const std::string& name);

struct LabeledSurfaceMesh {
    Eigen::MatrixX3d vertices;           ///< n_p x 3, meters
    Eigen::MatrixX3i faces;              ///< n_f x 3 vertex-index triples
    std::vector<RegionId> face_labels;   ///< one region id per face
    Eigen::MatrixX3d centerline;         ///< n_cntrl x 3, meters (may be empty)
    std::vector<double> radii;           ///< optional, empty or length n_cntrl

    Eigen::Index n_vertices() const { return vertices.rows(); }
    Eigen::Index n_faces() const { return faces.rows(); }
};

/// A single region or a ring intersection (WALL ∩ OUTLET_k / WALL ∩ INLET).
struct RegionSelector {
    RegionId primary;
    std::optional<RegionId> also;  ///< when set: vertices in both regions

    static RegionSelector single(RegionId r) { return {r, std::nullopt}; }
    static RegionSelector ring(RegionId a, RegionId b) { return {a, b}; }
};

/// Validates invariants (index bounds, distinct face indices, finite
/// coordinates, label count, degenerate faces). Throws SchemaError.
void validate_mesh(const LabeledSurfaceMesh& mesh);

/// Loads the JSON mesh format; see README for the schema.
LabeledSurfaceMesh load_surface_mesh(const std::string& path);

/// Writes the JSON mesh format with full double round-trip precision.
void save_surface_mesh(const std::string& path, const LabeledSurfaceMesh& mesh);

/// Angle-weighted unit vertex normals: at each vertex the incident face
/// normals are summed weighted by the triangle's interior angle at that
/// vertex (arccos of the normalized edge dot product) and normalized.
/// Throws NumericalError on zero-area faces or a zero resultant.
Eigen::MatrixX3d vertex_normals(const LabeledSurfaceMesh& mesh);

/// Sorted indices of the vertices whose region set contains all ids
/// requested by the selector. Empty result is legal.
std::vector<int> region_vertex_ids(const LabeledSurfaceMesh& mesh, const RegionSelector& sel);

/// Positions of region_vertex_ids(mesh, sel) as rows.
Eigen::MatrixX3d region_points(const LabeledSurfaceMesh& mesh, const RegionSelector& sel);

/// One midpoint (1->4) subdivision per level; child faces inherit the
/// parent's label; centerline and radii are copied unchanged.
LabeledSurfaceMesh subdivide_midpoint(const LabeledSurfaceMesh& mesh, int levels);

/// Exact maximum pairwise Euclidean distance. Throws SchemaError on an
/// empty set.
double mesh_diameter(const Eigen::MatrixX3d& points);

/// Total area of all faces (helper shared by tests and biomarkers).
double surface_area(const LabeledSurfaceMesh& mesh);
/// Total area of the faces labeled r.
double region_area(const LabeledSurfaceMesh& mesh, RegionId r);

}  // namespace morphassim
