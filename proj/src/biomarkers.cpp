#include <algorithm>
#include <array>
#include <map>
#include <utility>

#include "morphassim/biomarkers.hpp"
#include "morphassim/errors.hpp"

namespace morphassim {

namespace {

/// Map from sorted vertex triple to (tet, opposite local vertex).
std::map<std::array<int, 3>, std::pair<int, int>> face_owners(const TetMesh& mesh) {
    std::map<std::array<int, 3>, std::pair<int, int>> owners;
    for (Eigen::Index t = 0; t < mesh.tets.rows(); ++t) {
        for (int skip = 0; skip < 4; ++skip) {
            std::array<int, 3> key;
            int k = 0;
            for (int a = 0; a < 4; ++a) {
                if (a != skip) {
                    key[static_cast<std::size_t>(k++)] = mesh.tets(t, a);
                }
            }
            std::sort(key.begin(), key.end());
            owners[key] = {static_cast<int>(t), mesh.tets(t, skip)};
        }
    }
    return owners;
}

}  // namespace

std::vector<WallTraction> wall_shear_stress(const TetMesh& mesh, const Eigen::VectorXd& u,
                                            double mu) {
    if (u.size() != 3 * mesh.vertices.rows()) {
        throw SchemaError("wall_shear_stress: velocity must hold 3 components per vertex");
    }
    if (!(mu > 0.0)) {
        throw SchemaError("wall_shear_stress: viscosity must be positive");
    }
    const auto owners = face_owners(mesh);

    std::vector<WallTraction> out;
    for (Eigen::Index f = 0; f < mesh.boundary_faces.rows(); ++f) {
        if (mesh.boundary_labels[static_cast<std::size_t>(f)] != RegionId::Wall) {
            continue;
        }
        std::array<int, 3> key = {mesh.boundary_faces(f, 0), mesh.boundary_faces(f, 1),
                                  mesh.boundary_faces(f, 2)};
        std::sort(key.begin(), key.end());
        const auto it = owners.find(key);
        if (it == owners.end()) {
            throw SchemaError("wall_shear_stress: wall face without an owning tet");
        }
        const int tet = it->second.first;

        const Eigen::Vector3d p0 = mesh.vertices.row(mesh.boundary_faces(f, 0));
        const Eigen::Vector3d p1 = mesh.vertices.row(mesh.boundary_faces(f, 1));
        const Eigen::Vector3d p2 = mesh.vertices.row(mesh.boundary_faces(f, 2));
        const Eigen::Vector3d cross = (p1 - p0).cross(p2 - p0);
        Eigen::Vector3d normal = cross.normalized();
        const Eigen::Vector3d opposite = mesh.vertices.row(it->second.second);
        if (normal.dot((p0 + p1 + p2) / 3.0 - opposite) < 0.0) {
            normal = -normal;
        }

        // Constant Jacobian of the P1 field on the owning tet.
        Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
        const Eigen::Matrix<double, 4, 3>& grads = mesh.grads[static_cast<std::size_t>(tet)];
        for (int a = 0; a < 4; ++a) {
            jac += u.segment<3>(3 * mesh.tets(tet, a)) * grads.row(a);
        }

        WallTraction tr;
        tr.face = static_cast<int>(f);
        tr.area = 0.5 * cross.norm();
        tr.normal = normal;
        const Eigen::Vector3d dn = jac * normal;
        tr.tau = mu * (dn - normal.dot(dn) * normal);
        out.push_back(tr);
    }
    if (out.empty()) {
        throw SchemaError("wall_shear_stress: mesh has no WALL faces");
    }
    return out;
}

WssStatistics twss_osi(const std::vector<std::vector<WallTraction>>& series) {
    if (series.size() != 8) {
        throw SchemaError("twss_osi: expected exactly 8 time samples");
    }
    const std::size_t n_faces = series.front().size();
    for (const auto& sample : series) {
        if (sample.size() != n_faces) {
            throw SchemaError("twss_osi: inconsistent face counts across samples");
        }
        for (std::size_t i = 0; i < n_faces; ++i) {
            if (sample[i].face != series.front()[i].face) {
                throw SchemaError("twss_osi: inconsistent face ids across samples");
            }
        }
    }

    WssStatistics stats;
    stats.faces.resize(n_faces);
    stats.areas.resize(static_cast<Eigen::Index>(n_faces));
    stats.twss.resize(static_cast<Eigen::Index>(n_faces), 3);
    stats.osi.resize(static_cast<Eigen::Index>(n_faces));
    for (std::size_t i = 0; i < n_faces; ++i) {
        stats.faces[i] = series.front()[i].face;
        stats.areas[static_cast<Eigen::Index>(i)] = series.front()[i].area;
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        double mean_norm = 0.0;
        for (const auto& sample : series) {
            mean += sample[i].tau;
            mean_norm += sample[i].tau.norm();
        }
        mean /= 8.0;
        mean_norm /= 8.0;
        stats.twss.row(static_cast<Eigen::Index>(i)) = mean;
        stats.osi[static_cast<Eigen::Index>(i)] =
            mean_norm == 0.0 ? 0.0 : 0.5 * (1.0 - mean.norm() / mean_norm);
    }
    return stats;
}

}  // namespace morphassim
