#include "morphassim/tetmesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "morphassim/errors.hpp"
#include "morphassim/spatial.hpp"

namespace morphassim {

namespace {

using Json = nlohmann::json;

std::array<int, 3> sorted_face(int a, int b, int c) {
    std::array<int, 3> f = {a, b, c};
    std::sort(f.begin(), f.end());
    return f;
}

/// The four faces of tet (t0,t1,t2,t3), each as a sorted vertex triple.
std::array<std::array<int, 3>, 4> tet_faces(const Eigen::RowVector4i& t) {
    return {sorted_face(t[1], t[2], t[3]), sorted_face(t[0], t[2], t[3]),
            sorted_face(t[0], t[1], t[3]), sorted_face(t[0], t[1], t[2])};
}

}  // namespace

void finalize_tet_mesh(TetMesh& mesh) {
    const Eigen::Index n_v = mesh.vertices.rows();
    const Eigen::Index n_t = mesh.tets.rows();
    if (n_v < 4 || n_t < 1) {
        throw SchemaError("tet mesh needs at least 4 vertices and 1 tet");
    }
    if (!mesh.vertices.allFinite()) {
        throw SchemaError("tet mesh vertices contain non-finite coordinates");
    }
    for (Eigen::Index k = 0; k < n_t; ++k) {
        for (int a = 0; a < 4; ++a) {
            const int v = mesh.tets(k, a);
            if (v < 0 || v >= n_v) {
                throw SchemaError("tet " + std::to_string(k) + " references vertex " +
                                  std::to_string(v) + " out of range");
            }
            for (int b = a + 1; b < 4; ++b) {
                if (v == mesh.tets(k, b)) {
                    throw SchemaError("tet " + std::to_string(k) + " has repeated vertices");
                }
            }
        }
    }
    if (mesh.boundary_labels.size() != static_cast<std::size_t>(mesh.boundary_faces.rows())) {
        throw SchemaError("boundary label count does not match boundary face count");
    }

    // Geometry caches.
    mesh.volumes.resize(n_t);
    mesh.grads.assign(static_cast<std::size_t>(n_t), Eigen::Matrix<double, 4, 3>::Zero());
    mesh.diameters.resize(n_t);
    for (Eigen::Index k = 0; k < n_t; ++k) {
        const Eigen::Vector3d v0 = mesh.vertices.row(mesh.tets(k, 0));
        Eigen::Matrix3d jac;  // columns: edge vectors from v0
        for (int a = 0; a < 3; ++a) {
            jac.col(a) = mesh.vertices.row(mesh.tets(k, a + 1)).transpose() - v0;
        }
        const double det = jac.determinant();
        if (!(det > 0.0)) {
            throw NumericalError("tet " + std::to_string(k) + " has non-positive volume " +
                                 std::to_string(det / 6.0) + " (inverted or degenerate)");
        }
        mesh.volumes[k] = det / 6.0;
        const Eigen::Matrix3d jinv = jac.inverse();
        auto& g = mesh.grads[static_cast<std::size_t>(k)];
        for (int a = 0; a < 3; ++a) {
            g.row(a + 1) = jinv.row(a);
        }
        g.row(0) = -(g.row(1) + g.row(2) + g.row(3));

        double h = 0.0;
        for (int a = 0; a < 4; ++a) {
            for (int b = a + 1; b < 4; ++b) {
                h = std::max(h, (mesh.vertices.row(mesh.tets(k, a)) -
                                 mesh.vertices.row(mesh.tets(k, b)))
                                    .norm());
            }
        }
        mesh.diameters[k] = h;
    }

    // Each boundary face must be a face of exactly one tet.
    std::map<std::array<int, 3>, int> face_count;
    for (Eigen::Index k = 0; k < n_t; ++k) {
        for (const auto& f : tet_faces(mesh.tets.row(k))) {
            ++face_count[f];
        }
    }
    for (Eigen::Index i = 0; i < mesh.boundary_faces.rows(); ++i) {
        const auto key = sorted_face(mesh.boundary_faces(i, 0), mesh.boundary_faces(i, 1),
                                     mesh.boundary_faces(i, 2));
        const auto it = face_count.find(key);
        const int count = (it == face_count.end()) ? 0 : it->second;
        if (count != 1) {
            throw SchemaError("boundary face " + std::to_string(i) + " is shared by " +
                              std::to_string(count) + " tets (expected exactly 1)");
        }
    }
    for (const auto& [name, ids] : mesh.sections) {
        for (const int f : ids) {
            if (f < 0 || f >= mesh.boundary_faces.rows()) {
                throw SchemaError("section '" + name + "' references boundary face " +
                                  std::to_string(f) + " out of range");
            }
        }
    }
}

TetMesh build_tet_mesh(Eigen::MatrixX3d vertices, Eigen::MatrixX4i tets,
                       Eigen::MatrixX3i boundary_faces, std::vector<RegionId> boundary_labels,
                       std::map<std::string, std::vector<int>> sections) {
    TetMesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.tets = std::move(tets);
    mesh.boundary_faces = std::move(boundary_faces);
    mesh.boundary_labels = std::move(boundary_labels);
    mesh.sections = std::move(sections);
    finalize_tet_mesh(mesh);
    return mesh;
}

TetMesh load_tet_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open tet mesh file: " + path);
    }
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw SchemaError("malformed tet mesh JSON in " + path + ": " + e.what());
    }
    try {
        const auto& jv = j.at("vertices");
        const auto& jt = j.at("tets");
        const auto& jf = j.at("boundary_faces");
        const auto& jl = j.at("boundary_labels");
        TetMesh mesh;
        mesh.vertices.resize(static_cast<Eigen::Index>(jv.size()), 3);
        for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
            for (int c = 0; c < 3; ++c) {
                mesh.vertices(i, c) = jv.at(i).at(c).get<double>();
            }
        }
        mesh.tets.resize(static_cast<Eigen::Index>(jt.size()), 4);
        for (Eigen::Index i = 0; i < mesh.tets.rows(); ++i) {
            for (int c = 0; c < 4; ++c) {
                mesh.tets(i, c) = jt.at(i).at(c).get<int>();
            }
        }
        mesh.boundary_faces.resize(static_cast<Eigen::Index>(jf.size()), 3);
        for (Eigen::Index i = 0; i < mesh.boundary_faces.rows(); ++i) {
            for (int c = 0; c < 3; ++c) {
                mesh.boundary_faces(i, c) = jf.at(i).at(c).get<int>();
            }
        }
        mesh.boundary_labels.reserve(jl.size());
        for (const auto& s : jl) {
            mesh.boundary_labels.push_back(region_from_name(s.get<std::string>()));
        }
        if (j.contains("sections")) {
            for (const auto& [name, ids] : j.at("sections").items()) {
                mesh.sections[name] = ids.get<std::vector<int>>();
            }
        }
        finalize_tet_mesh(mesh);
        return mesh;
    } catch (const Json::exception& e) {
        throw SchemaError("tet mesh JSON in " + path + " missing or mistyped field: " + e.what());
    }
}

void save_tet_mesh(const std::string& path, const TetMesh& mesh) {
    Json j;
    j["vertices"] = Json::array();
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        j["vertices"].push_back({mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2)});
    }
    j["tets"] = Json::array();
    for (Eigen::Index i = 0; i < mesh.tets.rows(); ++i) {
        j["tets"].push_back({mesh.tets(i, 0), mesh.tets(i, 1), mesh.tets(i, 2), mesh.tets(i, 3)});
    }
    j["boundary_faces"] = Json::array();
    for (Eigen::Index i = 0; i < mesh.boundary_faces.rows(); ++i) {
        j["boundary_faces"].push_back(
            {mesh.boundary_faces(i, 0), mesh.boundary_faces(i, 1), mesh.boundary_faces(i, 2)});
    }
    j["boundary_labels"] = Json::array();
    for (const RegionId r : mesh.boundary_labels) {
        j["boundary_labels"].push_back(region_name(r));
    }
    if (!mesh.sections.empty()) {
        j["sections"] = Json::object();
        for (const auto& [name, ids] : mesh.sections) {
            j["sections"][name] = ids;
        }
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write tet mesh file: " + path);
    }
    out << j.dump(1, '\t') << "\n";
    if (!out) {
        throw IoError("write failed for tet mesh file: " + path);
    }
}

std::vector<bool> boundary_vertex_mask(const TetMesh& mesh) {
    std::vector<bool> mask(static_cast<std::size_t>(mesh.n_vertices()), false);
    for (Eigen::Index i = 0; i < mesh.boundary_faces.rows(); ++i) {
        for (int c = 0; c < 3; ++c) {
            mask[static_cast<std::size_t>(mesh.boundary_faces(i, c))] = true;
        }
    }
    return mask;
}

double mesh_diameter(const TetMesh& mesh) {
    // Diameter of the bounding box is within sqrt(3) of the true diameter;
    // the exact pairwise scan stays cheap at desk scale and is unambiguous.
    double best = 0.0;
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < mesh.vertices.rows(); ++j) {
            best = std::max(best, (mesh.vertices.row(i) - mesh.vertices.row(j)).norm());
        }
    }
    return best;
}

struct TetLocator::Impl {
    explicit Impl(const Eigen::MatrixX3d& pts) : tree(pts) {}
    KdTree tree;
};

TetLocator::TetLocator(const TetMesh& mesh)
    : mesh_(mesh), impl_(std::make_shared<const Impl>(mesh.vertices)) {
    vertex_tets_.assign(static_cast<std::size_t>(mesh.n_vertices()), {});
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        for (int a = 0; a < 4; ++a) {
            vertex_tets_[static_cast<std::size_t>(mesh.tets(k, a))].push_back(k);
        }
    }
}

namespace {

Eigen::Vector4d barycentric(const TetMesh& mesh, Eigen::Index tet, const Eigen::Vector3d& p) {
    const Eigen::Vector3d v0 = mesh.vertices.row(mesh.tets(tet, 0));
    // grads rows 1..3 are the rows of J^{-1}, so lambda_{1..3} = J^{-1}(p - v0).
    Eigen::Vector4d bary;
    for (int a = 1; a < 4; ++a) {
        bary[a] = mesh.grads[static_cast<std::size_t>(tet)].row(a).dot(p - v0);
    }
    bary[0] = 1.0 - bary[1] - bary[2] - bary[3];
    return bary;
}

}  // namespace

std::optional<PointLocation> TetLocator::locate(const Eigen::Vector3d& p, double tol) const {
    // Candidate tets incident to the nearest vertices cover almost every
    // query; the full scan below is the correctness backstop.
    const auto hits = impl_->tree.knn(p, std::min<int>(8, static_cast<int>(mesh_.n_vertices())));
    for (const auto& h : hits) {
        for (const Eigen::Index k : vertex_tets_[static_cast<std::size_t>(h.index)]) {
            const Eigen::Vector4d bary = barycentric(mesh_, k, p);
            if (bary.minCoeff() >= -tol) {
                return PointLocation{k, bary};
            }
        }
    }
    for (Eigen::Index k = 0; k < mesh_.n_tets(); ++k) {
        const Eigen::Vector4d bary = barycentric(mesh_, k, p);
        if (bary.minCoeff() >= -tol) {
            return PointLocation{k, bary};
        }
    }
    return std::nullopt;
}

PointLocation TetLocator::locate_nearest(const Eigen::Vector3d& p) const {
    if (auto loc = locate(p)) {
        return *loc;
    }
    // Outside the domain: pick the least-violating tet among those incident
    // to the nearest vertices (the containing-tet candidates of the closest
    // part of the mesh), which bounds the extrapolation distance.
    const auto hits = impl_->tree.knn(p, std::min<int>(8, static_cast<int>(mesh_.n_vertices())));
    PointLocation best;
    double best_violation = -std::numeric_limits<double>::infinity();
    for (const auto& h : hits) {
        for (const Eigen::Index k : vertex_tets_[static_cast<std::size_t>(h.index)]) {
            const Eigen::Vector4d bary = barycentric(mesh_, k, p);
            const double violation = bary.minCoeff();
            if (violation > best_violation) {
                best_violation = violation;
                best = PointLocation{k, bary};
            }
        }
    }
    return best;
}

Eigen::VectorXd sample_p1(const TetMesh& mesh, const Eigen::VectorXd& nodal,
                          const PointLocation& loc) {
    if (loc.tet < 0 || loc.tet >= mesh.n_tets()) {
        throw SchemaError("sample_p1: invalid tet index in point location");
    }
    const bool scalar = nodal.size() == mesh.n_vertices();
    const bool vector3 = nodal.size() == 3 * mesh.n_vertices();
    if (!scalar && !vector3) {
        throw SchemaError("sample_p1: field length " + std::to_string(nodal.size()) +
                          " matches neither scalar nor 3-vector layout");
    }
    const int dim = scalar ? 1 : 3;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
    for (int a = 0; a < 4; ++a) {
        const Eigen::Index v = mesh.tets(loc.tet, a);
        for (int c = 0; c < dim; ++c) {
            out[c] += loc.bary[a] * nodal[dim * v + c];
        }
    }
    return out;
}

namespace {

/// Extracts boundary faces (faces owned by exactly one tet) and labels them
/// with the supplied classifier (face centroid -> region).
template <typename Classify>
void extract_boundary(TetMesh& mesh, Classify classify) {
    std::map<std::array<int, 3>, int> count;
    for (Eigen::Index k = 0; k < mesh.tets.rows(); ++k) {
        for (const auto& f : tet_faces(mesh.tets.row(k))) {
            ++count[f];
        }
    }
    std::vector<std::array<int, 3>> faces;
    for (const auto& [f, c] : count) {
        if (c == 1) {
            faces.push_back(f);
        }
    }
    mesh.boundary_faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    mesh.boundary_labels.clear();
    mesh.boundary_labels.reserve(faces.size());
    for (std::size_t i = 0; i < faces.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            mesh.boundary_faces(static_cast<Eigen::Index>(i), c) = faces[i][c];
        }
        const Eigen::Vector3d centroid = (mesh.vertices.row(faces[i][0]) +
                                          mesh.vertices.row(faces[i][1]) +
                                          mesh.vertices.row(faces[i][2])) /
                                         3.0;
        mesh.boundary_labels.push_back(classify(centroid));
    }
}

}  // namespace

TetMesh make_box_mesh(int n1, int n2, int n3, const Eigen::Vector3d& lengths) {
    if (n1 < 1 || n2 < 1 || n3 < 1) {
        throw SchemaError("make_box_mesh: cell counts must be positive");
    }
    if (!(lengths.minCoeff() > 0.0)) {
        throw SchemaError("make_box_mesh: box lengths must be positive");
    }
    TetMesh mesh;
    const auto vid = [&](int i, int j, int k) { return (i * (n2 + 1) + j) * (n3 + 1) + k; };
    mesh.vertices.resize((n1 + 1) * (n2 + 1) * (n3 + 1), 3);
    for (int i = 0; i <= n1; ++i) {
        for (int j = 0; j <= n2; ++j) {
            for (int k = 0; k <= n3; ++k) {
                mesh.vertices.row(vid(i, j, k)) =
                    Eigen::RowVector3d(lengths[0] * i / n1, lengths[1] * j / n2,
                                       lengths[2] * k / n3);
            }
        }
    }
    // Freudenthal split: six tets around the cell diagonal c000-c111, one per
    // permutation of the axes.
    const std::array<std::array<int, 3>, 6> perms = {
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    mesh.tets.resize(static_cast<Eigen::Index>(6) * n1 * n2 * n3, 4);
    Eigen::Index t = 0;
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
            for (int k = 0; k < n3; ++k) {
                for (const auto& perm : perms) {
                    std::array<int, 3> at = {i, j, k};
                    std::array<int, 4> corners;
                    corners[0] = vid(at[0], at[1], at[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++at[perm[s]];
                        corners[s + 1] = vid(at[0], at[1], at[2]);
                    }
                    mesh.tets.row(t++) << corners[0], corners[1], corners[2], corners[3];
                }
            }
        }
    }
    // Fix orientation where the permutation parity flipped it.
    for (Eigen::Index k = 0; k < mesh.tets.rows(); ++k) {
        Eigen::Matrix3d jac;
        const Eigen::Vector3d v0 = mesh.vertices.row(mesh.tets(k, 0));
        for (int a = 0; a < 3; ++a) {
            jac.col(a) = mesh.vertices.row(mesh.tets(k, a + 1)).transpose() - v0;
        }
        if (jac.determinant() < 0.0) {
            std::swap(mesh.tets(k, 2), mesh.tets(k, 3));
        }
    }

    const double eps = 1e-9 * lengths.maxCoeff();
    extract_boundary(mesh, [&](const Eigen::Vector3d& c) {
        if (c[0] < eps) {
            return RegionId::Inlet;
        }
        if (c[0] > lengths[0] - eps) {
            return RegionId::Outlet1;
        }
        return RegionId::Wall;
    });
    for (Eigen::Index f = 0; f < mesh.boundary_faces.rows(); ++f) {
        if (mesh.boundary_labels[static_cast<std::size_t>(f)] == RegionId::Inlet) {
            mesh.sections["sec_in"].push_back(static_cast<int>(f));
        } else if (mesh.boundary_labels[static_cast<std::size_t>(f)] == RegionId::Outlet1) {
            mesh.sections["sec_out"].push_back(static_cast<int>(f));
        }
    }
    finalize_tet_mesh(mesh);
    return mesh;
}

TetMesh refine_tet_mesh(const TetMesh& mesh) {
    TetMesh fine;
    const Eigen::Index n_v = mesh.n_vertices();
    std::map<std::pair<int, int>, int> midpoint;
    std::vector<Eigen::RowVector3d> new_vertices;
    const auto mid = [&](int a, int b) {
        const std::pair<int, int> key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) {
            return it->second;
        }
        const int id = static_cast<int>(n_v) + static_cast<int>(new_vertices.size());
        new_vertices.push_back(0.5 * (mesh.vertices.row(a) + mesh.vertices.row(b)));
        midpoint.emplace(key, id);
        return id;
    };

    std::vector<std::array<int, 4>> tets;
    tets.reserve(static_cast<std::size_t>(8 * mesh.n_tets()));
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        const int v0 = mesh.tets(k, 0), v1 = mesh.tets(k, 1), v2 = mesh.tets(k, 2),
                  v3 = mesh.tets(k, 3);
        const int m01 = mid(v0, v1), m02 = mid(v0, v2), m03 = mid(v0, v3);
        const int m12 = mid(v1, v2), m13 = mid(v1, v3), m23 = mid(v2, v3);
        // Four corner tets plus Bey's split of the inner octahedron along
        // the m02-m13 diagonal.
        tets.push_back({v0, m01, m02, m03});
        tets.push_back({v1, m01, m12, m13});
        tets.push_back({v2, m02, m12, m23});
        tets.push_back({v3, m03, m13, m23});
        tets.push_back({m01, m02, m03, m13});
        tets.push_back({m01, m02, m12, m13});
        tets.push_back({m02, m03, m13, m23});
        tets.push_back({m02, m12, m13, m23});
    }

    fine.vertices.resize(n_v + static_cast<Eigen::Index>(new_vertices.size()), 3);
    fine.vertices.topRows(n_v) = mesh.vertices;
    for (std::size_t i = 0; i < new_vertices.size(); ++i) {
        fine.vertices.row(n_v + static_cast<Eigen::Index>(i)) = new_vertices[i];
    }
    fine.tets.resize(static_cast<Eigen::Index>(tets.size()), 4);
    for (std::size_t i = 0; i < tets.size(); ++i) {
        for (int c = 0; c < 4; ++c) {
            fine.tets(static_cast<Eigen::Index>(i), c) = tets[i][c];
        }
    }
    for (Eigen::Index k = 0; k < fine.tets.rows(); ++k) {
        Eigen::Matrix3d jac;
        const Eigen::Vector3d a0 = fine.vertices.row(fine.tets(k, 0));
        for (int a = 0; a < 3; ++a) {
            jac.col(a) = fine.vertices.row(fine.tets(k, a + 1)).transpose() - a0;
        }
        if (jac.determinant() < 0.0) {
            std::swap(fine.tets(k, 2), fine.tets(k, 3));
        }
    }

    // Boundary faces split 1 -> 4; children of face f occupy rows 4f..4f+3,
    // which keeps section remapping a pure index calculation.
    fine.boundary_faces.resize(4 * mesh.boundary_faces.rows(), 3);
    fine.boundary_labels.clear();
    fine.boundary_labels.reserve(static_cast<std::size_t>(4 * mesh.boundary_faces.rows()));
    for (Eigen::Index f = 0; f < mesh.boundary_faces.rows(); ++f) {
        const int a = mesh.boundary_faces(f, 0), b = mesh.boundary_faces(f, 1),
                  c = mesh.boundary_faces(f, 2);
        const int mab = mid(a, b), mbc = mid(b, c), mac = mid(a, c);
        fine.boundary_faces.row(4 * f + 0) << a, mab, mac;
        fine.boundary_faces.row(4 * f + 1) << b, mbc, mab;
        fine.boundary_faces.row(4 * f + 2) << c, mac, mbc;
        fine.boundary_faces.row(4 * f + 3) << mab, mbc, mac;
        for (int child = 0; child < 4; ++child) {
            fine.boundary_labels.push_back(mesh.boundary_labels[static_cast<std::size_t>(f)]);
        }
    }
    for (const auto& [name, ids] : mesh.sections) {
        auto& out = fine.sections[name];
        for (const int f : ids) {
            for (int child = 0; child < 4; ++child) {
                out.push_back(4 * f + child);
            }
        }
    }
    finalize_tet_mesh(fine);
    return fine;
}

}  // namespace morphassim
