/// @file mesh.cpp
/// @brief LabeledSurfaceMesh loading, validation, normals and refinement.
#include "morphassim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "morphassim/errors.hpp"

namespace morphassim {

namespace {
using nlohmann::json;

constexpr double kDegenerateArea = 0.0;  // faces with exactly zero area are rejected

double face_area(const LabeledSurfaceMesh& m, Eigen::Index f) {
    const Eigen::Vector3d a = m.vertices.row(m.faces(f, 0));
    const Eigen::Vector3d b = m.vertices.row(m.faces(f, 1));
    const Eigen::Vector3d c = m.vertices.row(m.faces(f, 2));
    return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

std::string region_name(RegionId r) {
    switch (r) {
        case RegionId::Wall: return "wall";
        case RegionId::Inlet: return "inlet";
        case RegionId::Outlet1: return "outlet1";
        case RegionId::Outlet2: return "outlet2";
        case RegionId::Outlet3: return "outlet3";
        case RegionId::Outlet4: return "outlet4";
    }
    throw SchemaError("region_name: invalid RegionId");
}

RegionId region_from_name(const std::string& name) {
    for (RegionId r : kAllRegions)
        if (region_name(r) == name) return r;
    throw SchemaError("region_from_name: unknown region label '" + name + "'");
}

void validate_mesh(const LabeledSurfaceMesh& mesh) {
    if (!mesh.vertices.allFinite()) throw SchemaError("mesh: non-finite vertex coordinate");
    if (mesh.face_labels.size() != static_cast<std::size_t>(mesh.n_faces()))
        throw SchemaError("mesh: face_labels length differs from face count");
    for (Eigen::Index f = 0; f < mesh.n_faces(); ++f) {
        const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
        if (a < 0 || b < 0 || c < 0 || a >= mesh.n_vertices() || b >= mesh.n_vertices() ||
            c >= mesh.n_vertices())
            throw SchemaError("mesh: face " + std::to_string(f) + " has an out-of-range vertex index");
        if (a == b || b == c || a == c)
            throw SchemaError("mesh: face " + std::to_string(f) + " repeats a vertex index");
        const double area = face_area(mesh, f);
        if (!(area > kDegenerateArea))
            throw SchemaError("mesh: face " + std::to_string(f) + " is degenerate (zero area)");
    }
    if (mesh.centerline.size() > 0 && !mesh.centerline.allFinite())
        throw SchemaError("mesh: non-finite centerline coordinate");
    if (!mesh.radii.empty() && mesh.radii.size() != static_cast<std::size_t>(mesh.centerline.rows()))
        throw SchemaError("mesh: radii length differs from centerline length");
    for (double r : mesh.radii)
        if (!(r >= 0.0)) throw SchemaError("mesh: negative or non-finite radius");
}

LabeledSurfaceMesh load_surface_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_surface_mesh: cannot open '" + path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw SchemaError("load_surface_mesh: JSON parse failure in '" + path + "': " + e.what());
    }

    LabeledSurfaceMesh mesh;
    try {
        const auto& jv = j.at("vertices");
        mesh.vertices.resize(static_cast<Eigen::Index>(jv.size()), 3);
        for (std::size_t i = 0; i < jv.size(); ++i)
            for (int k = 0; k < 3; ++k) mesh.vertices(static_cast<Eigen::Index>(i), k) = jv[i].at(k).get<double>();

        const auto& jf = j.at("faces");
        mesh.faces.resize(static_cast<Eigen::Index>(jf.size()), 3);
        for (std::size_t i = 0; i < jf.size(); ++i)
            for (int k = 0; k < 3; ++k) mesh.faces(static_cast<Eigen::Index>(i), k) = jf[i].at(k).get<int>();

        for (const auto& lbl : j.at("face_labels"))
            mesh.face_labels.push_back(region_from_name(lbl.get<std::string>()));

        if (j.contains("centerline")) {
            const auto& jc = j["centerline"];
            mesh.centerline.resize(static_cast<Eigen::Index>(jc.size()), 3);
            for (std::size_t i = 0; i < jc.size(); ++i)
                for (int k = 0; k < 3; ++k)
                    mesh.centerline(static_cast<Eigen::Index>(i), k) = jc[i].at(k).get<double>();
        } else {
            mesh.centerline.resize(0, 3);
        }
        if (j.contains("radii")) mesh.radii = j["radii"].get<std::vector<double>>();
    } catch (const SchemaError&) {
        throw;
    } catch (const json::exception& e) {
        throw SchemaError("load_surface_mesh: malformed mesh object in '" + path + "': " + e.what());
    }

    validate_mesh(mesh);
    return mesh;
}

void save_surface_mesh(const std::string& path, const LabeledSurfaceMesh& mesh) {
    json j;
    j["vertices"] = json::array();
    for (Eigen::Index i = 0; i < mesh.n_vertices(); ++i)
        j["vertices"].push_back({mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2)});
    j["faces"] = json::array();
    for (Eigen::Index f = 0; f < mesh.n_faces(); ++f)
        j["faces"].push_back({mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)});
    j["face_labels"] = json::array();
    for (RegionId r : mesh.face_labels) j["face_labels"].push_back(region_name(r));
    j["centerline"] = json::array();
    for (Eigen::Index i = 0; i < mesh.centerline.rows(); ++i)
        j["centerline"].push_back({mesh.centerline(i, 0), mesh.centerline(i, 1), mesh.centerline(i, 2)});
    if (!mesh.radii.empty()) j["radii"] = mesh.radii;

    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("save_surface_mesh: cannot open '" + path + "' for writing");
    // nlohmann serializes doubles with shortest round-trip representation,
    // which is what makes save->load bit-exact.
    os << j.dump(1) << "\n";
    if (!os) throw IoError("save_surface_mesh: failed writing '" + path + "'");
}

Eigen::MatrixX3d vertex_normals(const LabeledSurfaceMesh& mesh) {
    Eigen::MatrixX3d normals = Eigen::MatrixX3d::Zero(mesh.n_vertices(), 3);
    std::vector<bool> referenced(static_cast<std::size_t>(mesh.n_vertices()), false);

    for (Eigen::Index f = 0; f < mesh.n_faces(); ++f) {
        const std::array<int, 3> vid = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
        const Eigen::Vector3d p0 = mesh.vertices.row(vid[0]);
        const Eigen::Vector3d p1 = mesh.vertices.row(vid[1]);
        const Eigen::Vector3d p2 = mesh.vertices.row(vid[2]);
        Eigen::Vector3d fn = (p1 - p0).cross(p2 - p0);
        const double area2 = fn.norm();
        if (!(area2 > 0.0))
            throw NumericalError("vertex_normals: zero-area face " + std::to_string(f));
        fn /= area2;
        const std::array<Eigen::Vector3d, 3> p = {p0, p1, p2};
        for (int k = 0; k < 3; ++k) {
            // Interior angle at corner k via arccos of the normalized edges.
            const Eigen::Vector3d e1 = (p[(k + 1) % 3] - p[k]).normalized();
            const Eigen::Vector3d e2 = (p[(k + 2) % 3] - p[k]).normalized();
            const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
            normals.row(vid[k]) += angle * fn;
            referenced[static_cast<std::size_t>(vid[k])] = true;
        }
    }
    for (Eigen::Index v = 0; v < mesh.n_vertices(); ++v) {
        if (!referenced[static_cast<std::size_t>(v)]) continue;  // isolated vertices keep a zero row
        const double n = normals.row(v).norm();
        if (!(n > 0.0))
            throw NumericalError("vertex_normals: zero resultant normal at vertex " + std::to_string(v));
        normals.row(v) /= n;
    }
    return normals;
}

std::vector<int> region_vertex_ids(const LabeledSurfaceMesh& mesh, const RegionSelector& sel) {
    // region set per vertex = union of labels over incident faces
    std::vector<std::set<RegionId>> vsets(static_cast<std::size_t>(mesh.n_vertices()));
    for (Eigen::Index f = 0; f < mesh.n_faces(); ++f)
        for (int k = 0; k < 3; ++k)
            vsets[static_cast<std::size_t>(mesh.faces(f, k))].insert(mesh.face_labels[static_cast<std::size_t>(f)]);

    std::vector<int> out;
    for (Eigen::Index v = 0; v < mesh.n_vertices(); ++v) {
        const auto& s = vsets[static_cast<std::size_t>(v)];
        if (s.count(sel.primary) == 0) continue;
        if (sel.also && s.count(*sel.also) == 0) continue;
        out.push_back(static_cast<int>(v));
    }
    return out;
}

Eigen::MatrixX3d region_points(const LabeledSurfaceMesh& mesh, const RegionSelector& sel) {
    const std::vector<int> ids = region_vertex_ids(mesh, sel);
    Eigen::MatrixX3d pts(static_cast<Eigen::Index>(ids.size()), 3);
    for (std::size_t i = 0; i < ids.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = mesh.vertices.row(ids[i]);
    return pts;
}

LabeledSurfaceMesh subdivide_midpoint(const LabeledSurfaceMesh& mesh, int levels) {
    if (levels < 0) throw SchemaError("subdivide_midpoint: negative level count");
    LabeledSurfaceMesh cur = mesh;
    for (int l = 0; l < levels; ++l) {
        LabeledSurfaceMesh next;
        next.centerline = cur.centerline;
        next.radii = cur.radii;

        std::vector<Eigen::Vector3d> verts;
        verts.reserve(static_cast<std::size_t>(cur.n_vertices() + 3 * cur.n_faces()));
        for (Eigen::Index v = 0; v < cur.n_vertices(); ++v) verts.emplace_back(cur.vertices.row(v));

        std::map<std::pair<int, int>, int> midpoint;  // undirected edge -> new vertex id
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int id = static_cast<int>(verts.size());
            verts.emplace_back(0.5 * (cur.vertices.row(a) + cur.vertices.row(b)));
            midpoint.emplace(key, id);
            return id;
        };

        next.faces.resize(4 * cur.n_faces(), 3);
        next.face_labels.reserve(static_cast<std::size_t>(4 * cur.n_faces()));
        for (Eigen::Index f = 0; f < cur.n_faces(); ++f) {
            const int a = cur.faces(f, 0), b = cur.faces(f, 1), c = cur.faces(f, 2);
            const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            const RegionId lbl = cur.face_labels[static_cast<std::size_t>(f)];
            const std::array<std::array<int, 3>, 4> children = {{{a, ab, ca}, {ab, b, bc}, {ca, bc, c}, {ab, bc, ca}}};
            for (int k = 0; k < 4; ++k) {
                for (int j = 0; j < 3; ++j) next.faces(4 * f + k, j) = children[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                next.face_labels.push_back(lbl);
            }
        }
        next.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
        for (std::size_t v = 0; v < verts.size(); ++v) next.vertices.row(static_cast<Eigen::Index>(v)) = verts[v];
        cur = std::move(next);
    }
    return cur;
}

double mesh_diameter(const Eigen::MatrixX3d& points) {
    if (points.rows() == 0) throw SchemaError("mesh_diameter: empty point set");
    double best = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        for (Eigen::Index j = i + 1; j < points.rows(); ++j)
            best = std::max(best, (points.row(i) - points.row(j)).norm());
    return best;
}

double surface_area(const LabeledSurfaceMesh& mesh) {
    double a = 0.0;
    for (Eigen::Index f = 0; f < mesh.n_faces(); ++f) a += face_area(mesh, f);
    return a;
}

double region_area(const LabeledSurfaceMesh& mesh, RegionId r) {
    double a = 0.0;
    for (Eigen::Index f = 0; f < mesh.n_faces(); ++f)
        if (mesh.face_labels[static_cast<std::size_t>(f)] == r) a += face_area(mesh, f);
    return a;
}

}  // namespace morphassim
