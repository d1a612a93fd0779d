/// @file chamfer.cpp
/// @brief Chamfer distances (point clouds and region-wise mesh variant).
#include "morphassim/chamfer.hpp"

#include <cmath>
#include <limits>

#include "morphassim/errors.hpp"
#include "morphassim/spatial.hpp"

namespace morphassim {

namespace {

double one_sided_mean_nn(const Eigen::MatrixX3d& from, const KdTree& to_index) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < from.rows(); ++i)
        acc += std::sqrt(to_index.nearest(from.row(i)).sq_dist);
    return acc / static_cast<double>(from.rows());
}

}  // namespace

double chamfer(const Eigen::MatrixX3d& X, const Eigen::MatrixX3d& Y) {
    if (X.rows() == 0 || Y.rows() == 0) throw SchemaError("chamfer: empty point cloud");
    const KdTree ty(Y), tx(X);
    return one_sided_mean_nn(X, ty) + one_sided_mean_nn(Y, tx);
}

double chamfer_bruteforce(const Eigen::MatrixX3d& X, const Eigen::MatrixX3d& Y) {
    if (X.rows() == 0 || Y.rows() == 0) throw SchemaError("chamfer_bruteforce: empty point cloud");
    auto one_sided = [](const Eigen::MatrixX3d& A, const Eigen::MatrixX3d& B) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < B.rows(); ++j)
                best = std::min(best, (A.row(i) - B.row(j)).squaredNorm());
            acc += std::sqrt(best);
        }
        return acc / static_cast<double>(A.rows());
    };
    return one_sided(X, Y) + one_sided(Y, X);
}

double chamfer_star(const LabeledSurfaceMesh& S, const LabeledSurfaceMesh& T,
                    const ChamferConfig& cfg, WarningLog* log) {
    const std::vector<int> wall_s = region_vertex_ids(S, RegionSelector::single(RegionId::Wall));
    const std::vector<int> wall_t = region_vertex_ids(T, RegionSelector::single(RegionId::Wall));
    if (wall_s.empty() || wall_t.empty())
        throw SchemaError("chamfer_star: empty WALL region");

    const Eigen::MatrixX3d ws = region_points(S, RegionSelector::single(RegionId::Wall));
    const Eigen::MatrixX3d wt = region_points(T, RegionSelector::single(RegionId::Wall));
    double total = chamfer(ws, wt);  // (a)

    // (b) normal alignment with nearest-wall-point pairing, normalized by the
    // FULL cloud cardinalities exactly as the objective is written.
    if (cfg.lambda_n > 0.0) {
        const Eigen::MatrixX3d ns = vertex_normals(S);
        const Eigen::MatrixX3d nt = vertex_normals(T);
        const KdTree tree_wt(wt), tree_ws(ws);
        double term_s = 0.0;
        for (std::size_t i = 0; i < wall_s.size(); ++i) {
            const int j = tree_wt.nearest(ws.row(static_cast<Eigen::Index>(i))).index;
            term_s += 1.0 - std::abs(ns.row(wall_s[i]).dot(nt.row(wall_t[static_cast<std::size_t>(j)])));
        }
        double term_t = 0.0;
        for (std::size_t i = 0; i < wall_t.size(); ++i) {
            const int j = tree_ws.nearest(wt.row(static_cast<Eigen::Index>(i))).index;
            term_t += 1.0 - std::abs(nt.row(wall_t[i]).dot(ns.row(wall_s[static_cast<std::size_t>(j)])));
        }
        total += cfg.lambda_n * (term_s / static_cast<double>(S.n_vertices()) +
                                 term_t / static_cast<double>(T.n_vertices()));
    }

    // (c) cap clouds, (d) ring clouds.
    auto sub_chamfer = [&](const RegionSelector& sel, const char* what) {
        const Eigen::MatrixX3d a = region_points(S, sel);
        const Eigen::MatrixX3d b = region_points(T, sel);
        if (a.rows() == 0 || b.rows() == 0) {
            warn(log, "chamfer_star",
                 std::string(what) + " region empty on " + (a.rows() == 0 ? "source" : "target") +
                     "; sub-term contributes 0");
            return 0.0;
        }
        return chamfer(a, b);
    };
    for (RegionId cap : {RegionId::Inlet, RegionId::Outlet1, RegionId::Outlet2, RegionId::Outlet3,
                         RegionId::Outlet4}) {
        total += sub_chamfer(RegionSelector::single(cap), region_name(cap).c_str());
        total += sub_chamfer(RegionSelector::ring(cap, RegionId::Wall),
                             (region_name(cap) + "∩wall ring").c_str());
    }
    return total;
}

}  // namespace morphassim
