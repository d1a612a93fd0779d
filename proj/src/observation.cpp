#include <cmath>
#include <vector>

#include "morphassim/assimilation.hpp"
#include "morphassim/errors.hpp"

namespace morphassim {

VoxelGrid make_voxel_grid(const TetMesh& mesh, double edge) {
    if (!(edge > 0.0)) {
        throw SchemaError("make_voxel_grid: voxel edge must be positive");
    }
    VoxelGrid grid;
    grid.edge = edge;
    const Eigen::Vector3d lo = mesh.vertices.colwise().minCoeff().transpose();
    const Eigen::Vector3d hi = mesh.vertices.colwise().maxCoeff().transpose();
    grid.origin = lo;
    for (int c = 0; c < 3; ++c) {
        grid.extents[c] = std::max(1, static_cast<int>(std::ceil((hi[c] - lo[c]) / edge)));
    }
    const TetLocator locator(mesh);
    std::vector<Eigen::RowVector3d> admitted;
    for (int i = 0; i < grid.extents[0]; ++i) {
        for (int j = 0; j < grid.extents[1]; ++j) {
            for (int k = 0; k < grid.extents[2]; ++k) {
                const Eigen::Vector3d center =
                    grid.origin + edge * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
                if (locator.locate(center)) {
                    admitted.push_back(center.transpose());
                }
            }
        }
    }
    if (admitted.empty()) {
        throw SchemaError("make_voxel_grid: no voxel center lies inside the domain");
    }
    grid.centers.resize(static_cast<Eigen::Index>(admitted.size()), 3);
    for (std::size_t i = 0; i < admitted.size(); ++i) {
        grid.centers.row(static_cast<Eigen::Index>(i)) = admitted[i];
    }
    return grid;
}

VoxelObservations build_voxel_observations(const TetMesh& mesh, const Eigen::MatrixX3d& centers,
                                           double edge, WarningLog* log) {
    if (!(edge > 0.0)) {
        throw SchemaError("build_voxel_observations: voxel edge must be positive");
    }
    const TetLocator locator(mesh);
    const double half = edge / 2.0;

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<Eigen::Index> kept;
    Eigen::Index out_row = 0;
    for (Eigen::Index v = 0; v < centers.rows(); ++v) {
        const Eigen::Vector3d c = centers.row(v).transpose();
        // 8 corners plus the center.
        std::vector<PointLocation> inside;
        inside.reserve(9);
        for (int sx = -1; sx <= 1; sx += 2) {
            for (int sy = -1; sy <= 1; sy += 2) {
                for (int sz = -1; sz <= 1; sz += 2) {
                    const Eigen::Vector3d p = c + half * Eigen::Vector3d(sx, sy, sz);
                    if (auto loc = locator.locate(p)) {
                        inside.push_back(*loc);
                    }
                }
            }
        }
        if (auto loc = locator.locate(c)) {
            inside.push_back(*loc);
        }
        if (inside.empty()) {
            warn(log, "build_voxel_observations",
                 "voxel " + std::to_string(v) + " has no sample point inside the domain; excluded");
            continue;
        }
        const double weight = 1.0 / static_cast<double>(inside.size());
        for (const auto& loc : inside) {
            for (int a = 0; a < 4; ++a) {
                const Eigen::Index node = mesh.tets(loc.tet, a);
                for (int comp = 0; comp < 3; ++comp) {
                    trip.emplace_back(3 * out_row + comp, 3 * node + comp,
                                      weight * loc.bary[a]);
                }
            }
        }
        kept.push_back(v);
        ++out_row;
    }

    VoxelObservations obs;
    obs.rows.resize(3 * out_row, 3 * mesh.n_vertices());
    obs.rows.setFromTriplets(trip.begin(), trip.end());
    obs.rows.makeCompressed();
    obs.centers.resize(out_row, 3);
    for (Eigen::Index i = 0; i < out_row; ++i) {
        obs.centers.row(i) = centers.row(kept[static_cast<std::size_t>(i)]);
    }
    return obs;
}

Eigen::VectorXd divergence_row(const TetMesh& mesh) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(3 * mesh.n_vertices());
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        const auto& g = mesh.grads[static_cast<std::size_t>(k)];
        for (int a = 0; a < 4; ++a) {
            const Eigen::Index v = mesh.tets(k, a);
            for (int c = 0; c < 3; ++c) {
                row[3 * v + c] += mesh.volumes[k] * g(a, c);
            }
        }
    }
    return row;
}

ObservationSystem build_observation_system(const VoxelObservations& obs,
                                           const Eigen::VectorXd& div_row,
                                           const Eigen::MatrixXd& phi) {
    if (div_row.size() != obs.rows.cols()) {
        throw SchemaError("build_observation_system: divergence row length mismatch");
    }
    Eigen::SparseMatrix<double> rows(obs.rows.rows() + 1, obs.rows.cols());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(obs.rows.nonZeros()) +
                 static_cast<std::size_t>(div_row.size()));
    for (int outer = 0; outer < obs.rows.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(obs.rows, outer); it; ++it) {
            trip.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (Eigen::Index c = 0; c < div_row.size(); ++c) {
        if (div_row[c] != 0.0) {
            trip.emplace_back(obs.rows.rows(), c, div_row[c]);
        }
    }
    rows.setFromTriplets(trip.begin(), trip.end());
    rows.makeCompressed();
    return build_observation_system(rows, phi);
}

ObservationSystem build_observation_system(const Eigen::SparseMatrix<double>& rows,
                                           const Eigen::MatrixXd& phi) {
    if (phi.rows() != rows.cols()) {
        throw SchemaError("build_observation_system: basis rows (" + std::to_string(phi.rows()) +
                          ") must match operator columns (" + std::to_string(rows.cols()) + ")");
    }
    if (rows.rows() < 1 || phi.cols() < 1) {
        throw SchemaError("build_observation_system: need at least one row and one mode");
    }
    ObservationSystem sys;
    sys.z = rows.transpose();
    sys.phi = phi;
    sys.l = Eigen::MatrixXd(rows * phi);
    sys.k = Eigen::MatrixXd(rows * Eigen::SparseMatrix<double>(rows.transpose()));
    // Symmetrize against sparse-product roundoff asymmetry.
    sys.k = 0.5 * (sys.k + sys.k.transpose()).eval();
    sys.w = sys.k + Eigen::MatrixXd::Identity(sys.k.rows(), sys.k.cols());
    return sys;
}

Eigen::VectorXd observe(const ObservationSystem& obs, const Eigen::VectorXd& u) {
    if (u.size() != obs.dim()) {
        throw SchemaError("observe: state length does not match the observation operator");
    }
    return obs.z.transpose() * u;
}

FilteredObservations filter_infinite_variance(const Eigen::SparseMatrix<double>& rows,
                                              const Eigen::VectorXd& y,
                                              const Eigen::MatrixXd& s) {
    if (y.size() != rows.rows() || s.rows() != rows.rows() || s.cols() != rows.rows()) {
        throw SchemaError("filter_infinite_variance: inconsistent dimensions");
    }
    FilteredObservations out;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        if (!std::isinf(s(i, i))) {
            out.kept.push_back(static_cast<int>(i));
        }
    }
    const Eigen::Index m = static_cast<Eigen::Index>(out.kept.size());
    out.y.resize(m);
    out.s.resize(m, m);
    std::vector<Eigen::Index> new_row(static_cast<std::size_t>(rows.rows()),
                                      static_cast<Eigen::Index>(-1));
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index old = out.kept[static_cast<std::size_t>(i)];
        new_row[static_cast<std::size_t>(old)] = i;
        out.y[i] = y[old];
        for (Eigen::Index j = 0; j < m; ++j) {
            out.s(i, j) = s(old, out.kept[static_cast<std::size_t>(j)]);
        }
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(rows.nonZeros()));
    for (int outer = 0; outer < rows.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(rows, outer); it; ++it) {
            const Eigen::Index r = new_row[static_cast<std::size_t>(it.row())];
            if (r >= 0) {
                trip.emplace_back(r, it.col(), it.value());
            }
        }
    }
    out.rows.resize(m, rows.cols());
    out.rows.setFromTriplets(trip.begin(), trip.end());
    out.rows.makeCompressed();
    return out;
}

}  // namespace morphassim
