#include <algorithm>
#include <cmath>
#include <limits>

#include "morphassim/assimilation.hpp"
#include "morphassim/errors.hpp"

namespace morphassim {

namespace {

/// Exact squared distance from p to triangle (a, b, c): project onto the
/// triangle plane and clamp to the closest feature (face, edge or vertex).
double point_triangle_sq_dist(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    const Eigen::Vector3d ab = b - a;
    const Eigen::Vector3d ac = c - a;
    const Eigen::Vector3d ap = p - a;

    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        return ap.squaredNorm();  // vertex a
    }
    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        return bp.squaredNorm();  // vertex b
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return (ap - v * ab).squaredNorm();  // edge ab
    }
    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        return cp.squaredNorm();  // vertex c
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return (ap - w * ac).squaredNorm();  // edge ac
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp + w * (c - b)).squaredNorm();  // edge bc
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return (ap - v * ab - w * ac).squaredNorm();  // interior
}

double distance_to_wall(const TetMesh& mesh, const Eigen::Vector3d& p) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < mesh.boundary_faces.rows(); ++f) {
        if (mesh.boundary_labels[static_cast<std::size_t>(f)] != RegionId::Wall) {
            continue;
        }
        best = std::min(best, point_triangle_sq_dist(
                                  p, mesh.vertices.row(mesh.boundary_faces(f, 0)).transpose(),
                                  mesh.vertices.row(mesh.boundary_faces(f, 1)).transpose(),
                                  mesh.vertices.row(mesh.boundary_faces(f, 2)).transpose()));
    }
    return std::sqrt(best);
}

}  // namespace

NoiseModel noise_preset(const std::string& name) {
    NoiseModel model;
    if (name == "calm") {
        model.snr_ho = 10.0;
        model.snr_he = 0.5;
    } else if (name == "noisy") {
        model.snr_ho = 0.4;
        model.snr_he = 0.1;
    } else if (name == "extreme") {
        model.snr_ho = 0.2;
        model.snr_he = 0.05;
    } else {
        throw SchemaError("noise_preset: unknown preset '" + name +
                          "' (expected calm, noisy or extreme)");
    }
    return model;
}

NoiseCovariance build_noise_covariance(const TetMesh& mesh, const Eigen::MatrixX3d& centers,
                                       double voxel_edge, const NoiseModel& model,
                                       const Eigen::VectorXd& observed) {
    const Eigen::Index n_vox = centers.rows();
    if (observed.size() != 3 * n_vox) {
        throw SchemaError("build_noise_covariance: observed vector must hold 3 entries per voxel");
    }
    if (!(model.snr_ho > 0.0) || !(model.snr_he > 0.0) || !(model.eps2 > 0.0)) {
        throw SchemaError("build_noise_covariance: snr_ho, snr_he and eps2 must be positive");
    }
    if (!(voxel_edge > 0.0)) {
        throw SchemaError("build_noise_covariance: voxel edge must be positive");
    }

    NoiseCovariance out;
    double norm_sum = 0.0;
    for (Eigen::Index i = 0; i < n_vox; ++i) {
        norm_sum += observed.segment<3>(3 * i).norm();
    }
    out.u_bar = norm_sum / static_cast<double>(n_vox);
    out.sigma_div2 = model.sigma_div2.value_or(std::pow(out.u_bar * 1e-2, 2));
    out.sigma_floor2 =
        model.sigma_floor2.value_or(std::pow(out.u_bar / model.snr_ho, 2) * 1e-4);
    out.delta = model.delta.value_or(voxel_edge);
    out.l_t = model.l_t.value_or(mesh_diameter(mesh) / 12.0);
    if (!(out.sigma_div2 > 0.0) || !(out.sigma_floor2 > 0.0) || !(out.delta > 0.0) ||
        !(out.l_t > 0.0)) {
        throw SchemaError("build_noise_covariance: resolved parameters must be positive "
                          "(zero observations need explicit variances)");
    }

    for (Eigen::Index i = 0; i < n_vox; ++i) {
        if (distance_to_wall(mesh, centers.row(i).transpose()) < out.delta) {
            out.heteroscedastic.push_back(static_cast<int>(i));
        }
    }

    const Eigen::Index m = 3 * n_vox + 1;
    out.s = Eigen::MatrixXd::Zero(m, m);
    const double var_ho = std::pow(out.u_bar / model.snr_ho, 2);
    for (Eigen::Index i = 0; i < n_vox; ++i) {
        for (int c = 0; c < 3; ++c) {
            out.s(3 * i + c, 3 * i + c) = var_ho;
        }
    }
    // Heteroscedastic rows replace the homoscedastic diagonal with the
    // correlated multiplicative model plus the isotropic floor.
    const Eigen::Index n_he = static_cast<Eigen::Index>(out.heteroscedastic.size());
    if (n_he > 0) {
        const double var_he = std::pow(out.u_bar / model.snr_he, 2);
        for (const int i : out.heteroscedastic) {
            for (int c = 0; c < 3; ++c) {
                out.s(3 * i + c, 3 * i + c) = out.sigma_floor2;
            }
        }
        for (Eigen::Index a = 0; a < n_he; ++a) {
            const int i = out.heteroscedastic[static_cast<std::size_t>(a)];
            const Eigen::Vector3d vi = observed.segment<3>(3 * i);
            const double ni = vi.norm();
            if (ni == 0.0) {
                continue;  // zero direction block
            }
            const Eigen::Vector3d di = vi / ni;
            for (Eigen::Index b = 0; b < n_he; ++b) {
                const int j = out.heteroscedastic[static_cast<std::size_t>(b)];
                const Eigen::Vector3d vj = observed.segment<3>(3 * j);
                const double nj = vj.norm();
                if (nj == 0.0) {
                    continue;
                }
                const Eigen::Vector3d dj = vj / nj;
                const double sq = (centers.row(i) - centers.row(j)).squaredNorm();
                // Kernel exponent uses 2 l_T (a length) exactly as specified.
                double kern = std::exp(-sq / (2.0 * out.l_t));
                if (i == j) {
                    kern += model.eps2;
                }
                out.s.block<3, 3>(3 * i, 3 * j) += var_he * kern * (di * dj.transpose());
            }
        }
    }
    out.s(m - 1, m - 1) = out.sigma_div2;
    return out;
}

}  // namespace morphassim
