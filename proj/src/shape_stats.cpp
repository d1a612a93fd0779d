/// @file shape_stats.cpp
/// @brief Dissimilarity metrics, Mantel test, MDS, encodings, SSM sampling.
#include "morphassim/shape_stats.hpp"

#include <algorithm>
#include <cmath>

#include "morphassim/errors.hpp"
#include "morphassim/rng.hpp"
#include "morphassim/spatial.hpp"

namespace morphassim {

namespace {

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

/// Worst relative projection residual of the columns of `cols` against the
/// span of the orthonormal `q`.
double worst_residual_sq(const Eigen::MatrixXd& cols, const Eigen::MatrixXd& q) {
    double worst = 0.0;
    for (Eigen::Index c = 0; c < cols.cols(); ++c) {
        const Eigen::VectorXd a = cols.col(c);
        const double nrm2 = a.squaredNorm();
        if (nrm2 == 0.0)
            throw SchemaError("hausdorff_subspace: zero column at index " + std::to_string(c));
        const Eigen::VectorXd residual = a - q * (q.transpose() * a);
        worst = std::max(worst, residual.squaredNorm() / nrm2);
    }
    return worst;
}

bool is_orthonormal(const Eigen::MatrixXd& m, double tol) {
    return (m.transpose() * m - Eigen::MatrixXd::Identity(m.cols(), m.cols()))
               .cwiseAbs()
               .maxCoeff() < tol;
}

/// Double-centering C = J·D·J with J = I − 11ᵀ/n.
Eigen::MatrixXd double_center(const Eigen::MatrixXd& d) {
    const Eigen::VectorXd row_mean = d.rowwise().mean();
    const Eigen::VectorXd col_mean = d.colwise().mean();
    const double total = d.mean();
    Eigen::MatrixXd c = d;
    c.colwise() -= row_mean;
    c.rowwise() -= col_mean.transpose();
    c.array() += total;
    return c;
}

/// Strict upper triangle flattened row-major.
Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    Eigen::VectorXd v(n * (n - 1) / 2);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) v[at++] = m(i, j);
    return v;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    const double va = std::sqrt((da * da).sum());
    const double vb = std::sqrt((db * db).sum());
    if (va == 0.0 || vb == 0.0)
        throw NumericalError("mantel_test: zero variance in a dissimilarity triangle");
    return (da * db).sum() / (va * vb);
}

}  // namespace

double hausdorff_subspace(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != B.rows())
        throw SchemaError("hausdorff_subspace: ambient dimensions differ");
    const Eigen::MatrixXd qa = thin_q(A);
    const Eigen::MatrixXd qb = thin_q(B);
    const double sq = std::max(worst_residual_sq(A, qb), worst_residual_sq(B, qa));
    return std::sqrt(sq);
}

double grassmann_subspace(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          bool orthonormalize) {
    if (A.rows() != B.rows())
        throw SchemaError("grassmann_subspace: ambient dimensions differ");
    if (A.cols() != B.cols())
        throw SchemaError("grassmann_subspace: subspace ranks differ");
    Eigen::MatrixXd qa = A, qb = B;
    if (orthonormalize) {
        qa = thin_q(A);
        qb = thin_q(B);
    } else if (!is_orthonormal(qa, 1e-8) || !is_orthonormal(qb, 1e-8)) {
        throw SchemaError("grassmann_subspace: inputs are not orthonormal "
                          "(pass orthonormalize=true for raw matrices)");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        const double s = std::clamp(svd.singularValues()[i], 0.0, 1.0);
        const double ang = std::acos(s);
        sum += ang * ang;
    }
    return std::sqrt(sum);
}

std::string metric_name(DissimilarityMetric metric) {
    switch (metric) {
        case DissimilarityMetric::Encoding: return "enc";
        case DissimilarityMetric::Phi: return "phi";
        case DissimilarityMetric::Hausdorff: return "hausdorff";
        case DissimilarityMetric::Grassmann: return "grassmann";
    }
    throw SchemaError("metric_name: unknown metric");
}

DissimilarityMatrix dissimilarity_matrix(const std::vector<Eigen::MatrixXd>& items,
                                         DissimilarityMetric metric) {
    if (items.size() < 2) throw SchemaError("dissimilarity_matrix: need at least 2 items");
    const Eigen::Index n = static_cast<Eigen::Index>(items.size());
    DissimilarityMatrix out;
    out.metric = metric;
    out.d = Eigen::MatrixXd::Zero(n, n);
    const bool vector_metric =
        metric == DissimilarityMetric::Encoding || metric == DissimilarityMetric::Phi;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double dij = 0.0;
            if (vector_metric) {
                if (items[i].size() != items[j].size())
                    throw SchemaError("dissimilarity_matrix: encoding sizes differ");
                dij = (items[i] - items[j]).norm();
            } else if (metric == DissimilarityMetric::Hausdorff) {
                dij = hausdorff_subspace(items[i], items[j]);
            } else {
                dij = grassmann_subspace(items[i], items[j], /*orthonormalize=*/true);
            }
            out.d(i, j) = dij;
            out.d(j, i) = dij;
        }
    }
    return out;
}

MantelResult mantel_test(const DissimilarityMatrix& d1, const DissimilarityMatrix& d2,
                         int n_perm, std::uint64_t seed) {
    const Eigen::Index n = d1.d.rows();
    if (d2.d.rows() != n) throw SchemaError("mantel_test: size mismatch");
    if (n < 3) throw SchemaError("mantel_test: need at least 3 items");
    if (n_perm < 1) throw SchemaError("mantel_test: n_perm must be >= 1");

    // Double-centering commutes with joint row+column permutation, so the
    // permutation loop can reuse the centered second matrix.
    const Eigen::MatrixXd c1 = double_center(d1.d);
    const Eigen::MatrixXd c2 = double_center(d2.d);
    const Eigen::VectorXd t1 = upper_triangle(c1);
    MantelResult res;
    res.r_m = pearson(t1, upper_triangle(c2));

    Rng rng(seed);
    int count = 0;
    std::vector<std::size_t> perm;
    Eigen::MatrixXd permuted(n, n);
    for (int p = 0; p < n_perm; ++p) {
        Rng stream = rng.fork(static_cast<std::uint64_t>(p));
        perm = stream.permutation(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                permuted(i, j) =
                    c2(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]),
                       static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]));
        if (pearson(t1, upper_triangle(permuted)) >= res.r_m) ++count;
    }
    res.p_value = (1.0 + count) / (1.0 + n_perm);
    return res;
}

Eigen::MatrixXd mds_embed(const DissimilarityMatrix& d, int k) {
    const Eigen::Index n = d.d.rows();
    if (k < 1 || k > n - 1) throw SchemaError("mds_embed: need 1 <= k <= n-1");
    const Eigen::MatrixXd b = -0.5 * double_center(d.d.cwiseProduct(d.d));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
    if (eig.info() != Eigen::Success)
        throw NumericalError("mds_embed: eigendecomposition failed");

    // Eigen returns ascending eigenvalues; take the top k from the back.
    Eigen::MatrixXd coords(n, k);
    for (int c = 0; c < k; ++c) {
        const Eigen::Index idx = n - 1 - c;
        const double lambda = std::max(eig.eigenvalues()[idx], 0.0);
        coords.col(c) = eig.eigenvectors().col(idx) * std::sqrt(lambda);
    }
    return coords;
}

Eigen::VectorXd centerline_encoding(const Eigen::MatrixX3d& mapped_vertices,
                                    const Eigen::MatrixX3d& centerline) {
    if (centerline.rows() == 0)
        throw SchemaError("centerline_encoding: empty centerline");
    const KdTree tree(centerline);
    Eigen::VectorXd z(mapped_vertices.rows());
    for (Eigen::Index i = 0; i < mapped_vertices.rows(); ++i)
        z[i] = std::sqrt(tree.nearest(mapped_vertices.row(i).transpose()).sq_dist);
    return z;
}

void SsmModel::validate() const {
    if (mean.cols() != 4) throw SchemaError("SsmModel: mean must be n_cntrl x 4");
    if (modes.rows() != mean.size())
        throw SchemaError("SsmModel: mode rows must equal flattened mean size");
    if (scales.size() != modes.cols())
        throw SchemaError("SsmModel: one scale per mode required");
    if (modes.cols() > modes.rows())
        throw SchemaError("SsmModel: more modes than flattened dimensions");
}

Eigen::MatrixXd ssm_sample(const SsmModel& model, const Eigen::VectorXd& b) {
    model.validate();
    if (b.size() != model.modes.cols())
        throw SchemaError("ssm_sample: coefficient length does not match mode count");
    const Eigen::VectorXd flat = model.modes * (model.scales.cwiseProduct(b));
    Eigen::MatrixXd out = model.mean;
    for (Eigen::Index p = 0; p < out.rows(); ++p)
        for (Eigen::Index c = 0; c < 4; ++c) out(p, c) += flat[4 * p + c];
    return out;
}

Eigen::MatrixXd ssm_sample(const SsmModel& model, std::uint64_t seed) {
    model.validate();
    Rng rng(seed);
    Eigen::VectorXd b(model.modes.cols());
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.normal();
    return ssm_sample(model, b);
}

}  // namespace morphassim
