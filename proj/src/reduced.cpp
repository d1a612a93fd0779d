/// @file reduced.cpp
/// @brief Randomized SVD and reconstruction-error utilities.
#include "morphassim/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "morphassim/errors.hpp"
#include "morphassim/rng.hpp"

namespace morphassim {

namespace {

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

ReducedBasis rsvd(const Eigen::MatrixXd& X, int r, int oversample, int power_iters,
                  std::uint64_t seed) {
    if (!X.allFinite()) throw SchemaError("rsvd: non-finite snapshot matrix");
    if (r < 1) throw SchemaError("rsvd: rank must be positive");
    if (r > std::min(X.rows(), X.cols()))
        throw SchemaError("rsvd: rank " + std::to_string(r) + " exceeds matrix dimensions " +
                          std::to_string(X.rows()) + "x" + std::to_string(X.cols()));
    if (oversample < 0 || power_iters < 0)
        throw SchemaError("rsvd: oversample and power_iters must be nonnegative");

    const Eigen::Index sketch =
        std::min<Eigen::Index>(r + oversample, std::min(X.rows(), X.cols()));
    Rng rng(seed);
    Eigen::MatrixXd omega(X.cols(), sketch);
    for (Eigen::Index c = 0; c < omega.cols(); ++c)
        for (Eigen::Index rr = 0; rr < omega.rows(); ++rr) omega(rr, c) = rng.normal();

    Eigen::MatrixXd q = thin_q(X * omega);
    for (int it = 0; it < power_iters; ++it) {
        const Eigen::MatrixXd z = thin_q(X.transpose() * q);
        q = thin_q(X * z);
    }

    const Eigen::MatrixXd b = q.transpose() * X;  // sketch × cols
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU);
    ReducedBasis basis;
    basis.phi = q * svd.matrixU().leftCols(r);
    basis.sigma = svd.singularValues().head(r);
    return basis;
}

double reconstruction_error(const Eigen::VectorXd& field, const ReducedBasis& basis,
                            FieldKind kind) {
    if (field.size() != basis.phi.rows())
        throw SchemaError("reconstruction_error: field/basis dimension mismatch");
    const Eigen::VectorXd residual = field - basis.phi * (basis.phi.transpose() * field);
    if (kind == FieldKind::Velocity) {
        const double denom = field.norm();
        if (denom == 0.0)
            throw NumericalError("reconstruction_error: zero velocity field");
        return residual.norm() / denom;
    }
    const double mean = field.mean();
    const double denom = (field.array() - mean).matrix().norm();
    if (denom == 0.0)
        throw NumericalError("reconstruction_error: constant pressure field");
    return residual.norm() / denom;
}

ReducedBasis local_basis(const Eigen::VectorXd& dissimilarity_row, const Eigen::MatrixXd& pool,
                         int n_T, int r, int oversample, int power_iters, std::uint64_t seed) {
    if (n_T < 1) throw SchemaError("local_basis: n_T must be positive");
    if (pool.cols() % n_T != 0)
        throw SchemaError("local_basis: pool columns not a multiple of n_T");
    const Eigen::Index n_shapes = pool.cols() / n_T;
    if (dissimilarity_row.size() != n_shapes)
        throw SchemaError("local_basis: dissimilarity row length does not match shape count");

    const Eigen::Index n_local = (r + n_T - 1) / n_T;  // ⌈r/n_T⌉
    if (n_local > n_shapes)
        throw SchemaError("local_basis: needs " + std::to_string(n_local) + " shapes, pool has " +
                          std::to_string(n_shapes));

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_shapes));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return dissimilarity_row[a] < dissimilarity_row[b];
    });

    Eigen::MatrixXd gathered(pool.rows(), n_local * n_T);
    for (Eigen::Index i = 0; i < n_local; ++i)
        gathered.middleCols(i * n_T, n_T) = pool.middleCols(order[static_cast<std::size_t>(i)] * n_T, n_T);
    return rsvd(gathered, r, oversample, power_iters, seed);
}

}  // namespace morphassim
