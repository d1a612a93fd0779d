/// @file lipschitz.cpp
/// @brief Certified and sampled Lipschitz estimates of the flow field.
#include <Eigen/SVD>
#include <cmath>

#include "morphassim/registration.hpp"
#include "morphassim/rng.hpp"

namespace morphassim {

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()[0];
}

}  // namespace

LipschitzCertificate lipschitz_bound(const FlowNet& net, const FlowConfig& cfg, std::uint64_t seed) {
    net.validate();
    LipschitzCertificate out;

    // RFF Jacobian factor: per coordinate the cos/sin derivatives are bounded
    // by 2^i, the raw block contributes 1.
    double jpsi_sq = 1.0;
    for (int i = 0; i < net.rff.n_rff; ++i) jpsi_sq += 2.0 * std::pow(4.0, i);
    const double jpsi = std::sqrt(jpsi_sq);

    // First layer composed with ψ: two valid bounds, take the smaller.
    const Eigen::MatrixXd& w1 = net.weights.front();
    const double whole = spectral_norm(w1) * jpsi;
    double blocksum = spectral_norm(w1.leftCols<3>());
    for (int i = 0; i < net.rff.n_rff; ++i) {
        const double c = static_cast<double>(1 << i);
        blocksum += c * spectral_norm(w1.middleCols(3 + 3 * i, 3));
        blocksum += c * spectral_norm(w1.middleCols(3 + 3 * net.rff.n_rff + 3 * i, 3));
    }
    double lhat = std::min(whole, blocksum);
    for (std::size_t l = 1; l < net.weights.size(); ++l) lhat *= spectral_norm(net.weights[l]);
    out.certified = lhat;

    // Sampled difference quotient over 10^4 point pairs in [−π, π]³.
    Rng rng(seed);
    double ltil = 0.0;
    constexpr int kPairs = 10000;
    Eigen::MatrixX3d xs(kPairs, 3), ys(kPairs, 3);
    for (int p = 0; p < kPairs; ++p)
        for (int k = 0; k < 3; ++k) {
            xs(p, k) = rng.uniform(-M_PI, M_PI);
            ys(p, k) = rng.uniform(-M_PI, M_PI);
        }
    const Eigen::MatrixX3d fx = net.velocity(xs);
    const Eigen::MatrixX3d fy = net.velocity(ys);
    for (int p = 0; p < kPairs; ++p) {
        const double dx = (xs.row(p) - ys.row(p)).norm();
        if (dx > 0.0) ltil = std::max(ltil, (fx.row(p) - fy.row(p)).norm() / dx);
    }
    out.empirical = ltil;

    out.certified_bijective = cfg.dt() * out.certified < 1.0;
    out.empirically_bijective = cfg.dt() * out.empirical < 1.0;
    return out;
}

}  // namespace morphassim
