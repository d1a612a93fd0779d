/// @file acceptance.cpp
/// @brief Release gate: thirteen end-to-end properties of the toolkit, each
///        verified at a fixed tolerance and reported as exactly one PASS/FAIL
///        line. The binary exits nonzero when any property fails, so CI can
///        treat it as a single go/no-go check. Every numeric threshold below
///        was either derived analytically or measured and frozen; none is
///        tuned to the implementation under test.
#include <sys/wait.h>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "morphassim/assimilation.hpp"
#include "morphassim/biomarkers.hpp"
#include "morphassim/chamfer.hpp"
#include "morphassim/errors.hpp"
#include "morphassim/fem.hpp"
#include "morphassim/flownet.hpp"
#include "morphassim/fmat_io.hpp"
#include "morphassim/mesh.hpp"
#include "morphassim/rbf_transport.hpp"
#include "morphassim/reduced.hpp"
#include "morphassim/registration.hpp"
#include "morphassim/rng.hpp"
#include "morphassim/shape_stats.hpp"
#include "morphassim/tetmesh.hpp"
#include "morphassim/windkessel.hpp"
#include "quadrature_oracle.hpp"
#include "test_helpers.hpp"

using namespace morphassim;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

std::string failure(const char* fmt, double a, double b = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), fmt, a, b);
    return buf;
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
    return m;
}

Eigen::MatrixXd random_orthonormal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, rows, cols)).householderQ() *
           Eigen::MatrixXd::Identity(rows, cols);
}

Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index n) {
    const Eigen::MatrixXd a = random_matrix(rng, n, n);
    return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

ObservationSystem synthetic_system(Rng& rng, Eigen::Index m, Eigen::Index d_u, Eigen::Index r) {
    const Eigen::MatrixXd rows = random_matrix(rng, m, d_u);
    return build_observation_system(rows.sparseView(), random_orthonormal(rng, d_u, r));
}

Eigen::MatrixX3d grid3(int n) {
    Eigen::MatrixX3d pts(n * n * n, 3);
    int r = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                pts.row(r++) << i / (n - 1.0), j / (n - 1.0), k / (n - 1.0);
    return pts;
}

Eigen::MatrixX3d sinusoidal_warp(const Eigen::MatrixX3d& X, double amplitude) {
    Eigen::MatrixX3d Y = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Y(i, 0) += amplitude * std::sin(2.0 * std::numbers::pi * X(i, 1));
        Y(i, 1) += amplitude * std::sin(2.0 * std::numbers::pi * X(i, 2));
        Y(i, 2) += amplitude * std::sin(2.0 * std::numbers::pi * X(i, 0));
    }
    return Y;
}

/// Ten-vertex triangle strip (two rows of five) with jittered heights, so
/// normals, edge lengths and the centerline term are all nontrivial.
LabeledSurfaceMesh strip10(Rng& rng, const Eigen::Vector3d& scale, const Eigen::Vector3d& shift) {
    LabeledSurfaceMesh m;
    m.vertices.resize(10, 3);
    for (int i = 0; i < 5; ++i) {
        m.vertices.row(i) << 0.25 * i, 0.0, 0.1 * rng.normal();
        m.vertices.row(i + 5) << 0.25 * i, 0.6, 0.1 * rng.normal();
    }
    for (Eigen::Index v = 0; v < 10; ++v)
        m.vertices.row(v) = m.vertices.row(v).cwiseProduct(scale.transpose()) + shift.transpose();
    m.faces.resize(8, 3);
    for (int i = 0; i < 4; ++i) {
        m.faces.row(2 * i) << i, i + 1, i + 5;
        m.faces.row(2 * i + 1) << i + 1, i + 6, i + 5;
    }
    m.face_labels.assign(8, RegionId::Wall);
    m.centerline.resize(2, 3);
    m.centerline.row(0) = 0.5 * (m.vertices.row(0) + m.vertices.row(5));
    m.centerline.row(1) = 0.5 * (m.vertices.row(4) + m.vertices.row(9));
    return m;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MORPHASSIM_CLI_BIN) + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

std::map<std::string, std::string> read_directory_bytes(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        files[entry.path().filename().string()] = body.str();
    }
    return files;
}

// ---------------------------------------------------------------------------
// 1. k-d tree chamfer distance equals the O(n^2) reference
// ---------------------------------------------------------------------------

std::string criterion_chamfer() {
    Rng rng(101);
    for (int pair = 0; pair < 200; ++pair) {
        const int na = 1 + static_cast<int>(rng.index(300));
        const int nb = 1 + static_cast<int>(rng.index(300));
        const Eigen::MatrixX3d a = testing::random_cloud(rng, na, 2.0);
        const Eigen::MatrixX3d b = testing::random_cloud(rng, nb, 2.0);
        const double fast = chamfer(a, b);
        const double slow = chamfer_bruteforce(a, b);
        const double rel = std::abs(fast - slow) / std::max(std::abs(slow), 1e-300);
        if (rel > 1e-12) return failure("pair relative gap %.3g exceeds 1e-12", rel);
    }
    return "";
}

// ---------------------------------------------------------------------------
// 2. Full objective gradient vs central finite differences
// ---------------------------------------------------------------------------

std::string criterion_gradient() {
    Rng rng(202);
    const LabeledSurfaceMesh src = strip10(rng, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0});
    const LabeledSurfaceMesh dst = strip10(rng, {1.2, 0.8, 1.0}, {0.1, -0.05, 0.08});

    RffConfig rff;
    rff.n_rff = 2;
    const FlowNet net = FlowNet::make(rff, {8, 8}, 12);  // two hidden layers
    LossWeights w;
    w.lambda_n = 0.3;
    w.lambda_C = 0.5;
    w.lambda_edges = 0.7;
    w.lambda_en = 1.3;

    LossEval eval = registration_loss(net, src, dst, w, FlowConfig{});
    eval.tape->backward(eval.loss_id);
    std::vector<Eigen::MatrixXd> gw, gb;
    for (std::size_t l = 0; l < eval.params.w.size(); ++l) {
        gw.push_back(eval.tape->grad(eval.params.w[l]));
        gb.push_back(eval.tape->grad(eval.params.b[l]));
    }

    const double h = 1e-6;
    double worst = 0.0;
    const auto fd_check = [&](ad::Tape::Id id, const Eigen::MatrixXd& analytic) {
        const Eigen::MatrixXd base = eval.tape->value(id);
        for (Eigen::Index i = 0; i < base.rows(); ++i) {
            for (Eigen::Index j = 0; j < base.cols(); ++j) {
                Eigen::MatrixXd pert = base;
                pert(i, j) = base(i, j) + h;
                eval.tape->set_parameter(id, pert);
                eval.tape->revalue();
                const double fu = eval.tape->scalar_value(eval.loss_id);
                pert(i, j) = base(i, j) - h;
                eval.tape->set_parameter(id, pert);
                eval.tape->revalue();
                const double fd = eval.tape->scalar_value(eval.loss_id);
                const double g = (fu - fd) / (2.0 * h);
                const double scale = std::max({1e-6, std::abs(g), std::abs(analytic(i, j))});
                worst = std::max(worst, std::abs(g - analytic(i, j)) / scale);
            }
        }
        eval.tape->set_parameter(id, base);
        eval.tape->revalue();
    };
    for (std::size_t l = 0; l < eval.params.w.size(); ++l) {
        fd_check(eval.params.w[l], gw[l]);
        fd_check(eval.params.b[l], gb[l]);
    }
    if (worst >= 1e-5) return failure("worst relative error %.3g >= 1e-5", worst);
    return "";
}

// ---------------------------------------------------------------------------
// 3. Multigrid registration benchmark: sphere -> ellipsoid
// ---------------------------------------------------------------------------

std::string criterion_benchmark() {
    const LabeledSurfaceMesh coarse = testing::icosphere(1);
    const LabeledSurfaceMesh fine = testing::icosphere(2);  // 320 faces
    const LabeledSurfaceMesh target = testing::scaled_copy(fine, {1.3, 0.9, 1.0});

    TrainConfig cfg;
    cfg.rff.n_rff = 2;
    cfg.hidden = {64, 64};
    cfg.schedule.total_epochs = 800;
    cfg.schedule.switch_epochs = {400};
    cfg.adam.lr = 1.5e-2;
    cfg.weights.lambda_edges = 1e-3;
    cfg.weights.lambda_en = 1e-3;

    const RegistrationResult res = train_multigrid({coarse, fine}, target, cfg, 2u);
    if (res.normalized_chamfer >= 0.01)
        return failure("final chamfer/diameter %.4g >= 0.01", res.normalized_chamfer);

    // Smoothed (EMA, decay 0.995) loss must never increase inside a segment;
    // the refinement switch at epoch 400 restarts the average.
    const auto& trace = res.loss_trace;
    for (const auto [lo, hi] : {std::pair<int, int>{0, 400}, std::pair<int, int>{400, 800}}) {
        double ema = trace[static_cast<std::size_t>(lo)];
        for (int e = lo + 1; e < hi; ++e) {
            const double next = 0.995 * ema + 0.005 * trace[static_cast<std::size_t>(e)];
            if (next > ema) return failure("EMA loss rose at epoch %.0f", static_cast<double>(e));
            ema = next;
        }
    }
    // No explosion when the source refines: the raw loss may jump, but stays
    // within a small factor of the pre-switch value (measured jump <= 1.7x
    // across seeds; 3x is the frozen "no explosion" bound).
    if (trace[400] > 3.0 * trace[399])
        return failure("loss exploded at the refinement switch (%.3g -> %.3g)", trace[399],
                       trace[400]);
    return "";
}

// ---------------------------------------------------------------------------
// 4. Bijectivity: certified contraction and flow inversion
// ---------------------------------------------------------------------------

std::string criterion_bijectivity() {
    // A trained net whose certified step Lipschitz constant satisfies
    // dt L < 1: fifty Euler steps leave ample contraction headroom
    // (measured dt L = 0.74 for this configuration).
    const LabeledSurfaceMesh src = testing::icosphere(1);
    const LabeledSurfaceMesh dst = testing::scaled_copy(src, {1.05, 0.97, 1.0});
    TrainConfig cfg;
    cfg.rff.n_rff = 2;
    cfg.hidden = {16, 16};
    cfg.flow.n_steps = 50;
    cfg.schedule.total_epochs = 300;
    cfg.schedule.switch_epochs = {};
    cfg.weights.lambda_en = 1.0;

    const RegistrationResult res = train_multigrid({src}, dst, cfg, 7u);
    if (!res.certificate.certified_bijective)
        return failure("trained net is not certified contractive (dt L = %.3g)",
                       res.certificate.certified / cfg.flow.n_steps);

    const Eigen::MatrixX3d y = dst.vertices;
    const Eigen::MatrixX3d x = invert_flow(res.net, y, cfg.flow, 1e-8, 200);
    const Eigen::MatrixX3d fwd = flow_forward(res.net, x, cfg.flow).back();
    const double round_trip = (fwd - y).cwiseAbs().maxCoeff();
    if (round_trip >= 1e-6) return failure("round-trip error %.3g >= 1e-6", round_trip);

    // The sampled Lipschitz estimate can never exceed the certified bound.
    Rng seeds(404);
    for (int trial = 0; trial < 50; ++trial) {
        RffConfig rff;
        rff.n_rff = 1 + static_cast<int>(seeds.index(3));
        const std::vector<int> hidden(1 + seeds.index(2), 4 + static_cast<int>(seeds.index(8)));
        const FlowNet net = FlowNet::make(rff, hidden, 900 + static_cast<std::uint64_t>(trial));
        const LipschitzCertificate cert = lipschitz_bound(net, FlowConfig{});
        if (cert.empirical > cert.certified)
            return failure("sampled estimate %.4g exceeds certified bound %.4g", cert.empirical,
                           cert.certified);
    }
    return "";
}

// ---------------------------------------------------------------------------
// 5. RBF field transport
// ---------------------------------------------------------------------------

std::string criterion_transport() {
    // Affine maps are reproduced exactly by the polynomial part.
    Rng rng(505);
    const Eigen::MatrixX3d centers = testing::random_cloud(rng, 60, 1.0);
    Eigen::Matrix3d a_mat;
    Eigen::Vector3d b_vec;
    for (int i = 0; i < 9; ++i) a_mat.data()[i] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) b_vec[i] = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd vals = (centers * a_mat.transpose()).rowwise() + b_vec.transpose();
    const RbfMap affine_map = fit_rbf_map(centers, vals, 30);
    const Eigen::MatrixX3d queries = testing::random_cloud(rng, 20, 3.0);
    const Eigen::MatrixXd expect = (queries * a_mat.transpose()).rowwise() + b_vec.transpose();
    const Eigen::MatrixXd got = rbf_interpolate(affine_map, queries);
    const double affine_err =
        (got - expect).cwiseAbs().maxCoeff() / expect.cwiseAbs().maxCoeff();
    if (affine_err >= 1e-9) return failure("affine reproduction error %.3g >= 1e-9", affine_err);

    // Pushforward then pullback across a small sinusoidal warp, sampled away
    // from the boundary where neighborhoods are one-sided.
    const FieldFn g = [](const Eigen::Vector3d& p) {
        return Eigen::VectorXd::Constant(1, std::sin(p.x() + 2.0 * p.y()) * std::cos(p.z()));
    };
    Rng eval_rng(511);
    Eigen::MatrixX3d evals(200, 3);
    for (Eigen::Index i = 0; i < evals.rows(); ++i)
        evals.row(i) << eval_rng.uniform(0.25, 0.75), eval_rng.uniform(0.25, 0.75),
            eval_rng.uniform(0.25, 0.75);

    const auto round_trip_error = [&](int n) {
        const Eigen::MatrixX3d x = grid3(n);
        const Eigen::MatrixX3d y = sinusoidal_warp(x, 1e-2);
        const RbfMap forward = fit_rbf_map(x, y, std::min(30, n * n * n));
        const RbfMap inverse = fit_rbf_map(y, x, std::min(30, n * n * n));
        const FieldFn pulled = [&](const Eigen::Vector3d& p) {
            Eigen::MatrixX3d q(1, 3);
            q.row(0) = p.transpose();
            const Eigen::MatrixXd mapped = rbf_interpolate(forward, q);
            return Eigen::VectorXd::Constant(1, g(mapped.row(0).transpose())(0));
        };
        const Eigen::MatrixXd back = pushforward_field(pulled, inverse, evals);
        double err = 0.0;
        for (Eigen::Index i = 0; i < evals.rows(); ++i)
            err = std::max(err, std::abs(back(i, 0) - g(evals.row(i).transpose())(0)));
        return err;
    };
    const double e4 = round_trip_error(4);
    const double e8 = round_trip_error(8);
    const double e16 = round_trip_error(16);
    if (e8 >= 1e-3) return failure("round-trip error %.3g >= 1e-3", e8);
    if (e4 / e8 < 3.0) return failure("density-doubling ratio %.3g < 3", e4 / e8);
    if (e8 / e16 < 3.0) return failure("density-doubling ratio %.3g < 3", e8 / e16);
    return "";
}

// ---------------------------------------------------------------------------
// 6. Randomized SVD vs the dense decomposition
// ---------------------------------------------------------------------------

std::string criterion_rsvd() {
    Rng rng(606);
    for (int trial = 0; trial < 5; ++trial) {
        // Snapshot-like spectra decay geometrically; sigma_1 = 1 makes the
        // 1e-8 comparison an absolute-and-relative bound at once.
        const Eigen::MatrixXd u = random_orthonormal(rng, 50, 40);
        const Eigen::MatrixXd v = random_orthonormal(rng, 40, 40);
        Eigen::VectorXd sigma(40);
        for (int i = 0; i < 40; ++i) sigma[i] = std::pow(2.0, -i);
        const Eigen::MatrixXd x = u * sigma.asDiagonal() * v.transpose();

        const Eigen::JacobiSVD<Eigen::MatrixXd> dense(x, Eigen::ComputeThinU);
        const ReducedBasis rb = rsvd(x, 10);
        for (int i = 0; i < 10; ++i) {
            const double gap = std::abs(rb.sigma[i] - dense.singularValues()[i]);
            if (gap > 1e-8) return failure("singular value gap %.3g > 1e-8", gap);
        }
        // Largest principal angle between the leading-10 subspaces.
        const Eigen::JacobiSVD<Eigen::MatrixXd> overlap(rb.phi.transpose() *
                                                        dense.matrixU().leftCols(10));
        const double cos_min = std::min(1.0, overlap.singularValues().minCoeff());
        const double angle = std::sqrt(std::max(0.0, 1.0 - cos_min * cos_min));
        if (angle >= 1e-6) return failure("subspace angle %.3g >= 1e-6", angle);

        // Mean reconstruction error is non-increasing over nested ranks.
        double previous = std::numeric_limits<double>::infinity();
        for (int r = 1; r <= 10; ++r) {
            ReducedBasis sub;
            sub.phi = rb.phi.leftCols(r);
            sub.sigma = rb.sigma.head(r);
            double mean = 0.0;
            for (Eigen::Index col = 0; col < x.cols(); ++col)
                mean += reconstruction_error(x.col(col), sub, FieldKind::Velocity);
            mean /= static_cast<double>(x.cols());
            if (mean > previous + 1e-12)
                return failure("reconstruction error rose at rank %.0f", static_cast<double>(r));
            previous = mean;
        }
    }
    return "";
}

// ---------------------------------------------------------------------------
// 7. Subspace metrics and the Mantel self-test
// ---------------------------------------------------------------------------

std::string criterion_subspace() {
    Rng rng(707);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd q = random_orthonormal(rng, 8, 2);
        const double theta = rng.uniform(0.05, std::numbers::pi / 2.0 - 0.05);
        const Eigen::MatrixXd a = q.col(0);
        const Eigen::MatrixXd b = std::cos(theta) * q.col(0) + std::sin(theta) * q.col(1);
        const double got = grassmann_subspace(a, b);
        if (std::abs(got - theta) > 1e-12)
            return failure("grassmann angle off by %.3g", std::abs(got - theta));
    }

    const Eigen::MatrixXd span = random_orthonormal(rng, 8, 2);
    Eigen::Matrix2d mix;
    mix << 1.3, -0.4, 0.2, 0.9;  // invertible: same span, different columns
    const double equal_spans = hausdorff_subspace(span, span * mix);
    if (equal_spans > 1e-12) return failure("equal spans score %.3g > 1e-12", equal_spans);
    const double orthogonal =
        hausdorff_subspace(Eigen::MatrixXd::Identity(8, 8).col(0),
                           Eigen::MatrixXd::Identity(8, 8).col(1));
    if (std::abs(orthogonal - 1.0) > 1e-12)
        return failure("orthogonal spans score %.3g != 1", orthogonal);

    // Mantel of a matrix against itself: r = 1 and the smallest possible
    // p-value, since no permutation can beat the identity alignment.
    DissimilarityMatrix d1;
    d1.d = Eigen::MatrixXd::Zero(12, 12);
    for (Eigen::Index i = 0; i < 12; ++i)
        for (Eigen::Index j = i + 1; j < 12; ++j)
            d1.d(i, j) = d1.d(j, i) = 0.1 + std::abs(rng.normal());
    const MantelResult mantel = mantel_test(d1, d1, 999, 7u);
    if (std::abs(mantel.r_m - 1.0) > 1e-12)
        return failure("self-correlation %.15g != 1", mantel.r_m);
    if (std::abs(mantel.p_value - 1.0 / 1000.0) > 1e-15)
        return failure("self-test p-value %.6g != 1/1000", mantel.p_value);
    return "";
}

// ---------------------------------------------------------------------------
// 8. PBDW state estimation
// ---------------------------------------------------------------------------

std::string criterion_pbdw() {
    // Noise-free data inside the reduced span is recovered exactly.
    Rng rng(9100);
    for (int trial = 0; trial < 5; ++trial) {
        Rng fork = rng.fork(static_cast<std::uint64_t>(trial));
        const ObservationSystem obs = synthetic_system(fork, 15, 40, 5);
        const Eigen::MatrixXd s = random_spd(fork, 15);
        const Eigen::VectorXd z_star = random_vector(fork, 5);
        const Eigen::VectorXd u_star = obs.phi * z_star;
        const PbdwSolution sol = pbdw_solve(obs, s, observe(obs, u_star));
        const double rel = (sol.u_hat - u_star).norm() / u_star.norm();
        if (rel >= 1e-7) return failure("in-span recovery error %.3g >= 1e-7", rel);
    }

    // The staged solve equals the minimizer of the joint quadratic form,
    // solved here as one dense (r+m) normal system.
    Rng joint_rng(808);
    for (int trial = 0; trial < 50; ++trial) {
        Rng fork = joint_rng.fork(static_cast<std::uint64_t>(trial));
        const Eigen::Index m = 12, d_u = 20, r = 4;  // m <= d_u keeps K invertible
        const ObservationSystem obs = synthetic_system(fork, m, d_u, r);
        const Eigen::MatrixXd s = random_spd(fork, m);
        const Eigen::VectorXd y = random_vector(fork, m);
        const PbdwSolution sol = pbdw_solve(obs, s, y);

        const Eigen::MatrixXd s_inv = s.inverse();
        Eigen::MatrixXd joint(r + m, r + m);
        joint.topLeftCorner(r, r) = obs.l.transpose() * s_inv * obs.l;
        joint.topRightCorner(r, m) = obs.l.transpose() * s_inv * obs.k;
        joint.bottomLeftCorner(m, r) = obs.k * s_inv * obs.l;
        joint.bottomRightCorner(m, m) = obs.k * s_inv + obs.k * s_inv * obs.k;
        Eigen::VectorXd rhs(r + m);
        rhs.head(r) = obs.l.transpose() * s_inv * y;
        rhs.tail(m) = obs.k * s_inv * y;
        const Eigen::VectorXd oracle = Eigen::FullPivLU<Eigen::MatrixXd>(joint).solve(rhs);
        const double gap_z = (oracle.head(r) - sol.z).norm() / (sol.z.norm() + 1.0);
        const double gap_eta = (oracle.tail(m) - sol.eta).norm() / (sol.eta.norm() + 1.0);
        if (gap_z > 1e-8 || gap_eta > 1e-8)
            return failure("joint oracle gap %.3g / %.3g > 1e-8", gap_z, gap_eta);
    }

    // Gauss-Markov: the coefficient estimate is unbiased; the empirical mean
    // over 1000 draws stays within four standard errors of the truth.
    {
        Rng gm(9400);
        const Eigen::Index m = 15, d_u = 35, r = 4;
        const ObservationSystem obs = synthetic_system(gm, m, d_u, r);
        Eigen::VectorXd diag(m);
        for (Eigen::Index i = 0; i < m; ++i) diag[i] = 0.5 + gm.uniform();
        const Eigen::MatrixXd s = diag.asDiagonal();
        const Eigen::VectorXd z_star = random_vector(gm, r);
        const Eigen::VectorXd y_clean = obs.l * z_star;

        PbdwOptions options;
        options.with_covariance = true;
        const PbdwSolution reference = pbdw_solve(obs, s, y_clean, options);
        const Eigen::MatrixXd cov_z = reference.h_z * s * reference.h_z.transpose();

        const int draws = 1000;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(r);
        for (int k = 0; k < draws; ++k) {
            Eigen::VectorXd y = y_clean;
            for (Eigen::Index i = 0; i < m; ++i) y[i] += std::sqrt(diag[i]) * gm.normal();
            mean += pbdw_solve(obs, s, y).z;
        }
        mean /= draws;
        for (Eigen::Index i = 0; i < r; ++i) {
            const double se = std::sqrt(cov_z(i, i) / draws);
            if (std::abs(mean[i] - z_star[i]) >= 4.0 * se)
                return failure("bias %.3g exceeds 4 SE = %.3g", std::abs(mean[i] - z_star[i]),
                               4.0 * se);
        }
    }

    // Monte-Carlo covariance of the state matches H_u S H_u^T entrywise
    // within three standard errors on a 10-dimensional instance.
    {
        Rng mc(9500);
        const Eigen::Index m = 8, d_u = 10, r = 3;
        const ObservationSystem obs = synthetic_system(mc, m, d_u, r);
        const Eigen::MatrixXd s = random_spd(mc, m);
        const Eigen::MatrixXd chol = s.llt().matrixL();
        const Eigen::VectorXd y0 = random_vector(mc, m);

        PbdwOptions options;
        options.with_covariance = true;
        const PbdwSolution reference = pbdw_solve(obs, s, y0, options);
        const PbdwCovariance predicted = pbdw_state_covariance(obs, s, reference);

        const int draws = 500;
        Eigen::MatrixXd samples(d_u, draws);
        for (int k = 0; k < draws; ++k)
            samples.col(k) = pbdw_solve(obs, s, y0 + chol * random_vector(mc, m)).u_hat;
        const Eigen::VectorXd sample_mean = samples.rowwise().mean();
        const Eigen::MatrixXd centered = samples.colwise() - sample_mean;
        const Eigen::MatrixXd empirical = centered * centered.transpose() / (draws - 1.0);
        for (Eigen::Index i = 0; i < d_u; ++i) {
            for (Eigen::Index j = 0; j < d_u; ++j) {
                const double se = std::sqrt((predicted.sigma_u(i, i) * predicted.sigma_u(j, j) +
                                             predicted.sigma_u(i, j) * predicted.sigma_u(i, j)) /
                                            (draws - 1.0));
                if (std::abs(empirical(i, j) - predicted.sigma_u(i, j)) >= 3.0 * se)
                    return failure("covariance entry off by %.3g (3 SE = %.3g)",
                                   std::abs(empirical(i, j) - predicted.sigma_u(i, j)), 3.0 * se);
            }
        }
    }
    return "";
}

// ---------------------------------------------------------------------------
// 9. Heteroscedastic noise covariance
// ---------------------------------------------------------------------------

std::string criterion_noise() {
    // Three-voxel hand case: two wall-adjacent voxels (heteroscedastic,
    // kernel-correlated) and one interior voxel (homoscedastic). The whole
    // 10x10 matrix is assembled independently below from the closed forms.
    const TetMesh mesh = make_box_mesh(3, 3, 3);
    Eigen::MatrixX3d centers(3, 3);
    centers.row(0) = Eigen::Vector3d(0.3, 0.5, 0.04);
    centers.row(1) = Eigen::Vector3d(0.7, 0.5, 0.03);
    centers.row(2) = Eigen::Vector3d(0.5, 0.5, 0.5);
    Eigen::VectorXd observed(9);
    observed << 1.0, 1.0, 0.0, 0.0, 2.0, 0.0, 1.0, 0.0, 0.0;

    NoiseModel model;  // calm defaults: snr_ho 10, snr_he 0.5
    model.delta = 0.1;
    const NoiseCovariance cov = build_noise_covariance(mesh, centers, 0.1, model, observed);

    const double u_bar = (std::sqrt(2.0) + 2.0 + 1.0) / 3.0;
    const double var_ho = std::pow(u_bar / model.snr_ho, 2);
    const double var_he = std::pow(u_bar / model.snr_he, 2);
    const double floor2 = var_ho * 1e-4;
    const double sigma_div2 = std::pow(u_bar * 1e-2, 2);
    const Eigen::Vector3d d0 = Eigen::Vector3d(1, 1, 0).normalized();
    const Eigen::Vector3d d1(0, 1, 0);
    const double kern =
        std::exp(-(centers.row(0) - centers.row(1)).squaredNorm() / (2.0 * cov.l_t));

    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(10, 10);
    expected.block<3, 3>(0, 0) =
        var_he * (1.0 + model.eps2) * d0 * d0.transpose() + floor2 * Eigen::Matrix3d::Identity();
    expected.block<3, 3>(3, 3) =
        var_he * (1.0 + model.eps2) * d1 * d1.transpose() + floor2 * Eigen::Matrix3d::Identity();
    expected.block<3, 3>(0, 3) = var_he * kern * d0 * d1.transpose();
    expected.block<3, 3>(3, 0) = expected.block<3, 3>(0, 3).transpose();
    expected.block<3, 3>(6, 6) = var_ho * Eigen::Matrix3d::Identity();
    expected(9, 9) = sigma_div2;

    const double block_gap = (cov.s - expected).cwiseAbs().maxCoeff();
    if (block_gap > 1e-12) return failure("hand-case block gap %.3g > 1e-12", block_gap);
    const double asym = (cov.s - cov.s.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-14) return failure("asymmetry %.3g > 1e-14", asym);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.s, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < floor2 - 1e-12)
        return failure("min eigenvalue %.3g below the floor %.3g", eig.eigenvalues().minCoeff(),
                       floor2);

    // The three published SNR presets resolve and assemble.
    const std::pair<const char*, std::pair<double, double>> presets[] = {
        {"calm", {10.0, 0.5}}, {"noisy", {0.4, 0.1}}, {"extreme", {0.2, 0.05}}};
    for (const auto& [name, snr] : presets) {
        NoiseModel preset = noise_preset(name);
        if (preset.snr_ho != snr.first || preset.snr_he != snr.second)
            return failure("preset pair (%g, %g) is wrong", preset.snr_ho, preset.snr_he);
        preset.delta = 0.1;
        build_noise_covariance(mesh, centers, 0.1, preset, observed);
    }
    return "";
}

// ---------------------------------------------------------------------------
// 10. Finite elements: assembly oracle, estimator convergence, ROM and bias
// ---------------------------------------------------------------------------

double ppe_error(const TetMesh& mesh) {
    using std::numbers::pi;
    const P1Operators ops = assemble_p1(mesh);
    FlowParams params;
    const auto carrier = [](const Eigen::Vector3d& x) {
        return std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::sin(pi * x[2]);
    };
    const auto grad_carrier = [](const Eigen::Vector3d& x) {
        return Eigen::Vector3d(pi * std::cos(pi * x[0]) * std::sin(pi * x[1]) * std::sin(pi * x[2]),
                               pi * std::sin(pi * x[0]) * std::cos(pi * x[1]) * std::sin(pi * x[2]),
                               pi * std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::cos(pi * x[2]));
    };
    const FemField zero{Eigen::VectorXd::Zero(3 * mesh.n_vertices()), 0.0};
    const double factor = -params.tau / params.rho;
    const FemField u_next = interpolate_vector(
        mesh, [&](const Eigen::Vector3d& x) { return (factor * grad_carrier(x)).eval(); });
    const FemField p = ppe_solve(mesh, ops, zero, zero, u_next, params);
    const FemField exact = interpolate_scalar(mesh, carrier);
    return l2_norm_scalar(ops, p.values - exact.values) / l2_norm_scalar(ops, exact.values);
}

double ste_error(const TetMesh& mesh) {
    const P1Operators ops = assemble_p1(mesh);
    FlowParams params;
    const FemField u = interpolate_vector(
        mesh, [](const Eigen::Vector3d& x) { return Eigen::Vector3d(x[1], x[0], 0.0); });
    const auto [w, p] = ste_solve(mesh, ops, u, u, u, params);
    FemField exact = interpolate_scalar(mesh, [&](const Eigen::Vector3d& x) {
        return -params.rho * (x[0] * x[0] + x[1] * x[1]) / 2.0;
    });
    exact.values.array() -= ops.lumped_mass.dot(exact.values) / ops.lumped_mass.sum();
    return l2_norm_scalar(ops, p.values - exact.values) / l2_norm_scalar(ops, exact.values);
}

std::string criterion_fem() {
    // Single-tet operators against the independent collapsed-quadrature
    // oracle, on three random tetrahedra.
    Rng rng(1010);
    for (int trial = 0; trial < 3; ++trial) {
        const TetMesh tet = testing::random_single_tet(rng);
        const P1Operators ops = assemble_p1(tet);
        const Eigen::Vector3d a = tet.vertices.row(tet.tets(0, 0));
        const Eigen::Vector3d b = tet.vertices.row(tet.tets(0, 1));
        const Eigen::Vector3d c = tet.vertices.row(tet.tets(0, 2));
        const Eigen::Vector3d d = tet.vertices.row(tet.tets(0, 3));
        const auto pts = testing::tet_quadrature(a, b, c, d);
        const testing::TetBasis basis(a, b, c, d);
        double h = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                h = std::max(h, (tet.vertices.row(tet.tets(0, i)) -
                                 tet.vertices.row(tet.tets(0, j)))
                                    .norm());
        const auto close = [](double got, double want) {
            return std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want));
        };
        for (int i = 0; i < 4; ++i) {
            const int gi = tet.tets(0, i);
            const double lump =
                testing::integrate(pts, [&](const Eigen::Vector3d& x) { return basis.values(x)[i]; });
            if (!close(ops.lumped_mass[gi], lump)) return failure("lumped mass gap at %d", i);
            for (int j = 0; j < 4; ++j) {
                const int gj = tet.tets(0, j);
                const double stiff = testing::integrate(
                    pts, [&](const Eigen::Vector3d&) { return basis.grad[i].dot(basis.grad[j]); });
                const double mass = testing::integrate(pts, [&](const Eigen::Vector3d& x) {
                    const Eigen::Vector4d n = basis.values(x);
                    return n[i] * n[j];
                });
                if (!close(ops.stiffness_scalar.coeff(gi, gj), stiff))
                    return failure("stiffness gap %.3g", std::abs(ops.stiffness_scalar.coeff(gi, gj) - stiff));
                if (!close(ops.mass_scalar.coeff(gi, gj), mass))
                    return failure("mass gap %.3g", std::abs(ops.mass_scalar.coeff(gi, gj) - mass));
                if (!close(ops.stabilization_h2.coeff(gi, gj), h * h * stiff))
                    return failure("stabilization gap %.3g",
                                   std::abs(ops.stabilization_h2.coeff(gi, gj) - h * h * stiff));
                for (int comp = 0; comp < 3; ++comp) {
                    const double pairing = testing::integrate(pts, [&](const Eigen::Vector3d& x) {
                        return basis.values(x)[j] * basis.grad[i][comp];
                    });
                    if (!close(ops.coupling.coeff(3 * gi + comp, gj), pairing))
                        return failure("coupling gap %.3g",
                                       std::abs(ops.coupling.coeff(3 * gi + comp, gj) - pairing));
                    if (!close(ops.grad_pairing.coeff(gi, 3 * gj + comp), pairing))
                        return failure("grad pairing gap %.3g",
                                       std::abs(ops.grad_pairing.coeff(gi, 3 * gj + comp) - pairing));
                }
            }
        }
    }

    // Estimator convergence at first order or better across 48 / 384 / 3072
    // tets (midpoint refinements of the unit box).
    std::vector<double> ppe_errors, ste_errors;
    TetMesh mesh = make_box_mesh(2, 2, 2);
    for (int level = 0; level < 3; ++level) {
        ppe_errors.push_back(ppe_error(mesh));
        ste_errors.push_back(ste_error(mesh));
        if (level < 2) mesh = refine_tet_mesh(mesh);
    }
    // Measured: PPE 6.07e-1 / 2.37e-1 / 8.06e-2, STE 7.35e-2 / 2.18e-2 / 8.00e-3.
    for (int l = 0; l < 2; ++l) {
        if (ppe_errors[static_cast<std::size_t>(l)] / ppe_errors[static_cast<std::size_t>(l) + 1] <= 2.0)
            return failure("transient estimator ratio %.3g <= 2",
                           ppe_errors[static_cast<std::size_t>(l)] / ppe_errors[static_cast<std::size_t>(l) + 1]);
        if (ste_errors[static_cast<std::size_t>(l)] / ste_errors[static_cast<std::size_t>(l) + 1] <= 2.0)
            return failure("Stokes estimator ratio %.3g <= 2",
                           ste_errors[static_cast<std::size_t>(l)] / ste_errors[static_cast<std::size_t>(l) + 1]);
    }

    // Zero velocity data produces exactly zero pressure in both estimators.
    const TetMesh small = make_box_mesh(2, 2, 2);
    const P1Operators small_ops = assemble_p1(small);
    const FemField zero{Eigen::VectorXd::Zero(3 * small.n_vertices()), 0.0};
    const FemField p0 = ppe_solve(small, small_ops, zero, zero, zero, FlowParams{});
    const auto [w0, q0] = ste_solve(small, small_ops, zero, zero, zero, FlowParams{});
    if (p0.values.cwiseAbs().maxCoeff() != 0.0 || q0.values.cwiseAbs().maxCoeff() != 0.0)
        return failure("zero data left pressure residue %.3g",
                       std::max(p0.values.cwiseAbs().maxCoeff(), q0.values.cwiseAbs().maxCoeff()));

    // Supremizer enrichment: reduced dimension r_u + 2 r_p.
    Rng rom_rng(1020);
    const Eigen::MatrixXd basis_u = random_orthonormal(rom_rng, 3 * small.n_vertices(), 4);
    const Eigen::MatrixXd basis_p = random_orthonormal(rom_rng, small.n_vertices(), 3);
    const SteRom rom = rom_project_ste(small, small_ops, basis_u, basis_p, 1.0, true);
    if (rom.dimension() != 4 + 2 * 3)
        return failure("reduced dimension %.0f != r_u + 2 r_p", static_cast<double>(rom.dimension()));

    // Bias corrections: exactly zero at zero covariance, linear in the blocks.
    const BiasResult zero_bias =
        bias_correction(small, small_ops, zero_block_covariance(small), kBloodDensity, BiasMode::Ppe);
    const BiasResult zero_bias_ste =
        bias_correction(small, small_ops, zero_block_covariance(small), kBloodDensity, BiasMode::Ste);
    if (zero_bias.pressure.values.cwiseAbs().maxCoeff() != 0.0 ||
        zero_bias_ste.pressure.values.cwiseAbs().maxCoeff() != 0.0)
        return failure("zero covariance left bias residue %.3g",
                       std::max(zero_bias.pressure.values.cwiseAbs().maxCoeff(),
                                zero_bias_ste.pressure.values.cwiseAbs().maxCoeff()));

    const auto random_blocks = [&](Rng& r) {
        BlockCovariance cov(small.n_vertices());
        for (Eigen::Index t = 0; t < small.n_tets(); ++t) {
            for (int ia = 0; ia < 4; ++ia) {
                for (int ib = 0; ib < 4; ++ib) {
                    const int i = small.tets(t, ia), j = small.tets(t, ib);
                    if (i > j || cov.has(i, j)) continue;
                    Eigen::Matrix3d blk;
                    for (int rr = 0; rr < 3; ++rr)
                        for (int cc = 0; cc < 3; ++cc) blk(rr, cc) = r.normal();
                    if (i == j) blk = (blk + blk.transpose()).eval();
                    cov.set(i, j, blk);
                }
            }
        }
        return cov;
    };
    Rng bias_rng(1030);
    const BlockCovariance cov1 = random_blocks(bias_rng);
    const BlockCovariance cov2 = random_blocks(bias_rng);
    BlockCovariance combo(small.n_vertices());
    const double alpha = 0.7, beta = -1.3;
    for (Eigen::Index t = 0; t < small.n_tets(); ++t)
        for (int ia = 0; ia < 4; ++ia)
            for (int ib = 0; ib < 4; ++ib) {
                const int i = small.tets(t, ia), j = small.tets(t, ib);
                if (i <= j && !combo.has(i, j))
                    combo.set(i, j, alpha * cov1.get(i, j) + beta * cov2.get(i, j));
            }
    for (const BiasMode mode : {BiasMode::Ppe, BiasMode::Ste}) {
        const BiasResult one = bias_correction(small, small_ops, cov1, kBloodDensity, mode);
        const BiasResult two = bias_correction(small, small_ops, cov2, kBloodDensity, mode);
        const BiasResult both = bias_correction(small, small_ops, combo, kBloodDensity, mode);
        const Eigen::VectorXd gap =
            both.pressure.values - alpha * one.pressure.values - beta * two.pressure.values;
        const double scale = both.pressure.values.cwiseAbs().maxCoeff() + 1.0;
        if (gap.cwiseAbs().maxCoeff() > 1e-10 * scale)
            return failure("bias nonlinearity %.3g", gap.cwiseAbs().maxCoeff() / scale);
    }
    return "";
}

// ---------------------------------------------------------------------------
// 11. Windkessel outlets
// ---------------------------------------------------------------------------

std::string criterion_windkessel() {
    CalibrationInput input;
    input.q_in_ref = 1e-5;
    input.r_s_ref = 2e8;
    input.q_in = 8e-6;
    input.u_mean_ref = Eigen::VectorXd(4);
    input.u_mean_ref << 0.4, 0.2, 0.25, 0.15;
    input.areas = Eigen::VectorXd(4);
    input.areas << 2e-5, 1e-5, 1.5e-5, 0.5e-5;
    input.c_tot = 1e-8;

    const Eigen::VectorXd sigma = flow_split(input);
    if (std::abs(sigma.sum() - 1.0) > 1e-12)
        return failure("flow fractions sum to %.15g", sigma.sum());

    const double r_s = input.q_in_ref / input.q_in * input.r_s_ref;
    const auto outlets = calibrate_windkessel(input, ResistanceConvention::ParallelConsistent);
    double inverse_sum = 0.0;
    for (const auto& outlet : outlets) inverse_sum += 1.0 / (outlet.r_p + outlet.r_d);
    if (std::abs(inverse_sum - 1.0 / r_s) > 1e-12 / r_s)
        return failure("parallel identity off by %.3g (relative)",
                       std::abs(inverse_sum * r_s - 1.0));

    // Implicit integration reaches the algebraic steady state P = (Rp+Rd) Q.
    WindkesselParams params;
    params.r_p = 1e7;
    params.r_d = 9e7;
    params.c_d = 1e-8;
    const double q = 3e-5, dt = 0.02;
    const double tau = params.r_d * params.c_d;  // 0.9 s
    const int steps = static_cast<int>(std::ceil(20.0 * tau / dt));
    WindkesselStep step{};
    for (int k = 0; k < steps; ++k) {
        step = windkessel_step(params, q, dt, WindkesselScheme::Implicit);
        params.pi = step.pi_next;
    }
    const double target = (params.r_p + params.r_d) * q;
    const double rel = std::abs(step.pressure - target) / target;
    if (rel >= 1e-6) return failure("steady-state relative error %.3g >= 1e-6", rel);
    return "";
}

// ---------------------------------------------------------------------------
// 12. Wall shear biomarkers
// ---------------------------------------------------------------------------

std::string criterion_biomarkers() {
    // OSI stays within [0, 1/2] on 1000 random eight-sample traction series.
    Rng rng(1212);
    for (int series_idx = 0; series_idx < 1000; ++series_idx) {
        std::vector<std::vector<WallTraction>> series(8);
        for (auto& sample : series) {
            sample.resize(3);
            for (int f = 0; f < 3; ++f) {
                sample[static_cast<std::size_t>(f)].face = f;
                sample[static_cast<std::size_t>(f)].area = 0.5 + rng.uniform();
                sample[static_cast<std::size_t>(f)].normal = Eigen::Vector3d(0, 0, 1);
                sample[static_cast<std::size_t>(f)].tau =
                    rng.uniform(0.1, 5.0) * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
            }
        }
        const WssStatistics stats = twss_osi(series);
        for (Eigen::Index f = 0; f < stats.osi.size(); ++f) {
            if (stats.osi[f] < -1e-12 || stats.osi[f] > 0.5 + 1e-12)
                return failure("OSI %.6g escapes [0, 1/2]", stats.osi[f]);
        }
    }

    // A perfectly alternating series has zero mean traction: OSI = 1/2.
    std::vector<WallTraction> base(3);
    for (int f = 0; f < 3; ++f) {
        base[static_cast<std::size_t>(f)].face = f;
        base[static_cast<std::size_t>(f)].area = 1.0;
        base[static_cast<std::size_t>(f)].normal = Eigen::Vector3d(0, 0, 1);
        base[static_cast<std::size_t>(f)].tau = Eigen::Vector3d(1.5 + f, -0.5 * f, 0.25);
    }
    std::vector<std::vector<WallTraction>> alternating(8, base);
    for (int k = 1; k < 8; k += 2)
        for (auto& t : alternating[static_cast<std::size_t>(k)]) t.tau = -t.tau;
    const WssStatistics alt = twss_osi(alternating);
    for (Eigen::Index f = 0; f < alt.osi.size(); ++f) {
        if (std::abs(alt.osi[f] - 0.5) > 1e-12)
            return failure("alternating OSI %.6g != 1/2", alt.osi[f]);
    }

    // Plane shear u = gamma z e1: on the top wall (outward normal e3) the
    // traction is exactly mu gamma e1.
    const TetMesh mesh = make_box_mesh(3, 3, 3);
    const double gamma = 250.0, mu = kBloodViscosity;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(3 * mesh.n_vertices());
    for (Eigen::Index v = 0; v < mesh.n_vertices(); ++v) u[3 * v] = gamma * mesh.vertices(v, 2);
    const auto tractions = wall_shear_stress(mesh, u, mu);
    int top_faces = 0;
    for (const auto& t : tractions) {
        if (t.normal.z() < 0.99) continue;
        ++top_faces;
        const Eigen::Vector3d want(mu * gamma, 0.0, 0.0);
        if ((t.tau - want).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, mu * gamma))
            return failure("shear traction off by %.3g", (t.tau - want).cwiseAbs().maxCoeff());
    }
    if (top_faces != 18) return failure("expected 18 top-wall faces, saw %.0f", double(top_faces));
    return "";
}

// ---------------------------------------------------------------------------
// 13. Command-line determinism
// ---------------------------------------------------------------------------

std::string criterion_determinism() {
    const fs::path scratch = "acceptance_scratch";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    // register: two identical seeded runs must agree byte for byte.
    save_surface_mesh((scratch / "src.mesh").string(), testing::icosphere(0));
    save_surface_mesh((scratch / "trg.mesh").string(),
                      testing::scaled_copy(testing::icosphere(0), {1.15, 0.9, 1.0}));
    {
        std::ofstream cfg(scratch / "register.toml");
        cfg << "[output]\ndir = \"acceptance_scratch/reg_out\"\n"
            << "[register]\nsources = [\"acceptance_scratch/src.mesh\"]\n"
            << "target = \"acceptance_scratch/trg.mesh\"\n"
            << "[rff]\nn_rff = 2\n[net]\nhidden = [8]\n[flow]\nn_steps = 4\n"
            << "[schedule]\ntotal_epochs = 30\n[adam]\nlr = 0.005\n";
    }
    const std::string reg_args =
        "register --config acceptance_scratch/register.toml --seed 3 --threads 1";
    if (run_cli(reg_args) != 0) return "first register run failed";
    const auto reg_first = read_directory_bytes(scratch / "reg_out");
    fs::remove_all(scratch / "reg_out");
    if (run_cli(reg_args) != 0) return "second register run failed";
    const auto reg_second = read_directory_bytes(scratch / "reg_out");
    if (reg_first != reg_second) return "register outputs differ between identical runs";

    // pbdw: seeded synthetic noise takes the same draw both times.
    const TetMesh mesh = make_box_mesh(3, 3, 3);
    save_tet_mesh((scratch / "mesh.json").string(), mesh);
    const Eigen::Index d_u = 3 * mesh.n_vertices();
    Eigen::MatrixXd raw(d_u, 2);
    for (Eigen::Index v = 0; v < mesh.n_vertices(); ++v) {
        const Eigen::Vector3d x = mesh.vertices.row(v).transpose();
        raw.block<3, 1>(3 * v, 0) = Eigen::Vector3d(x[1], -x[0], 1.0);
        raw.block<3, 1>(3 * v, 1) = Eigen::Vector3d(std::sin(x[0]), x[2], x[0] * x[1]);
    }
    const Eigen::MatrixXd phi = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
                                Eigen::MatrixXd::Identity(d_u, 2);
    write_fmat((scratch / "phi.fmat").string(), phi);
    write_fmat((scratch / "truth.fmat").string(),
               Eigen::MatrixXd(phi * Eigen::Vector2d(0.9, -0.4)));
    {
        std::ofstream cfg(scratch / "pbdw.toml");
        cfg << "[pbdw]\nmesh = \"acceptance_scratch/mesh.json\"\n"
            << "basis = \"acceptance_scratch/phi.fmat\"\n"
            << "truth = \"acceptance_scratch/truth.fmat\"\n"
            << "voxel_edge = 0.34\nnoise_sigma = 0.05\nwith_covariance = true\n"
            << "[noise]\npreset = \"calm\"\n"
            << "[output]\ndir = \"acceptance_scratch/pbdw_out\"\n";
    }
    const std::string pbdw_args =
        "pbdw --config acceptance_scratch/pbdw.toml --seed 5 --threads 1";
    if (run_cli(pbdw_args) != 0) return "first pbdw run failed";
    const auto pbdw_first = read_directory_bytes(scratch / "pbdw_out");
    fs::remove_all(scratch / "pbdw_out");
    if (run_cli(pbdw_args) != 0) return "second pbdw run failed";
    const auto pbdw_second = read_directory_bytes(scratch / "pbdw_out");
    if (pbdw_first != pbdw_second) return "pbdw outputs differ between identical runs";

    fs::remove_all(scratch);
    return "";
}

struct Criterion {
    const char* label;
    std::function<std::string()> run;
    double budget_seconds;  // 0 = no stated budget
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"k-d tree chamfer equals brute force on 200 random pairs (rel 1e-12)", criterion_chamfer,
         5.0},
        {"objective gradient matches central differences (rel < 1e-5)", criterion_gradient, 30.0},
        {"sphere-to-ellipsoid multigrid run: chamfer/diam < 0.01, EMA monotone",
         criterion_benchmark, 600.0},
        {"contractive net inverts (round trip < 1e-6); sampled L <= certified L",
         criterion_bijectivity, 0.0},
        {"RBF transport: affine exact, round trip < 1e-3, ratio >= 3 per doubling",
         criterion_transport, 0.0},
        {"randomized SVD: values 1e-8, angle < 1e-6, nested errors monotone", criterion_rsvd, 0.0},
        {"subspace metrics exact; Mantel self-test r=1, p=1/1000", criterion_subspace, 0.0},
        {"PBDW: exact recovery, joint oracle, unbiased, covariance within SE", criterion_pbdw,
         120.0},
        {"noise covariance: symmetric, floored spectrum, hand case block-exact", criterion_noise,
         0.0},
        {"FEM: quadrature oracle, O(h) convergence, ROM size, bias linearity", criterion_fem,
         300.0},
        {"windkessel: steady state 1e-6, fractions sum to 1, parallel identity",
         criterion_windkessel, 0.0},
        {"biomarkers: OSI in [0,1/2], alternating 1/2, shear traction exact",
         criterion_biomarkers, 0.0},
        {"CLI register and pbdw reruns are byte-identical", criterion_determinism, 0.0},
    };

    bool all_pass = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        try {
            detail = criteria[i].run();
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (detail.empty() && criteria[i].budget_seconds > 0.0 &&
            secs > criteria[i].budget_seconds) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "exceeded %.0f s budget", criteria[i].budget_seconds);
            detail = buf;
        }
        const bool pass = detail.empty();
        all_pass = all_pass && pass;
        std::printf("[%2zu/13] %s %7.1f s  %s%s%s\n", i + 1, pass ? "PASS" : "FAIL", secs,
                    criteria[i].label, pass ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
