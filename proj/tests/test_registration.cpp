/// @file test_registration.cpp
/// @brief Fourier features, Euler flow, full objective, multigrid training,
///        Lipschitz certification and flow inversion.
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "morphassim/errors.hpp"
#include "morphassim/registration.hpp"
#include "morphassim/rng.hpp"
#include "test_helpers.hpp"

using namespace morphassim;
namespace fs = std::filesystem;

TEST_CASE("rff_embed: dimension, zero point, pi point") {
    RffConfig cfg;  // n_rff = 8
    CHECK(cfg.embed_dim() == 51);

    const Eigen::VectorXd e0 = rff_embed(Eigen::Vector3d::Zero(), cfg);
    REQUIRE(e0.size() == 51);
    CHECK(e0.head(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK((e0.segment(3, 24).array() == 1.0).all());   // cos blocks
    CHECK((e0.segment(27, 24).array() == 0.0).all());  // sin blocks

    const Eigen::VectorXd ep = rff_embed(Eigen::Vector3d(M_PI, 0, 0), cfg);
    // cos(2^i π) for coordinate 1: (−1, 1, 1, 1, 1, 1, 1, 1)
    CHECK(ep(3) == doctest::Approx(-1.0).epsilon(1e-15));
    for (int i = 1; i < 8; ++i)
        CHECK(ep(3 + 3 * i) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rff_embed_rows matches the per-point embedding") {
    RffConfig cfg;
    cfg.n_rff = 5;
    Rng rng(31);
    const Eigen::MatrixX3d X = testing::random_cloud(rng, 12, 2.0);
    const Eigen::MatrixXd E = rff_embed_rows(X, cfg);
    REQUIRE(E.cols() == cfg.embed_dim());
    for (int i = 0; i < 12; ++i)
        CHECK((E.row(i).transpose() - rff_embed(X.row(i), cfg)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flow_forward: zero net is the identity; trajectory has N+1 clouds") {
    RffConfig rff;
    rff.n_rff = 2;
    FlowNet net = FlowNet::make(rff, {6}, 1);
    for (auto& w : net.weights) w.setZero();
    Rng rng(5);
    const Eigen::MatrixX3d X = testing::random_cloud(rng, 9, 1.0);
    FlowConfig cfg;
    const auto traj = flow_forward(net, X, cfg);
    REQUIRE(traj.size() == 11);
    CHECK(traj.front() == X);
    CHECK(traj.back() == X);
}

TEST_CASE("flow_forward: constant-velocity net translates by c") {
    RffConfig rff;
    rff.n_rff = 3;
    FlowNet net = FlowNet::make(rff, {}, 1);  // single linear layer
    net.weights[0].setZero();
    const Eigen::Vector3d c(0.4, -0.7, 0.25);
    net.biases[0] = c;
    Rng rng(6);
    const Eigen::MatrixX3d X = testing::random_cloud(rng, 7, 1.0);
    const auto traj = flow_forward(net, X, FlowConfig{});
    const Eigen::MatrixX3d expect = X.rowwise() + c.transpose();
    CHECK((traj.back() - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("flow_forward: non-finite velocity reports the failing step") {
    RffConfig rff;
    rff.n_rff = 2;
    FlowNet net = FlowNet::make(rff, {4}, 1);
    net.weights[0](0, 0) = 1e308;
    net.weights[1](0, 0) = 1e308;
    Rng rng(7);
    const Eigen::MatrixX3d X = testing::random_cloud(rng, 4, 1.0);
    CHECK_THROWS_AS(flow_forward(net, X, FlowConfig{}), NumericalError);
    try {
        flow_forward(net, X, FlowConfig{});
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("tape network evaluation agrees with the plain forward pass") {
    RffConfig rff;
    rff.n_rff = 4;
    const FlowNet net = FlowNet::make(rff, {10, 7}, 99);
    Rng rng(8);
    const Eigen::MatrixX3d X = testing::random_cloud(rng, 15, 2.0);

    ad::Tape tape;
    const TapeNet params = tape_parameters(tape, net);
    const auto xid = tape.constant(X);
    const auto vid = tape_net_apply(tape, params, tape_rff_embed(tape, xid, rff));
    const Eigen::MatrixX3d direct = net.velocity(X);
    CHECK((tape.value(vid) - direct).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("registration_loss: zero net on identical meshes leaves only the edge term") {
    const LabeledSurfaceMesh square = testing::flat_square();
    RffConfig rff;
    rff.n_rff = 2;
    FlowNet net = FlowNet::make(rff, {4}, 3);
    for (auto& w : net.weights) w.setZero();

    // Squared edge lengths of the unit square split into two triangles:
    // each face contributes 1 + 1 + 2 = 4.
    LossWeights w;
    w.lambda_edges = 0.7;
    w.lambda_C = 0.9;
    w.lambda_en = 1.3;
    WarningLog log;
    const LossEval eval = registration_loss(net, square, square, w, FlowConfig{}, &log);
    CHECK(eval.value == doctest::Approx(0.7 * 8.0).epsilon(1e-12));

    LossWeights zero;
    zero.lambda_n = zero.lambda_C = zero.lambda_edges = zero.lambda_en = 0.0;
    const LossEval ev0 = registration_loss(net, square, square, zero, FlowConfig{}, &log);
    CHECK(ev0.value == 0.0);
}

TEST_CASE("registration_loss: kinetic-energy term has the closed form N·n_p·‖c‖²") {
    const LabeledSurfaceMesh square = testing::flat_square();
    RffConfig rff;
    rff.n_rff = 2;
    FlowNet net = FlowNet::make(rff, {}, 3);
    net.weights[0].setZero();
    const Eigen::Vector3d c(0.1, -0.2, 0.05);
    net.biases[0] = c;

    LossWeights with_en, without_en;
    with_en.lambda_n = without_en.lambda_n = 0.0;
    with_en.lambda_C = without_en.lambda_C = 0.0;
    with_en.lambda_edges = without_en.lambda_edges = 0.0;
    with_en.lambda_en = 1.0;
    without_en.lambda_en = 0.0;
    WarningLog log;
    const double le = registration_loss(net, square, square, with_en, FlowConfig{}, &log).value;
    const double l0 = registration_loss(net, square, square, without_en, FlowConfig{}, &log).value;
    CHECK(le - l0 == doctest::Approx(10.0 * 4.0 * c.squaredNorm()).epsilon(1e-10));
}

TEST_CASE("registration_loss: centerline length mismatch is rejected") {
    LabeledSurfaceMesh src = testing::flat_square();
    LabeledSurfaceMesh dst = testing::flat_square();
    src.centerline.resize(2, 3);
    src.centerline << 0.2, 0.2, 0, 0.8, 0.8, 0;
    dst.centerline.resize(1, 3);
    dst.centerline << 0.5, 0.5, 0;
    RffConfig rff;
    rff.n_rff = 2;
    const FlowNet net = FlowNet::make(rff, {4}, 3);
    WarningLog log;
    CHECK_THROWS_AS(
        registration_loss(net, src, dst, LossWeights{}, FlowConfig{}, &log),
        SchemaError);
}

TEST_CASE("registration_loss: backward gradient matches central differences") {
    LabeledSurfaceMesh src = testing::flat_square();
    src.centerline.resize(2, 3);
    src.centerline << 0.2, 0.2, 0, 0.5, 0.5, 0;
    LabeledSurfaceMesh dst = testing::scaled_copy(src, Eigen::Vector3d(1.2, 0.8, 1.0));
    dst.centerline.resize(2, 3);
    dst.centerline << 0.3, 0.1, 0, 0.6, 0.4, 0.1;

    RffConfig rff;
    rff.n_rff = 2;
    const FlowNet net = FlowNet::make(rff, {8}, 12);
    LossWeights w;
    w.lambda_n = 0.3;  // exaggerated so the (frozen) normal term participates
    w.lambda_C = 0.5;
    WarningLog log;
    LossEval eval = registration_loss(net, src, dst, w, FlowConfig{}, &log);
    eval.tape->backward(eval.loss_id);

    std::vector<Eigen::MatrixXd> gw, gb;
    for (std::size_t l = 0; l < eval.params.w.size(); ++l) {
        gw.push_back(eval.tape->grad(eval.params.w[l]));
        gb.push_back(eval.tape->grad(eval.params.b[l]));
    }

    const double h = 1e-6;
    double worst = 0.0;
    auto fd_check = [&](ad::Tape::Id id, const Eigen::MatrixXd& analytic) {
        const Eigen::MatrixXd base = eval.tape->value(id);
        for (Eigen::Index i = 0; i < base.rows(); ++i)
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
        eval.tape->set_parameter(id, base);
        eval.tape->revalue();
    };
    for (std::size_t l = 0; l < eval.params.w.size(); ++l) {
        fd_check(eval.params.w[l], gw[l]);
        fd_check(eval.params.b[l], gb[l]);
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("registration_loss: invariant under 2π-lattice translation with "
          "first-layer bias compensation") {
    LabeledSurfaceMesh src = testing::flat_square();
    LabeledSurfaceMesh dst = testing::scaled_copy(src, Eigen::Vector3d(1.1, 0.9, 1.0));
    RffConfig rff;
    rff.n_rff = 2;
    FlowNet net = FlowNet::make(rff, {8}, 21);
    WarningLog log;
    const double base = registration_loss(net, src, dst, LossWeights{}, FlowConfig{}, &log).value;

    // t on the 2π lattice leaves every cos/sin feature unchanged; only the raw
    // coordinate block of ψ shifts, which the first-layer bias absorbs.
    const Eigen::Vector3d t(2.0 * M_PI, -4.0 * M_PI, 6.0 * M_PI);
    LabeledSurfaceMesh src_t = src, dst_t = dst;
    src_t.vertices.rowwise() += t.transpose();
    dst_t.vertices.rowwise() += t.transpose();
    FlowNet net_t = net;
    net_t.biases[0] -= net.weights[0].leftCols<3>() * t;
    const double moved =
        registration_loss(net_t, src_t, dst_t, LossWeights{}, FlowConfig{}, &log).value;
    CHECK(moved == doctest::Approx(base).epsilon(1e-8));
}

TEST_CASE("train_multigrid: zero epochs yields an empty trace") {
    const LabeledSurfaceMesh square = testing::flat_square();
    TrainConfig cfg;
    cfg.rff.n_rff = 2;
    cfg.hidden = {4};
    cfg.schedule.total_epochs = 0;
    cfg.schedule.switch_epochs = {};
    WarningLog log;
    const RegistrationResult res = train_multigrid({square}, square, cfg, 7, &log);
    CHECK(res.loss_trace.empty());
    CHECK(res.mapped_source.rows() == square.vertices.rows());
    CHECK(res.mapped_source.allFinite());
}

TEST_CASE("train_multigrid: level count must equal switch count + 1") {
    const LabeledSurfaceMesh square = testing::flat_square();
    TrainConfig cfg;
    cfg.rff.n_rff = 2;
    cfg.hidden = {4};
    cfg.schedule.total_epochs = 10;
    cfg.schedule.switch_epochs = {5};  // expects 2 levels
    WarningLog log;
    CHECK_THROWS_AS(train_multigrid({square}, square, cfg, 7, &log), SchemaError);
}

TEST_CASE("train_multigrid: identical seeds give bitwise-identical traces") {
    const LabeledSurfaceMesh coarse = testing::flat_square();
    const LabeledSurfaceMesh fine = subdivide_midpoint(coarse, 1);
    const LabeledSurfaceMesh target =
        testing::scaled_copy(coarse, Eigen::Vector3d(1.15, 0.9, 1.0));
    TrainConfig cfg;
    cfg.rff.n_rff = 2;
    cfg.hidden = {8};
    cfg.schedule.total_epochs = 24;
    cfg.schedule.switch_epochs = {12};
    WarningLog log;
    const RegistrationResult a = train_multigrid({coarse, fine}, target, cfg, 1234, &log);
    const RegistrationResult b = train_multigrid({coarse, fine}, target, cfg, 1234, &log);
    REQUIRE(a.loss_trace.size() == 24);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.mapped_source == b.mapped_source);
}

TEST_CASE("train_multigrid: short run reduces the loss on a translated square") {
    const LabeledSurfaceMesh src = testing::flat_square();
    LabeledSurfaceMesh dst = src;
    dst.vertices.rowwise() += Eigen::RowVector3d(0.3, -0.2, 0.1);
    TrainConfig cfg;
    cfg.rff.n_rff = 2;
    cfg.hidden = {16};
    cfg.schedule.total_epochs = 150;
    cfg.schedule.switch_epochs = {};
    WarningLog log;
    const RegistrationResult res = train_multigrid({src}, dst, cfg, 42, &log);
    REQUIRE(res.loss_trace.size() == 150);
    CHECK(res.loss_trace.back() < res.loss_trace.front());
}

TEST_CASE("lipschitz_bound: zero net certifies at zero") {
    RffConfig rff;
    rff.n_rff = 3;
    FlowNet net = FlowNet::make(rff, {5}, 1);
    for (auto& w : net.weights) w.setZero();
    const LipschitzCertificate cert = lipschitz_bound(net, FlowConfig{});
    CHECK(cert.certified == 0.0);
    CHECK(cert.empirical == 0.0);
    CHECK(cert.certified_bijective);
    CHECK(cert.empirically_bijective);
}

TEST_CASE("lipschitz_bound: coordinate-selector layer has L̂ = L̃ = α") {
    RffConfig rff;
    rff.n_rff = 4;
    FlowNet net = FlowNet::make(rff, {}, 1);
    net.weights[0].setZero();
    net.biases[0].setZero();
    const double alpha = 0.35;
    net.weights[0].leftCols<3>() = alpha * Eigen::Matrix3d::Identity();
    const LipschitzCertificate cert = lipschitz_bound(net, FlowConfig{});
    CHECK(cert.certified == doctest::Approx(alpha).epsilon(1e-12));
    CHECK(cert.empirical == doctest::Approx(alpha).epsilon(1e-9));
    CHECK(cert.certified_bijective);  // dt·α = 0.035 < 1
}

TEST_CASE("lipschitz_bound: sampled estimate never exceeds the certificate") {
    Rng seeds(2468);
    for (int rep = 0; rep < 50; ++rep) {
        RffConfig rff;
        rff.n_rff = 1 + static_cast<int>(seeds.index(4));
        const std::vector<int> hidden(1 + seeds.index(2), 4 + static_cast<int>(seeds.index(6)));
        FlowNet net = FlowNet::make(rff, hidden, seeds.next_u64());
        const LipschitzCertificate cert = lipschitz_bound(net, FlowConfig{}, seeds.next_u64());
        CHECK(cert.empirical <= cert.certified * (1.0 + 1e-12));
    }
}

TEST_CASE("invert_flow: zero net inverts to the identity") {
    RffConfig rff;
    rff.n_rff = 2;
    FlowNet net = FlowNet::make(rff, {4}, 1);
    for (auto& w : net.weights) w.setZero();
    Rng rng(11);
    const Eigen::MatrixX3d Y = testing::random_cloud(rng, 8, 1.0);
    WarningLog log;
    const Eigen::MatrixX3d X = invert_flow(net, Y, FlowConfig{}, 1e-10, 100, &log);
    CHECK((X - Y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("invert_flow: contractive net round-trips to 1e-6") {
    RffConfig rff;
    rff.n_rff = 3;
    FlowNet net = FlowNet::make(rff, {32}, 77);
    const LipschitzCertificate raw = lipschitz_bound(net, FlowConfig{});
    REQUIRE(raw.certified > 0.0);
    net.weights.back() *= 3.0 / raw.certified;  // rescale so dt·L̂ = 0.3
    const LipschitzCertificate cert = lipschitz_bound(net, FlowConfig{});
    CHECK(cert.certified == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(cert.certified_bijective);

    Rng rng(12);
    const Eigen::MatrixX3d Y = testing::random_cloud(rng, 20, 1.0);
    WarningLog log;
    const Eigen::MatrixX3d X = invert_flow(net, Y, FlowConfig{}, 1e-8, 200, &log);
    const Eigen::MatrixX3d round = flow_forward(net, X, FlowConfig{}).back();
    CHECK((round - Y).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("invert_flow: expansive net fails with a contraction report") {
    RffConfig rff;
    rff.n_rff = 2;
    FlowNet net = FlowNet::make(rff, {}, 1);
    net.weights[0].setZero();
    net.biases[0].setZero();
    net.weights[0].leftCols<3>() = 20.0 * Eigen::Matrix3d::Identity();  // dt·L = 2
    Eigen::MatrixX3d Y(1, 3);
    Y << 1.0, 1.0, 1.0;
    WarningLog log;
    CHECK_THROWS_AS(invert_flow(net, Y, FlowConfig{}, 1e-10, 50, &log), NumericalError);
}

TEST_CASE("model file round-trips bitwise") {
    RffConfig rff;
    rff.n_rff = 3;
    const FlowNet net = FlowNet::make(rff, {4, 5}, 2025);
    FlowConfig flow;
    flow.n_steps = 7;
    const fs::path path = fs::temp_directory_path() / "morphassim_model_test.bin";
    save_flownet(path.string(), net, flow);
    const auto [loaded, lflow] = load_flownet(path.string());
    CHECK(lflow.n_steps == 7);
    CHECK(loaded.rff.n_rff == 3);
    REQUIRE(loaded.weights.size() == net.weights.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        CHECK(loaded.weights[l] == net.weights[l]);
        CHECK(loaded.biases[l] == net.biases[l]);
    }
    fs::remove(path);
}

TEST_CASE("model file errors: missing and truncated") {
    CHECK_THROWS_AS(load_flownet("/nonexistent/model.bin"), IoError);
    const fs::path path = fs::temp_directory_path() / "morphassim_model_trunc.bin";
    {
        RffConfig rff;
        rff.n_rff = 2;
        save_flownet(path.string(), FlowNet::make(rff, {4}, 1), FlowConfig{});
    }
    fs::resize_file(path, 10);
    CHECK_THROWS_AS(load_flownet(path.string()), IoError);
    fs::remove(path);
}
