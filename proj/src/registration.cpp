/// @file registration.cpp
/// @brief Objective construction on the tape and multigrid ADAM training.
#include "morphassim/registration.hpp"

#include <algorithm>
#include <cmath>

#include "morphassim/errors.hpp"
#include "morphassim/spatial.hpp"

namespace morphassim {

namespace {

using ad::Tape;

/// Both Chamfer directions between a deformed-source subcloud (tape rows of
/// `deformed_vertices_node` selected by `ids_s`) and a constant target
/// subcloud, each normalized by its own cardinality.
Tape::Id tape_subcloud_chamfer(Tape& t, Tape::Id deformed_vertices_node,
                               const Eigen::MatrixX3d& deformed_values, const std::vector<int>& ids_s,
                               const Eigen::MatrixX3d& target_pts) {
    // source -> target direction with frozen nearest-target positions
    Eigen::MatrixX3d src_vals(static_cast<Eigen::Index>(ids_s.size()), 3);
    for (std::size_t i = 0; i < ids_s.size(); ++i) src_vals.row(static_cast<Eigen::Index>(i)) = deformed_values.row(ids_s[i]);
    const KdTree target_tree(target_pts);
    Eigen::MatrixX3d nn_t(src_vals.rows(), 3);
    for (Eigen::Index i = 0; i < src_vals.rows(); ++i)
        nn_t.row(i) = target_pts.row(target_tree.nearest(src_vals.row(i)).index);
    const Tape::Id src_node = t.gather_rows(deformed_vertices_node, ids_s);
    const Tape::Id d1 = t.rownorm_sum(t.sub(src_node, t.constant(nn_t)));

    // target -> source direction with frozen nearest-source indices
    const KdTree src_tree(src_vals);
    std::vector<int> nn_s(static_cast<std::size_t>(target_pts.rows()));
    for (Eigen::Index j = 0; j < target_pts.rows(); ++j)
        nn_s[static_cast<std::size_t>(j)] = ids_s[static_cast<std::size_t>(src_tree.nearest(target_pts.row(j)).index)];
    const Tape::Id src_for_t = t.gather_rows(deformed_vertices_node, nn_s);
    const Tape::Id d2 = t.rownorm_sum(t.sub(src_for_t, t.constant(target_pts)));

    return t.add(t.scale(d1, 1.0 / static_cast<double>(ids_s.size())),
                 t.scale(d2, 1.0 / static_cast<double>(target_pts.rows())));
}

}  // namespace

LossEval registration_loss(const FlowNet& net, const LabeledSurfaceMesh& source,
                           const LabeledSurfaceMesh& target, const LossWeights& w,
                           const FlowConfig& cfg, WarningLog* log) {
    net.validate();
    if (source.centerline.rows() != target.centerline.rows())
        throw SchemaError("registration_loss: centerline length mismatch (" +
                          std::to_string(source.centerline.rows()) + " vs " +
                          std::to_string(target.centerline.rows()) + ")");

    const Eigen::Index n_p = source.n_vertices();
    const Eigen::Index n_c = source.centerline.rows();

    LossEval ev;
    ev.tape = std::make_shared<Tape>();
    Tape& t = *ev.tape;
    ev.params = tape_parameters(t, net);

    // Flow the concatenated cloud [vertices; centerline].
    Eigen::MatrixX3d start(n_p + n_c, 3);
    start.topRows(n_p) = source.vertices;
    if (n_c > 0) start.bottomRows(n_c) = source.centerline;
    Tape::Id X = t.constant(start);

    std::vector<int> vertex_rows(static_cast<std::size_t>(n_p));
    for (Eigen::Index i = 0; i < n_p; ++i) vertex_rows[static_cast<std::size_t>(i)] = static_cast<int>(i);

    Tape::Id energy = -1;
    for (int step = 0; step < cfg.n_steps; ++step) {
        const Tape::Id emb = tape_rff_embed(t, X, net.rff);
        const Tape::Id f = tape_net_apply(t, ev.params, emb);
        if (w.lambda_en > 0.0) {
            const Tape::Id f_verts = (n_c > 0) ? t.gather_rows(f, vertex_rows) : f;
            const Tape::Id e_i = t.sqnorm(f_verts);
            energy = (energy < 0) ? e_i : t.add(energy, e_i);
        }
        X = t.add(X, t.scale(f, cfg.dt()));
        if (!t.value(X).allFinite())
            throw NumericalError("registration_loss: non-finite flow value at step " +
                                 std::to_string(step + 1));
    }

    const Tape::Id PV = (n_c > 0) ? t.gather_rows(X, vertex_rows) : X;
    const Eigen::MatrixX3d deformed = t.value(PV);
    ev.deformed_vertices = deformed;

    // --- data term: region-wise Chamfer of the deformed source against T ---
    LabeledSurfaceMesh def_mesh = source;
    def_mesh.vertices = deformed;

    const std::vector<int> wall_s = region_vertex_ids(source, RegionSelector::single(RegionId::Wall));
    const std::vector<int> wall_t = region_vertex_ids(target, RegionSelector::single(RegionId::Wall));
    if (wall_s.empty() || wall_t.empty()) throw SchemaError("registration_loss: empty WALL region");

    const Eigen::MatrixX3d wall_t_pts = region_points(target, RegionSelector::single(RegionId::Wall));
    Tape::Id loss = tape_subcloud_chamfer(t, PV, deformed, wall_s, wall_t_pts);

    if (w.lambda_n > 0.0) {
        // Normal alignment (pairings and normals frozen; see tape.hpp).
        const Eigen::MatrixX3d ns = vertex_normals(def_mesh);
        const Eigen::MatrixX3d nt = vertex_normals(target);
        Eigen::MatrixX3d ws_pts(static_cast<Eigen::Index>(wall_s.size()), 3);
        for (std::size_t i = 0; i < wall_s.size(); ++i) ws_pts.row(static_cast<Eigen::Index>(i)) = deformed.row(wall_s[i]);
        const KdTree tree_t(wall_t_pts), tree_s(ws_pts);

        Eigen::MatrixX3d ns_sel(ws_pts.rows(), 3), nt_match(ws_pts.rows(), 3);
        for (Eigen::Index i = 0; i < ws_pts.rows(); ++i) {
            ns_sel.row(i) = ns.row(wall_s[static_cast<std::size_t>(i)]);
            nt_match.row(i) = nt.row(wall_t[static_cast<std::size_t>(tree_t.nearest(ws_pts.row(i)).index)]);
        }
        Eigen::MatrixX3d nt_sel(wall_t_pts.rows(), 3), ns_match(wall_t_pts.rows(), 3);
        for (Eigen::Index j = 0; j < wall_t_pts.rows(); ++j) {
            nt_sel.row(j) = nt.row(wall_t[static_cast<std::size_t>(j)]);
            ns_match.row(j) = ns.row(wall_s[static_cast<std::size_t>(tree_s.nearest(wall_t_pts.row(j)).index)]);
        }
        const Tape::Id dots_s = t.abs(t.row_dot(t.constant(ns_sel), t.constant(nt_match)));
        const Tape::Id dots_t = t.abs(t.row_dot(t.constant(nt_sel), t.constant(ns_match)));
        const Tape::Id term_s =
            t.sub(t.constant(ad::Mat::Constant(1, 1, static_cast<double>(wall_s.size()))), t.sum(dots_s));
        const Tape::Id term_t =
            t.sub(t.constant(ad::Mat::Constant(1, 1, static_cast<double>(wall_t.size()))), t.sum(dots_t));
        loss = t.add(loss, t.scale(t.add(t.scale(term_s, 1.0 / static_cast<double>(n_p)),
                                         t.scale(term_t, 1.0 / static_cast<double>(target.n_vertices()))),
                                   w.lambda_n));
    }

    for (RegionId cap : {RegionId::Inlet, RegionId::Outlet1, RegionId::Outlet2, RegionId::Outlet3,
                         RegionId::Outlet4}) {
        for (const RegionSelector& sel :
             {RegionSelector::single(cap), RegionSelector::ring(cap, RegionId::Wall)}) {
            const std::vector<int> ids_s = region_vertex_ids(source, sel);
            const Eigen::MatrixX3d pts_t = region_points(target, sel);
            if (ids_s.empty() || pts_t.rows() == 0) {
                if (!ids_s.empty() || pts_t.rows() != 0)
                    warn(log, "registration_loss",
                         region_name(cap) + (sel.also ? "∩wall" : "") +
                             " present on one mesh only; sub-term contributes 0");
                continue;
            }
            loss = t.add(loss, tape_subcloud_chamfer(t, PV, deformed, ids_s, pts_t));
        }
    }

    // --- centerline correspondence ---
    if (n_c > 0 && w.lambda_C > 0.0) {
        std::vector<int> cl_rows(static_cast<std::size_t>(n_c));
        for (Eigen::Index i = 0; i < n_c; ++i) cl_rows[static_cast<std::size_t>(i)] = static_cast<int>(n_p + i);
        const Tape::Id PC = t.gather_rows(X, cl_rows);
        loss = t.add(loss, t.scale(t.sqnorm(t.sub(PC, t.constant(Eigen::MatrixXd(target.centerline)))),
                                   w.lambda_C));
    }

    // --- edge-stretch regularizer on deformed positions (per face, 3 edges) ---
    if (w.lambda_edges > 0.0 && source.n_faces() > 0) {
        std::vector<int> ea, eb;
        ea.reserve(static_cast<std::size_t>(3 * source.n_faces()));
        eb.reserve(static_cast<std::size_t>(3 * source.n_faces()));
        for (Eigen::Index f = 0; f < source.n_faces(); ++f)
            for (int k = 0; k < 3; ++k) {
                ea.push_back(source.faces(f, k));
                eb.push_back(source.faces(f, (k + 1) % 3));
            }
        const Tape::Id diff = t.sub(t.gather_rows(PV, ea), t.gather_rows(PV, eb));
        loss = t.add(loss, t.scale(t.sqnorm(diff), w.lambda_edges));
    }

    // --- kinetic-energy regularizer ---
    if (w.lambda_en > 0.0 && energy >= 0) loss = t.add(loss, t.scale(energy, w.lambda_en));

    ev.loss_id = loss;
    ev.value = t.scalar_value(loss);
    return ev;
}

RegistrationResult train_multigrid(const std::vector<LabeledSurfaceMesh>& source_levels,
                                   const LabeledSurfaceMesh& target, const TrainConfig& cfg,
                                   std::uint64_t seed, WarningLog* log) {
    if (source_levels.empty()) throw SchemaError("train_multigrid: no source levels");
    if (source_levels.size() != cfg.schedule.switch_epochs.size() + 1)
        throw SchemaError("train_multigrid: level count must equal switch count + 1");
    for (std::size_t i = 0; i < cfg.schedule.switch_epochs.size(); ++i) {
        const int e = cfg.schedule.switch_epochs[i];
        if (e <= 0 || e >= cfg.schedule.total_epochs ||
            (i > 0 && e <= cfg.schedule.switch_epochs[i - 1]))
            throw SchemaError("train_multigrid: switch epochs must be strictly increasing and < total");
    }

    RegistrationResult res;
    res.net = FlowNet::make(cfg.rff, cfg.hidden, seed);

    // ADAM state, one slot per parameter tensor (weights then bias per layer).
    std::vector<Eigen::MatrixXd> m, v;
    for (std::size_t l = 0; l < res.net.weights.size(); ++l) {
        m.push_back(Eigen::MatrixXd::Zero(res.net.weights[l].rows(), res.net.weights[l].cols()));
        v.push_back(Eigen::MatrixXd::Zero(res.net.weights[l].rows(), res.net.weights[l].cols()));
        m.push_back(Eigen::MatrixXd::Zero(res.net.biases[l].size(), 1));
        v.push_back(Eigen::MatrixXd::Zero(res.net.biases[l].size(), 1));
    }

    std::size_t level = 0;
    int adam_t = 0;
    res.loss_trace.reserve(static_cast<std::size_t>(cfg.schedule.total_epochs));
    for (int epoch = 0; epoch < cfg.schedule.total_epochs; ++epoch) {
        // Refinement switch: swap the point cloud, keep θ and the moments.
        for (std::size_t s = 0; s < cfg.schedule.switch_epochs.size(); ++s)
            if (epoch == cfg.schedule.switch_epochs[s]) level = s + 1;

        LossEval ev = registration_loss(res.net, source_levels[level], target, cfg.weights,
                                        cfg.flow, log);
        if (!std::isfinite(ev.value))
            throw NumericalError("train_multigrid: divergent loss at epoch " + std::to_string(epoch) +
                                 " (" + std::to_string(res.loss_trace.size()) + " epochs recorded)");
        res.loss_trace.push_back(ev.value);
        ev.tape->backward(ev.loss_id);

        ++adam_t;
        const double bc1 = 1.0 - std::pow(cfg.adam.beta1, adam_t);
        const double bc2 = 1.0 - std::pow(cfg.adam.beta2, adam_t);
        for (std::size_t l = 0; l < res.net.weights.size(); ++l) {
            const Eigen::MatrixXd gw = ev.tape->grad(ev.params.w[l]);
            const Eigen::MatrixXd gb = ev.tape->grad(ev.params.b[l]);
            auto update = [&](Eigen::MatrixXd& theta, const Eigen::MatrixXd& g, std::size_t slot) {
                m[slot] = cfg.adam.beta1 * m[slot] + (1.0 - cfg.adam.beta1) * g;
                v[slot] = cfg.adam.beta2 * v[slot].array().matrix() +
                          (1.0 - cfg.adam.beta2) * g.cwiseProduct(g);
                theta.array() -= cfg.adam.lr * (m[slot].array() / bc1) /
                                 ((v[slot].array() / bc2).sqrt() + cfg.adam.eps);
            };
            update(res.net.weights[l], gw, 2 * l);
            Eigen::MatrixXd bmat = res.net.biases[l];
            update(bmat, gb, 2 * l + 1);
            res.net.biases[l] = bmat.col(0);
        }
    }

    // Final image of the finest level + quality numbers.
    const LabeledSurfaceMesh& finest = source_levels.back();
    res.mapped_source = flow_forward(res.net, finest.vertices, cfg.flow).back();
    res.normalized_chamfer =
        chamfer(res.mapped_source, target.vertices) / mesh_diameter(target.vertices);
    res.certificate = lipschitz_bound(res.net, cfg.flow);
    return res;
}

Eigen::MatrixX3d invert_flow(const FlowNet& net, const Eigen::MatrixX3d& Y, const FlowConfig& cfg,
                             double tol, int max_iter, WarningLog* log) {
    net.validate();
    const LipschitzCertificate cert = lipschitz_bound(net, cfg);
    if (!cert.certified_bijective) {
        if (cert.empirically_bijective)
            warn(log, "invert_flow", "contraction certified only empirically (dt·L̃ < 1 ≤ dt·L̂)");
        else
            warn(log, "invert_flow", "no contraction certificate (dt·L̃ ≥ 1); inversion may fail");
    }

    Eigen::MatrixX3d x = Y;
    for (int step = cfg.n_steps - 1; step >= 0; --step) {
        const Eigen::MatrixX3d y = x;  // value after this Euler step
        Eigen::MatrixX3d cur = y;      // fixed-point iterate, started at y
        double prev_delta = -1.0;
        bool converged = false;
        double contraction = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            Eigen::MatrixX3d next = y - cfg.dt() * net.velocity(cur);
            const double delta = (next - cur).rowwise().norm().maxCoeff();
            cur = std::move(next);
            if (prev_delta > 0.0 && delta > 0.0) contraction = delta / prev_delta;
            prev_delta = delta;
            if (delta < tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw NumericalError("invert_flow: no convergence in " + std::to_string(max_iter) +
                                 " iterations at step " + std::to_string(step) +
                                 " (contraction estimate " + std::to_string(contraction) + ")");
        x = cur;
    }
    return x;
}

}  // namespace morphassim
