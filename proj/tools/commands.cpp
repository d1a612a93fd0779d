#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "morphassim/assimilation.hpp"
#include "morphassim/biomarkers.hpp"
#include "morphassim/errors.hpp"
#include "morphassim/fem.hpp"
#include "morphassim/fmat_io.hpp"
#include "morphassim/mesh.hpp"
#include "morphassim/rbf_transport.hpp"
#include "morphassim/reduced.hpp"
#include "morphassim/registration.hpp"
#include "morphassim/rng.hpp"
#include "morphassim/shape_stats.hpp"
#include "morphassim/tetmesh.hpp"
#include "morphassim/windkessel.hpp"

namespace morphassim::cli {

namespace {

std::string num(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

/// Resolves and creates the run's output directory.
std::string output_dir(const RunConfig& config) {
    const std::string dir = config.get_string("output.dir");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("failed while writing " + path);
}

/// Reads an FMAT1 file holding a vector (n x 1 or 1 x n).
Eigen::VectorXd read_fmat_vector(const std::string& path) {
    const Eigen::MatrixXd m = read_fmat(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw SchemaError(path + ": expected a vector, found " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
}

FemField read_velocity_field(const std::string& path, Eigen::Index d_u) {
    FemField f;
    f.values = read_fmat_vector(path);
    if (f.values.size() != d_u) {
        throw SchemaError(path + ": expected " + std::to_string(d_u) + " velocity entries, found " +
                          std::to_string(f.values.size()));
    }
    return f;
}

void print_warnings(const WarningLog& log) {
    for (const auto& w : log) std::cerr << "warning: " << w.message << "\n";
}

std::uint64_t run_seed(const RunConfig& config) {
    return static_cast<std::uint64_t>(config.get_int_or("run.seed", 0));
}

}  // namespace

// ---------------------------------------------------------------------------
// register
// ---------------------------------------------------------------------------

std::vector<std::string> run_register(const RunConfig& config) {
    const std::string dir = output_dir(config);

    const std::vector<std::string> source_paths = config.get_string_array("register.sources");
    if (source_paths.empty()) {
        throw SchemaError("config key register.sources: need at least one source mesh");
    }
    std::vector<LabeledSurfaceMesh> levels;
    levels.reserve(source_paths.size());
    for (const auto& path : source_paths) levels.push_back(load_surface_mesh(path));
    const LabeledSurfaceMesh target = load_surface_mesh(config.get_string("register.target"));

    TrainConfig cfg;
    cfg.rff.n_rff = static_cast<int>(config.get_int_or("rff.n_rff", cfg.rff.n_rff));
    cfg.flow.n_steps = static_cast<int>(config.get_int_or("flow.n_steps", cfg.flow.n_steps));
    if (config.has("net.hidden")) {
        cfg.hidden.clear();
        for (const long long h : config.get_int_array("net.hidden")) {
            cfg.hidden.push_back(static_cast<int>(h));
        }
    }
    cfg.weights.lambda_n = config.get_double_or("loss.lambda_n", cfg.weights.lambda_n);
    cfg.weights.lambda_C = config.get_double_or("loss.lambda_c", cfg.weights.lambda_C);
    cfg.weights.lambda_edges = config.get_double_or("loss.lambda_edges", cfg.weights.lambda_edges);
    cfg.weights.lambda_en = config.get_double_or("loss.lambda_en", cfg.weights.lambda_en);
    cfg.adam.lr = config.get_double_or("adam.lr", cfg.adam.lr);
    cfg.adam.beta1 = config.get_double_or("adam.beta1", cfg.adam.beta1);
    cfg.adam.beta2 = config.get_double_or("adam.beta2", cfg.adam.beta2);
    cfg.adam.eps = config.get_double_or("adam.eps", cfg.adam.eps);
    cfg.schedule.total_epochs =
        static_cast<int>(config.get_int_or("schedule.total_epochs", cfg.schedule.total_epochs));
    cfg.schedule.switch_epochs.clear();
    if (config.has("schedule.switch_epochs")) {
        for (const long long e : config.get_int_array("schedule.switch_epochs")) {
            cfg.schedule.switch_epochs.push_back(static_cast<int>(e));
        }
    }
    if (cfg.schedule.switch_epochs.size() + 1 != levels.size()) {
        throw SchemaError(
            "config key schedule.switch_epochs: need one switch per refinement, so " +
            std::to_string(levels.size() - 1) + " entries for " + std::to_string(levels.size()) +
            " register.sources");
    }

    WarningLog log;
    const RegistrationResult result =
        train_multigrid(levels, target, cfg, run_seed(config), &log);
    print_warnings(log);

    save_flownet(dir + "/model.flownet", result.net, cfg.flow);
    write_fmat(dir + "/mapped.fmat", result.mapped_source);

    // Loss trace with a decay-0.9 exponential moving average, restarted at
    // every multigrid switch so each segment is separately comparable.
    std::ostringstream loss_csv;
    loss_csv << "epoch,loss,ema\n";
    double ema = 0.0;
    std::size_t next_switch = 0;
    for (std::size_t epoch = 0; epoch < result.loss_trace.size(); ++epoch) {
        const bool restart =
            epoch == 0 || (next_switch < cfg.schedule.switch_epochs.size() &&
                           epoch == static_cast<std::size_t>(
                                        cfg.schedule.switch_epochs[next_switch]));
        if (restart && epoch > 0) ++next_switch;
        const double loss = result.loss_trace[epoch];
        ema = restart ? loss : 0.9 * ema + 0.1 * loss;
        loss_csv << epoch << "," << num(loss) << "," << num(ema) << "\n";
    }
    write_text(dir + "/loss.csv", loss_csv.str());

    std::ostringstream summary;
    summary << "normalized_chamfer,certified_lipschitz,empirical_lipschitz,certified_bijective,"
               "empirically_bijective\n";
    summary << num(result.normalized_chamfer) << "," << num(result.certificate.certified) << ","
            << num(result.certificate.empirical) << ","
            << (result.certificate.certified_bijective ? 1 : 0) << ","
            << (result.certificate.empirically_bijective ? 1 : 0) << "\n";
    write_text(dir + "/summary.csv", summary.str());

    return {"model.flownet", "mapped.fmat", "loss.csv", "summary.csv"};
}

// ---------------------------------------------------------------------------
// transport
// ---------------------------------------------------------------------------

std::vector<std::string> run_transport(const RunConfig& config) {
    const std::string dir = output_dir(config);

    const std::string mode = config.get_string("transport.mode");
    if (mode != "pushforward" && mode != "pullback") {
        throw SchemaError("config key transport.mode: expected pushforward or pullback, found " +
                          mode);
    }
    const RbfMap map = load_rbf_map(config.get_string("transport.map"));

    // The transported field is itself given by samples: values at points,
    // interpolated with the same thin-plate machinery.
    const Eigen::MatrixXd field_points_raw = read_fmat(config.get_string("transport.field_points"));
    if (field_points_raw.cols() != 3) {
        throw SchemaError("config key transport.field_points: expected an n x 3 matrix");
    }
    const Eigen::MatrixXd field_values = read_fmat(config.get_string("transport.field"));
    const int k = static_cast<int>(config.get_int_or("transport.k", 30));
    const RbfMap field_map = fit_rbf_map(field_points_raw, field_values, k);
    const FieldFn g = [&field_map](const Eigen::Vector3d& x) -> Eigen::VectorXd {
        Eigen::MatrixX3d q(1, 3);
        q.row(0) = x;
        return rbf_interpolate(field_map, q).row(0);
    };

    const Eigen::MatrixXd points_raw = read_fmat(config.get_string("transport.points"));
    if (points_raw.cols() != 3) {
        throw SchemaError("config key transport.points: expected an n x 3 matrix");
    }
    const Eigen::MatrixX3d points = points_raw;

    const Eigen::MatrixXd transported =
        mode == "pushforward" ? pushforward_field(g, map, points) : pullback_field(g, map, points);
    write_fmat(dir + "/transported.fmat", transported);
    return {"transported.fmat"};
}

// ---------------------------------------------------------------------------
// rsvd
// ---------------------------------------------------------------------------

std::vector<std::string> run_rsvd(const RunConfig& config) {
    const std::string dir = output_dir(config);

    const Eigen::MatrixXd snapshots = read_fmat(config.get_string("rsvd.snapshots"));
    const int rank = static_cast<int>(config.get_int("rsvd.rank"));
    const int oversample = static_cast<int>(config.get_int_or("rsvd.oversample", 10));
    const int power_iters = static_cast<int>(config.get_int_or("rsvd.power_iters", 2));
    const std::string kind_name = config.get_string_or("rsvd.kind", "velocity");
    FieldKind kind = FieldKind::Velocity;
    if (kind_name == "pressure") {
        kind = FieldKind::Pressure;
    } else if (kind_name != "velocity") {
        throw SchemaError("config key rsvd.kind: expected velocity or pressure, found " +
                          kind_name);
    }

    const ReducedBasis basis = rsvd(snapshots, rank, oversample, power_iters, run_seed(config));
    write_fmat(dir + "/basis.fmat", basis.phi);

    std::ostringstream sv;
    sv << "index,sigma\n";
    for (Eigen::Index i = 0; i < basis.sigma.size(); ++i) {
        sv << i << "," << num(basis.sigma[i]) << "\n";
    }
    write_text(dir + "/singular_values.csv", sv.str());

    // Mean/max relative reconstruction error over the snapshot columns for
    // every nested leading-r sub-basis.
    std::ostringstream rec;
    rec << "r,mean_error,max_error\n";
    for (int r = 1; r <= rank; ++r) {
        ReducedBasis sub;
        sub.phi = basis.phi.leftCols(r);
        sub.sigma = basis.sigma.head(r);
        double sum = 0.0, worst = 0.0;
        for (Eigen::Index j = 0; j < snapshots.cols(); ++j) {
            const double e = reconstruction_error(snapshots.col(j), sub, kind);
            sum += e;
            worst = std::max(worst, e);
        }
        rec << r << "," << num(sum / static_cast<double>(snapshots.cols())) << "," << num(worst)
            << "\n";
    }
    write_text(dir + "/reconstruction_error.csv", rec.str());

    return {"basis.fmat", "singular_values.csv", "reconstruction_error.csv"};
}

// ---------------------------------------------------------------------------
// similar
// ---------------------------------------------------------------------------

namespace {

DissimilarityMetric parse_metric(const std::string& key, const std::string& name) {
    if (name == "encoding") return DissimilarityMetric::Encoding;
    if (name == "phi") return DissimilarityMetric::Phi;
    if (name == "hausdorff") return DissimilarityMetric::Hausdorff;
    if (name == "grassmann") return DissimilarityMetric::Grassmann;
    throw SchemaError("config key " + key +
                      ": expected encoding, phi, hausdorff or grassmann, found " + name);
}

}  // namespace

std::vector<std::string> run_similar(const RunConfig& config) {
    const std::string dir = output_dir(config);

    const std::vector<std::string> item_paths = config.get_string_array("similar.items");
    if (item_paths.size() < 2) {
        throw SchemaError("config key similar.items: need at least two items");
    }
    std::vector<Eigen::MatrixXd> items;
    items.reserve(item_paths.size());
    for (const auto& path : item_paths) items.push_back(read_fmat(path));

    const DissimilarityMetric metric =
        parse_metric("similar.metric", config.get_string("similar.metric"));
    const DissimilarityMatrix d1 = dissimilarity_matrix(items, metric);
    write_fmat(dir + "/dissimilarity.fmat", d1.d);
    std::vector<std::string> outputs{"dissimilarity.fmat"};

    if (config.has("similar.metric2")) {
        const DissimilarityMetric metric2 =
            parse_metric("similar.metric2", config.get_string("similar.metric2"));
        const DissimilarityMatrix d2 = dissimilarity_matrix(items, metric2);
        write_fmat(dir + "/dissimilarity2.fmat", d2.d);
        outputs.push_back("dissimilarity2.fmat");

        const int n_perm = static_cast<int>(config.get_int_or("similar.permutations", 999));
        const MantelResult mantel = mantel_test(d1, d2, n_perm, run_seed(config));
        std::ostringstream csv;
        csv << "r_m,p_value,permutations\n";
        csv << num(mantel.r_m) << "," << num(mantel.p_value) << "," << n_perm << "\n";
        write_text(dir + "/mantel.csv", csv.str());
        outputs.push_back("mantel.csv");
    }

    const int mds_dim = static_cast<int>(config.get_int_or("similar.mds_dim", 2));
    const Eigen::MatrixXd coords = mds_embed(d1, mds_dim);
    std::ostringstream csv;
    csv << "item";
    for (int c = 0; c < mds_dim; ++c) csv << ",c" << (c + 1);
    csv << "\n";
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        csv << i;
        for (Eigen::Index c = 0; c < coords.cols(); ++c) csv << "," << num(coords(i, c));
        csv << "\n";
    }
    write_text(dir + "/mds.csv", csv.str());
    outputs.push_back("mds.csv");
    return outputs;
}

// ---------------------------------------------------------------------------
// pbdw
// ---------------------------------------------------------------------------

std::vector<std::string> run_pbdw(const RunConfig& config) {
    const std::string dir = output_dir(config);

    const TetMesh mesh = load_tet_mesh(config.get_string("pbdw.mesh"));
    const Eigen::Index d_u = 3 * mesh.n_vertices();
    const Eigen::MatrixXd phi = read_fmat(config.get_string("pbdw.basis"));
    if (phi.rows() != d_u) {
        throw SchemaError("config key pbdw.basis: expected " + std::to_string(d_u) +
                          " rows, found " + std::to_string(phi.rows()));
    }

    const double voxel_edge = config.get_double_or("pbdw.voxel_edge", 2e-3);
    const VoxelGrid grid = make_voxel_grid(mesh, voxel_edge);
    WarningLog log;
    const VoxelObservations vox = build_voxel_observations(mesh, grid.centers, grid.edge, &log);
    print_warnings(log);
    const ObservationSystem obs = build_observation_system(vox, divergence_row(mesh), phi);
    const Eigen::Index m = obs.m();

    Eigen::VectorXd y;
    if (config.has("pbdw.measurements")) {
        y = read_fmat_vector(config.get_string("pbdw.measurements"));
        if (y.size() != m) {
            throw SchemaError("config key pbdw.measurements: expected " + std::to_string(m) +
                              " entries (3 per admissible voxel plus divergence), found " +
                              std::to_string(y.size()));
        }
    } else if (config.has("pbdw.truth")) {
        const Eigen::VectorXd truth = read_fmat_vector(config.get_string("pbdw.truth"));
        if (truth.size() != d_u) {
            throw SchemaError("config key pbdw.truth: expected " + std::to_string(d_u) +
                              " entries, found " + std::to_string(truth.size()));
        }
        y = observe(obs, truth);
        const double sigma = config.get_double_or("pbdw.noise_sigma", 0.0);
        if (sigma > 0.0) {
            Rng rng(run_seed(config));
            for (Eigen::Index i = 0; i < m; ++i) y[i] += sigma * rng.normal();
        }
    } else {
        throw SchemaError("pbdw needs either pbdw.measurements or pbdw.truth");
    }

    NoiseModel model;
    if (config.has("noise.preset")) model = noise_preset(config.get_string("noise.preset"));
    model.snr_ho = config.get_double_or("noise.snr_ho", model.snr_ho);
    model.snr_he = config.get_double_or("noise.snr_he", model.snr_he);
    model.eps2 = config.get_double_or("noise.eps2", model.eps2);
    if (config.has("noise.sigma_div2")) model.sigma_div2 = config.get_double("noise.sigma_div2");
    if (config.has("noise.sigma_floor2")) {
        model.sigma_floor2 = config.get_double("noise.sigma_floor2");
    }
    if (config.has("noise.delta")) model.delta = config.get_double("noise.delta");
    if (config.has("noise.l_t")) model.l_t = config.get_double("noise.l_t");
    const NoiseCovariance noise = build_noise_covariance(mesh, vox.centers, grid.edge, model,
                                                         y.head(3 * vox.centers.rows()));

    PbdwOptions options;
    options.with_covariance = config.get_bool_or("pbdw.with_covariance", false);
    const PbdwSolution solution = pbdw_solve(obs, noise.s, y, options);

    write_fmat(dir + "/state.fmat", solution.u_hat);

    std::ostringstream zc;
    zc << "index,z\n";
    for (Eigen::Index i = 0; i < solution.z.size(); ++i) {
        zc << i << "," << num(solution.z[i]) << "\n";
    }
    write_text(dir + "/coefficients.csv", zc.str());

    std::ostringstream ec;
    ec << "index,eta\n";
    for (Eigen::Index i = 0; i < solution.eta.size(); ++i) {
        ec << i << "," << num(solution.eta[i]) << "\n";
    }
    write_text(dir + "/correction.csv", ec.str());

    std::ostringstream diag;
    diag << "m,r,u_bar,noise_trace\n";
    diag << m << "," << phi.cols() << "," << num(noise.u_bar) << ","
         << num(options.with_covariance ? solution.noise_trace
                                        : std::numeric_limits<double>::quiet_NaN())
         << "\n";
    write_text(dir + "/diagnostics.csv", diag.str());

    return {"state.fmat", "coefficients.csv", "correction.csv", "diagnostics.csv"};
}

// ---------------------------------------------------------------------------
// pressure
// ---------------------------------------------------------------------------

std::vector<std::string> run_pressure(const RunConfig& config) {
    const std::string dir = output_dir(config);

    const TetMesh mesh = load_tet_mesh(config.get_string("pressure.mesh"));
    const P1Operators ops = assemble_p1(mesh);
    const Eigen::Index d_u = 3 * mesh.n_vertices();

    FlowParams params;
    params.tau = config.get_double_or("flow.tau", params.tau);
    params.rho = config.get_double_or("flow.rho", params.rho);
    params.mu = config.get_double_or("flow.mu", params.mu);
    params.c_s = config.get_double_or("flow.c_s", params.c_s);

    const FemField u_n = read_velocity_field(config.get_string("pressure.u_n"), d_u);
    const FemField u_half = read_velocity_field(config.get_string("pressure.u_half"), d_u);
    const FemField u_next = read_velocity_field(config.get_string("pressure.u_next"), d_u);

    const std::string method = config.get_string("pressure.method");
    FemField p;
    FemField w;
    bool has_velocity = false;
    if (method == "ppe") {
        p = ppe_solve(mesh, ops, u_n, u_half, u_next, params);
    } else if (method == "ste") {
        std::tie(w, p) = ste_solve(mesh, ops, u_n, u_half, u_next, params);
        has_velocity = true;
    } else if (method == "ppe_rom") {
        const Eigen::MatrixXd basis_p = read_fmat(config.get_string("pressure.basis_p"));
        const PpeRom rom = rom_project_ppe(mesh, ops, basis_p);
        p = ppe_rom_solve(mesh, ops, rom, u_n, u_half, u_next, params);
    } else if (method == "ste_rom") {
        const Eigen::MatrixXd basis_u = read_fmat(config.get_string("pressure.basis_u"));
        const Eigen::MatrixXd basis_p = read_fmat(config.get_string("pressure.basis_p"));
        const bool enrich = config.get_bool_or("pressure.enrich", true);
        const SteRom rom = rom_project_ste(mesh, ops, basis_u, basis_p, params.c_s, enrich);
        std::tie(w, p) = ste_rom_solve(mesh, ops, rom, u_n, u_half, u_next, params);
        has_velocity = true;
    } else {
        throw SchemaError("config key pressure.method: expected ppe, ste, ppe_rom or ste_rom, "
                          "found " + method);
    }

    write_fmat(dir + "/pressure.fmat", p.values);
    std::vector<std::string> outputs{"pressure.fmat"};
    if (has_velocity) {
        write_fmat(dir + "/velocity.fmat", w.values);
        outputs.push_back("velocity.fmat");
    }

    if (config.has("pressure.covariance")) {
        const Eigen::MatrixXd dense = read_fmat(config.get_string("pressure.covariance"));
        if (dense.rows() != d_u || dense.cols() != d_u) {
            throw SchemaError("config key pressure.covariance: expected a " + std::to_string(d_u) +
                              "-square matrix");
        }
        const BlockCovariance cov = block_covariance_from_dense(mesh, dense);
        const BiasMode mode = (method == "ppe" || method == "ppe_rom") ? BiasMode::Ppe
                                                                       : BiasMode::Ste;
        const BiasResult bias = bias_correction(mesh, ops, cov, params.rho, mode, params.c_s);
        write_fmat(dir + "/bias_pressure.fmat", bias.pressure.values);
        outputs.push_back("bias_pressure.fmat");
        if (mode == BiasMode::Ste) {
            write_fmat(dir + "/bias_velocity.fmat", bias.velocity.values);
            outputs.push_back("bias_velocity.fmat");
        }
    }

    if (config.has("pressure.drop_in")) {
        const std::string in_name = config.get_string("pressure.drop_in");
        const auto in_it = mesh.sections.find(in_name);
        if (in_it == mesh.sections.end()) {
            throw SchemaError("config key pressure.drop_in: mesh has no section " + in_name);
        }
        std::ostringstream csv;
        csv << "section,drop\n";
        for (const std::string& out_name : config.get_string_array("pressure.drop_out")) {
            const auto out_it = mesh.sections.find(out_name);
            if (out_it == mesh.sections.end()) {
                throw SchemaError("config key pressure.drop_out: mesh has no section " + out_name);
            }
            csv << out_name << "," << num(pressure_drop(mesh, p, in_it->second, out_it->second))
                << "\n";
        }
        write_text(dir + "/drops.csv", csv.str());
        outputs.push_back("drops.csv");
    }

    return outputs;
}

// ---------------------------------------------------------------------------
// windkessel
// ---------------------------------------------------------------------------

std::vector<std::string> run_windkessel(const RunConfig& config) {
    const std::string dir = output_dir(config);
    const std::string mode = config.get_string("windkessel.mode");

    if (mode == "calibrate") {
        CalibrationInput input;
        input.q_in_ref = config.get_double("calibrate.q_in_ref");
        input.r_s_ref = config.get_double("calibrate.r_s_ref");
        input.q_in = config.get_double("calibrate.q_in");
        const std::vector<double> u_mean = config.get_double_array("calibrate.u_mean_ref");
        const std::vector<double> areas = config.get_double_array("calibrate.areas");
        input.u_mean_ref = Eigen::Map<const Eigen::VectorXd>(u_mean.data(),
                                                             static_cast<Eigen::Index>(u_mean.size()));
        input.areas =
            Eigen::Map<const Eigen::VectorXd>(areas.data(), static_cast<Eigen::Index>(areas.size()));
        input.c_tot = config.get_double_or("calibrate.c_tot", input.c_tot);

        const std::string convention_name =
            config.get_string_or("calibrate.convention", "as_written");
        ResistanceConvention convention = ResistanceConvention::AsWritten;
        if (convention_name == "parallel_consistent") {
            convention = ResistanceConvention::ParallelConsistent;
        } else if (convention_name != "as_written") {
            throw SchemaError(
                "config key calibrate.convention: expected as_written or parallel_consistent, "
                "found " + convention_name);
        }

        const std::vector<WindkesselParams> params = calibrate_windkessel(input, convention);
        const Eigen::VectorXd sigma = flow_split(input);
        std::ostringstream csv;
        csv << "outlet,sigma,r_p,r_d,c_d,pi\n";
        for (std::size_t i = 0; i < params.size(); ++i) {
            csv << i << "," << num(sigma[static_cast<Eigen::Index>(i)]) << ","
                << num(params[i].r_p) << "," << num(params[i].r_d) << "," << num(params[i].c_d)
                << "," << num(params[i].pi) << "\n";
        }
        write_text(dir + "/outlets.csv", csv.str());
        return {"outlets.csv"};
    }

    if (mode != "simulate") {
        throw SchemaError("config key windkessel.mode: expected calibrate or simulate, found " +
                          mode);
    }

    WindkesselParams params;
    params.r_p = config.get_double("simulate.r_p");
    params.r_d = config.get_double("simulate.r_d");
    params.c_d = config.get_double("simulate.c_d");
    params.pi = config.get_double_or("simulate.pi", 0.0);
    const double dt = config.get_double("simulate.dt");

    const std::string scheme_name = config.get_string_or("simulate.scheme", "implicit");
    WindkesselScheme scheme = WindkesselScheme::Implicit;
    if (scheme_name == "semi_implicit") {
        scheme = WindkesselScheme::SemiImplicit;
    } else if (scheme_name != "implicit") {
        throw SchemaError("config key simulate.scheme: expected implicit or semi_implicit, "
                          "found " + scheme_name);
    }

    std::vector<double> flows;
    if (config.has("simulate.flow")) {
        flows = config.get_double_array("simulate.flow");
        if (flows.empty()) throw SchemaError("config key simulate.flow: empty flow series");
    } else {
        const double q = config.get_double("simulate.q");
        const long long steps = config.get_int("simulate.steps");
        if (steps <= 0) throw SchemaError("config key simulate.steps: must be positive");
        flows.assign(static_cast<std::size_t>(steps), q);
    }

    std::ostringstream csv;
    csv << "step,time,flow,pi,pressure\n";
    for (std::size_t k = 0; k < flows.size(); ++k) {
        const WindkesselStep step = windkessel_step(params, flows[k], dt, scheme);
        params.pi = step.pi_next;
        csv << (k + 1) << "," << num(static_cast<double>(k + 1) * dt) << "," << num(flows[k])
            << "," << num(step.pi_next) << "," << num(step.pressure) << "\n";
    }
    write_text(dir + "/trace.csv", csv.str());
    return {"trace.csv"};
}

// ---------------------------------------------------------------------------
// biomarkers
// ---------------------------------------------------------------------------

std::vector<std::string> run_biomarkers(const RunConfig& config) {
    const std::string dir = output_dir(config);

    const TetMesh mesh = load_tet_mesh(config.get_string("biomarkers.mesh"));
    const Eigen::Index d_u = 3 * mesh.n_vertices();
    const double mu = config.get_double_or("biomarkers.mu", kBloodViscosity);
    if (!config.has("biomarkers.velocity") && !config.has("biomarkers.series")) {
        throw SchemaError("biomarkers needs biomarkers.velocity and/or biomarkers.series");
    }

    std::vector<std::string> outputs;
    if (config.has("biomarkers.velocity")) {
        const Eigen::VectorXd u =
            read_velocity_field(config.get_string("biomarkers.velocity"), d_u).values;
        const std::vector<WallTraction> tractions = wall_shear_stress(mesh, u, mu);
        std::ostringstream csv;
        csv << "face,area,nx,ny,nz,tx,ty,tz,magnitude\n";
        for (const auto& t : tractions) {
            csv << t.face << "," << num(t.area) << "," << num(t.normal[0]) << ","
                << num(t.normal[1]) << "," << num(t.normal[2]) << "," << num(t.tau[0]) << ","
                << num(t.tau[1]) << "," << num(t.tau[2]) << "," << num(t.tau.norm()) << "\n";
        }
        write_text(dir + "/wss.csv", csv.str());
        outputs.push_back("wss.csv");
    }

    if (config.has("biomarkers.series")) {
        const std::vector<std::string> paths = config.get_string_array("biomarkers.series");
        if (paths.size() != 8) {
            throw SchemaError("config key biomarkers.series: expected exactly 8 velocity files, "
                              "found " + std::to_string(paths.size()));
        }
        std::vector<std::vector<WallTraction>> series;
        series.reserve(paths.size());
        for (const auto& path : paths) {
            series.push_back(wall_shear_stress(mesh, read_velocity_field(path, d_u).values, mu));
        }
        const WssStatistics stats = twss_osi(series);
        std::ostringstream csv;
        csv << "face,area,tx,ty,tz,magnitude,osi\n";
        for (Eigen::Index i = 0; i < stats.osi.size(); ++i) {
            csv << stats.faces[static_cast<std::size_t>(i)] << "," << num(stats.areas[i]) << ","
                << num(stats.twss(i, 0)) << "," << num(stats.twss(i, 1)) << ","
                << num(stats.twss(i, 2)) << "," << num(stats.twss.row(i).norm()) << ","
                << num(stats.osi[i]) << "\n";
        }
        write_text(dir + "/twss_osi.csv", csv.str());
        outputs.push_back("twss_osi.csv");
    }

    return outputs;
}

}  // namespace morphassim::cli
