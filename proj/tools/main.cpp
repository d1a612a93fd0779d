/// @file main.cpp
/// @brief `morphassim` command-line front end.
///
/// Every subcommand reads one config file (flat-section TOML-style text,
/// documented in docs/config.md), applies `--set key=value` overrides and
/// the common `--seed/--threads/--deterministic` flags, runs its pipeline
/// and writes its artifacts plus a manifest into `output.dir`.
///
/// Exit codes: 0 success, 2 schema violation (bad config, malformed input),
/// 3 numerical failure, 4 I/O failure.
#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "commands.hpp"
#include "morphassim/config.hpp"
#include "morphassim/errors.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    long long seed = -1;       // -1: keep the config value
    long long threads = -1;    // -1: config value, then MORPHASSIM_THREADS, then 1
    bool deterministic = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags* flags) {
    cmd->add_option("--config", flags->config_path, "Run configuration file")
        ->required();
    cmd->add_option("--set", flags->overrides,
                    "Override a config entry as section.key=value (repeatable)");
    cmd->add_option("--seed", flags->seed, "RNG seed (overrides run.seed)");
    cmd->add_option("--threads", flags->threads, "Thread count (overrides run.threads)");
    cmd->add_flag("--deterministic", flags->deterministic,
                  "Force deterministic reductions (implies --threads 1)");
}

/// Merges file, overrides, flags and environment into the final config and
/// mirrors the resolved run.* values back into it, so the manifest hash
/// covers exactly what the run used.
morphassim::RunConfig resolve_config(const CommonFlags& flags, morphassim::ManifestInfo* info) {
    morphassim::RunConfig config = morphassim::RunConfig::parse_file(flags.config_path);
    for (const std::string& assignment : flags.overrides) config.set_override(assignment);

    if (flags.seed >= 0) config.set("run.seed", static_cast<double>(flags.seed));
    const long long seed = config.get_int_or("run.seed", 0);
    if (seed < 0) throw morphassim::SchemaError("config key run.seed: must be non-negative");
    config.set("run.seed", static_cast<double>(seed));

    long long threads = flags.threads;
    if (threads < 0 && config.has("run.threads")) threads = config.get_int("run.threads");
    if (threads < 0) {
        if (const char* env = std::getenv("MORPHASSIM_THREADS")) {
            try {
                threads = std::stoll(env);
            } catch (const std::exception&) {
                throw morphassim::SchemaError("MORPHASSIM_THREADS is not an integer");
            }
        }
    }
    if (threads < 0) threads = 1;
    if (threads == 0) throw morphassim::SchemaError("config key run.threads: must be positive");

    bool deterministic = flags.deterministic || config.get_bool_or("run.deterministic", false);
    if (deterministic) threads = 1;
    config.set("run.threads", static_cast<double>(threads));
    config.set("run.deterministic", deterministic);

    Eigen::setNbThreads(static_cast<int>(threads));

    info->seed = static_cast<std::uint64_t>(seed);
    info->threads = static_cast<int>(threads);
    info->deterministic = deterministic;
    return config;
}

using CommandFn = std::function<std::vector<std::string>(const morphassim::RunConfig&)>;

const std::map<std::string, std::pair<const char*, CommandFn>>& command_table() {
    static const std::map<std::string, std::pair<const char*, CommandFn>> table = {
        {"register",
         {"Train the diffeomorphic registration and export the mapped cloud",
          morphassim::cli::run_register}},
        {"transport",
         {"Push a sampled field through a fitted deformation map (or pull it back)",
          morphassim::cli::run_transport}},
        {"rsvd",
         {"Randomized SVD basis with singular values and reconstruction errors",
          morphassim::cli::run_rsvd}},
        {"similar",
         {"Pairwise dissimilarity matrices, Mantel test and MDS coordinates",
          morphassim::cli::run_similar}},
        {"pbdw",
         {"Voxel observations, noise covariance and the two-stage state estimate",
          morphassim::cli::run_pbdw}},
        {"pressure",
         {"Pressure estimation (ppe | ste | ppe_rom | ste_rom) with bias and drops",
          morphassim::cli::run_pressure}},
        {"windkessel",
         {"Lumped-model calibration or pressure time stepping",
          morphassim::cli::run_windkessel}},
        {"biomarkers",
         {"Wall shear stress, its time average and the oscillatory shear index",
          morphassim::cli::run_biomarkers}},
    };
    return table;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"morphassim: registration-based assimilation of labeled vascular meshes"};
    app.require_subcommand(1);

    std::map<std::string, CommonFlags> flags;
    for (const auto& [name, entry] : command_table()) {
        CLI::App* cmd = app.add_subcommand(name, entry.first);
        add_common_flags(cmd, &flags[name]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // Treat a malformed invocation as a schema violation; --help and
        // --version exit cleanly through app.exit.
        return code == 0 ? 0 : 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        morphassim::ManifestInfo info;
        info.subcommand = name;
        const morphassim::RunConfig config = resolve_config(flags.at(name), &info);
        info.outputs = command_table().at(name).second(config);
        morphassim::write_manifest(config.get_string("output.dir"), config, info);
        return 0;
    } catch (const morphassim::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const morphassim::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const morphassim::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
