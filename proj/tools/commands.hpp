/// @file commands.hpp
/// @brief One entry point per CLI subcommand. Each command reads its inputs
///        from the configuration, writes its artifacts into `output.dir` and
///        returns the list of files written (relative to that directory).
#pragma once

#include <string>
#include <vector>

#include "morphassim/config.hpp"

namespace morphassim::cli {

std::vector<std::string> run_register(const RunConfig& config);
std::vector<std::string> run_transport(const RunConfig& config);
std::vector<std::string> run_rsvd(const RunConfig& config);
std::vector<std::string> run_similar(const RunConfig& config);
std::vector<std::string> run_pbdw(const RunConfig& config);
std::vector<std::string> run_pressure(const RunConfig& config);
std::vector<std::string> run_windkessel(const RunConfig& config);
std::vector<std::string> run_biomarkers(const RunConfig& config);

}  // namespace morphassim::cli
