/// @file warnings.hpp
/// @brief Structured warnings for recoverable anomalies (missing regions,
///        excluded voxels, fallback paths). Callers pass a WarningLog to
///        collect them; a null log sends one line per warning to stderr.
#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace morphassim {

struct Warning {
    std::string where;    ///< operation that raised the warning
    std::string message;  ///< human-readable description
};

using WarningLog = std::vector<Warning>;

inline void warn(WarningLog* log, std::string where, std::string message) {
    if (log != nullptr) {
        log->push_back({std::move(where), std::move(message)});
    } else {
        std::cerr << "[morphassim:" << where << "] warning: " << message << "\n";
    }
}

}  // namespace morphassim
