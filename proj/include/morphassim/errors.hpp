/// @file errors.hpp
/// @brief Error hierarchy shared by the library and the CLI.
///
/// The three subtypes map 1:1 onto the CLI exit codes:
///   SchemaError    -> 2 (config or input-schema violation)
///   NumericalError -> 3 (solver breakdown, failed numerical precondition)
///   IoError        -> 4 (missing/unreadable/unwritable files)
#pragma once

#include <stdexcept>
#include <string>

namespace morphassim {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& msg) : Error(msg) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace morphassim
