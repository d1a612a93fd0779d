/// @file config.hpp
/// @brief Flat-section key-value run configuration, command-line overrides,
///        canonical hashing and run manifests.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace morphassim {

inline constexpr const char* kLibraryVersion = "1.0.0";

/// One configuration value: a scalar or a homogeneous array.
using ConfigValue =
    std::variant<bool, double, std::string, std::vector<double>, std::vector<std::string>>;

/// Key-value tree addressed as "section.key".
///
/// The on-disk format is TOML-style text restricted to flat sections:
///   # comment
///   [section]
///   scalar = 4.25          # number
///   flag   = true          # boolean
///   name   = "file.json"   # quoted string
///   list   = [1, 2, 3]     # homogeneous array (numbers or strings)
/// Keys may also appear before any section header, in which case the bare
/// key is the address. Duplicate keys are rejected.
class RunConfig {
public:
    /// Parses a config file. Throws IoError when unreadable and SchemaError
    /// (with file and line) on malformed text.
    static RunConfig parse_file(const std::string& path);

    /// Parses config text; `origin` names the source in error messages.
    static RunConfig parse_text(const std::string& text, const std::string& origin = "<config>");

    /// Applies a "section.key=value" override. The value grammar matches the
    /// file format, with one relaxation: an unquoted token that is neither a
    /// number, boolean nor array is taken as a string.
    void set_override(const std::string& assignment);

    void set(const std::string& key, ConfigValue value);
    bool has(const std::string& key) const;

    /// Required getters throw SchemaError naming the key on absence or a
    /// type mismatch; *_or variants fall back when the key is absent.
    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int_or(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    std::vector<double> get_double_array(const std::string& key) const;
    std::vector<long long> get_int_array(const std::string& key) const;
    std::vector<std::string> get_string_array(const std::string& key) const;
    std::vector<std::string> get_string_array_or(const std::string& key,
                                                 std::vector<std::string> fallback) const;

    /// Sorted "key = value" lines with round-trip numeric formatting; two
    /// configs with equal canonical text behave identically.
    std::string canonical_text() const;

    /// FNV-1a (64-bit) of the canonical text.
    std::uint64_t hash() const;

    const std::map<std::string, ConfigValue>& entries() const { return values_; }

private:
    const ConfigValue* find(const std::string& key) const;
    std::map<std::string, ConfigValue> values_;
};

/// FNV-1a 64-bit hash of a byte string.
std::uint64_t fnv1a64(const std::string& text);

/// Run metadata stored next to the outputs.
struct ManifestInfo {
    std::string subcommand;
    std::uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
    std::vector<std::string> outputs;  ///< file names relative to the output dir
};

/// Writes `<dir>/manifest.json` holding the subcommand, seed, thread count,
/// library/Eigen versions, the output file list, the canonical config text
/// and its hash. Byte-identical for identical inputs. Throws IoError when
/// the file cannot be written.
void write_manifest(const std::string& dir, const RunConfig& config, const ManifestInfo& info);

}  // namespace morphassim
