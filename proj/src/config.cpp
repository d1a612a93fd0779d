#include "morphassim/config.hpp"

#include <Eigen/Core>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "morphassim/errors.hpp"

namespace morphassim {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (const char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    }
    return true;
}

bool valid_key(const std::string& s) {
    const std::size_t dot = s.find('.');
    if (dot == std::string::npos) return valid_name(s);
    return valid_name(s.substr(0, dot)) && valid_name(s.substr(dot + 1)) &&
           s.find('.', dot + 1) == std::string::npos;
}

/// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

bool parse_number(const std::string& token, double* out) {
    if (token.empty()) return false;
    std::size_t used = 0;
    try {
        *out = std::stod(token, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == token.size();
}

/// Parses a value token. When `bare_strings` is set, anything that is not a
/// number/bool/array/quoted string falls back to a plain string.
ConfigValue parse_value(const std::string& raw, const std::string& where, bool bare_strings) {
    const std::string token = trim(raw);
    if (token.empty()) throw SchemaError(where + ": empty value");
    if (token == "true") return true;
    if (token == "false") return false;
    if (token.front() == '"') {
        if (token.size() < 2 || token.back() != '"' ||
            token.find('"', 1) != token.size() - 1) {
            throw SchemaError(where + ": malformed string literal " + token);
        }
        return token.substr(1, token.size() - 2);
    }
    if (token.front() == '[') {
        if (token.back() != ']') throw SchemaError(where + ": unterminated array");
        const std::string inner = trim(token.substr(1, token.size() - 2));
        std::vector<double> numbers;
        std::vector<std::string> strings;
        if (!inner.empty()) {
            std::size_t start = 0;
            bool quoted = false;
            for (std::size_t i = 0; i <= inner.size(); ++i) {
                if (i < inner.size() && inner[i] == '"') quoted = !quoted;
                if (i == inner.size() || (inner[i] == ',' && !quoted)) {
                    const ConfigValue element =
                        parse_value(inner.substr(start, i - start), where, false);
                    if (const double* d = std::get_if<double>(&element)) {
                        numbers.push_back(*d);
                    } else if (const std::string* s = std::get_if<std::string>(&element)) {
                        strings.push_back(*s);
                    } else {
                        throw SchemaError(where + ": arrays hold numbers or strings only");
                    }
                    start = i + 1;
                }
            }
        }
        if (!numbers.empty() && !strings.empty()) {
            throw SchemaError(where + ": mixed-type array");
        }
        if (!strings.empty()) return strings;
        return numbers;
    }
    double number = 0.0;
    if (parse_number(token, &number)) return number;
    if (bare_strings) return token;
    throw SchemaError(where + ": cannot parse value " + token +
                      " (strings must be double-quoted)");
}

std::string format_double(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

std::string format_value(const ConfigValue& value) {
    struct Visitor {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(const std::string& s) const { return "\"" + s + "\""; }
        std::string operator()(const std::vector<double>& a) const {
            std::string out = "[";
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (i) out += ", ";
                out += format_double(a[i]);
            }
            return out + "]";
        }
        std::string operator()(const std::vector<std::string>& a) const {
            std::string out = "[";
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (i) out += ", ";
                out += "\"" + a[i] + "\"";
            }
            return out + "]";
        }
    };
    return std::visit(Visitor{}, value);
}

const char* type_name(const ConfigValue& value) {
    switch (value.index()) {
        case 0: return "boolean";
        case 1: return "number";
        case 2: return "string";
        case 3: return "number array";
        default: return "string array";
    }
}

[[noreturn]] void wrong_type(const std::string& key, const char* wanted,
                             const ConfigValue& value) {
    throw SchemaError("config key " + key + ": expected " + wanted + ", found " +
                      type_name(value) + " " + format_value(value));
}

long long to_int(const std::string& key, double d) {
    const long long i = static_cast<long long>(d);
    if (static_cast<double>(i) != d) {
        throw SchemaError("config key " + key + ": expected an integer, found " +
                          format_double(d));
    }
    return i;
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_text(text.str(), path);
}

RunConfig RunConfig::parse_text(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string where = origin + ":" + std::to_string(number);
        const std::string content = trim(strip_comment(line));
        if (content.empty()) continue;
        if (content.front() == '[') {
            if (content.back() != ']') throw SchemaError(where + ": unterminated section header");
            section = trim(content.substr(1, content.size() - 2));
            if (!valid_name(section)) {
                throw SchemaError(where + ": invalid section name [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = content.find('=');
        if (eq == std::string::npos) {
            throw SchemaError(where + ": expected key = value, found " + content);
        }
        const std::string name = trim(content.substr(0, eq));
        if (!valid_name(name)) throw SchemaError(where + ": invalid key name " + name);
        const std::string key = section.empty() ? name : section + "." + name;
        if (config.values_.count(key)) throw SchemaError(where + ": duplicate key " + key);
        config.values_.emplace(key, parse_value(content.substr(eq + 1), where, false));
    }
    return config;
}

void RunConfig::set_override(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw SchemaError("--set expects key=value, got " + assignment);
    }
    const std::string key = trim(assignment.substr(0, eq));
    if (!valid_key(key)) throw SchemaError("--set: invalid key " + key);
    values_[key] = parse_value(assignment.substr(eq + 1), "--set " + key, true);
}

void RunConfig::set(const std::string& key, ConfigValue value) {
    values_[key] = std::move(value);
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const ConfigValue* RunConfig::find(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

std::string RunConfig::get_string(const std::string& key) const {
    const ConfigValue* v = find(key);
    if (!v) throw SchemaError("missing required config key " + key);
    if (const std::string* s = std::get_if<std::string>(v)) return *s;
    wrong_type(key, "string", *v);
}

std::string RunConfig::get_string_or(const std::string& key, const std::string& fallback) const {
    return find(key) ? get_string(key) : fallback;
}

double RunConfig::get_double(const std::string& key) const {
    const ConfigValue* v = find(key);
    if (!v) throw SchemaError("missing required config key " + key);
    if (const double* d = std::get_if<double>(v)) return *d;
    wrong_type(key, "number", *v);
}

double RunConfig::get_double_or(const std::string& key, double fallback) const {
    return find(key) ? get_double(key) : fallback;
}

long long RunConfig::get_int(const std::string& key) const {
    return to_int(key, get_double(key));
}

long long RunConfig::get_int_or(const std::string& key, long long fallback) const {
    return find(key) ? get_int(key) : fallback;
}

bool RunConfig::get_bool(const std::string& key) const {
    const ConfigValue* v = find(key);
    if (!v) throw SchemaError("missing required config key " + key);
    if (const bool* b = std::get_if<bool>(v)) return *b;
    wrong_type(key, "boolean", *v);
}

bool RunConfig::get_bool_or(const std::string& key, bool fallback) const {
    return find(key) ? get_bool(key) : fallback;
}

std::vector<double> RunConfig::get_double_array(const std::string& key) const {
    const ConfigValue* v = find(key);
    if (!v) throw SchemaError("missing required config key " + key);
    if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
    wrong_type(key, "number array", *v);
}

std::vector<long long> RunConfig::get_int_array(const std::string& key) const {
    const std::vector<double> doubles = get_double_array(key);
    std::vector<long long> out;
    out.reserve(doubles.size());
    for (const double d : doubles) out.push_back(to_int(key, d));
    return out;
}

std::vector<std::string> RunConfig::get_string_array(const std::string& key) const {
    const ConfigValue* v = find(key);
    if (!v) throw SchemaError("missing required config key " + key);
    if (const auto* a = std::get_if<std::vector<std::string>>(v)) return *a;
    // An empty array parses as an empty number array; accept it here.
    if (const auto* d = std::get_if<std::vector<double>>(v); d && d->empty()) return {};
    wrong_type(key, "string array", *v);
}

std::vector<std::string> RunConfig::get_string_array_or(const std::string& key,
                                                        std::vector<std::string> fallback) const {
    return find(key) ? get_string_array(key) : std::move(fallback);
}

std::string RunConfig::canonical_text() const {
    std::string out;
    for (const auto& [key, value] : values_) {  // std::map iterates sorted
        out += key;
        out += " = ";
        out += format_value(value);
        out += "\n";
    }
    return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical_text()); }

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

void write_manifest(const std::string& dir, const RunConfig& config, const ManifestInfo& info) {
    char hash_hex[19];
    std::snprintf(hash_hex, sizeof(hash_hex), "0x%016llx",
                  static_cast<unsigned long long>(config.hash()));
    char eigen_version[32];
    std::snprintf(eigen_version, sizeof(eigen_version), "%d.%d.%d", EIGEN_WORLD_VERSION,
                  EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);

    nlohmann::json manifest;
    manifest["subcommand"] = info.subcommand;
    manifest["config_hash"] = hash_hex;
    manifest["config"] = config.canonical_text();
    manifest["seed"] = info.seed;
    manifest["threads"] = info.threads;
    manifest["deterministic"] = info.deterministic;
    manifest["outputs"] = info.outputs;
    manifest["versions"] = {{"morphassim", kLibraryVersion}, {"eigen", eigen_version}};

    const std::string path = dir + "/manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("failed while writing manifest " + path);
}

}  // namespace morphassim
