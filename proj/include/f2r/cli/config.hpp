#pragma once

#include <map>
#include <string>
#include <vector>

#include "f2r/core/errors.hpp"

namespace f2r {

// Flat dotted-path view of a TOML-style config file. Supported syntax:
// [section.sub] headers, key = value with strings, numbers, booleans and
// flat arrays, # comments. One file drives every subcommand; overrides
// come in as --set key=value.
class ConfigTree {
public:
    static ConfigTree parse_file(const std::string& path);
    static ConfigTree parse_string(const std::string& text, const std::string& origin = "<string>");

    void apply_override(const std::string& key_value);  // "a.b=3"

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    uint64_t get_u64(const std::string& key, uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    // Rejects unknown keys; `known` maps key -> help text.
    void validate_keys(const std::map<std::string, std::string>& known) const;

    std::string dump() const;  // resolved copy, stable ordering
    const std::map<std::string, std::string>& raw() const { return values_; }
    int line_of(const std::string& key) const;
    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    std::string origin_;
};

// The full key schema plus per-subcommand key sets (printed by --help).
const std::map<std::string, std::string>& config_schema();
const std::map<std::string, std::vector<std::string>>& subcommand_keys();

}  // namespace f2r
