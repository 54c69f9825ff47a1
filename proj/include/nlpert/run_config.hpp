#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlpert/duhamel_series.hpp"
#include "nlpert/mc_simulator.hpp"
#include "nlpert/model.hpp"

namespace nlpert {

/// Flat key = value settings with section prefixes (model., grid., series., sim., kernel., check.,
/// output., run.). Lines starting with '#' are comments. Later assignments win, so flags applied
/// after loading a file override it.
class RunConfig {
public:
    static RunConfig parse(const std::string& text, const std::string& origin = "<text>");
    static RunConfig load(const std::string& path);

    /// Throws std::invalid_argument for keys outside the known sections.
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    /// Comma-separated reals.
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    /// model.d, model.alpha, model.beta; model.alpha is required, model.beta defaults to alpha / 2.
    ModelParams model() const;
    SpaceTimeGrid grid() const;
    SimConfig sim() const;

    /// Every resolved value, as strings, for output headers.
    nlohmann::json to_json() const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Strict numeric parsing: the whole string must be consumed.
double parse_double(const std::string& text, const std::string& what);
long long parse_integer(const std::string& text, const std::string& what);

}  // namespace nlpert
