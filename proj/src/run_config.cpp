#include "nlpert/run_config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nlpert {

namespace {

constexpr std::array<const char*, 8> kSections{"model", "grid", "series", "sim", "kernel", "check", "output", "run"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument(what + ": '" + text + "' is not a number");
    }
    if (used != text.size()) throw std::invalid_argument(what + ": '" + text + "' is not a number");
    return v;
}

long long parse_integer(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument(what + ": '" + text + "' is not an integer");
    }
    if (used != text.size()) throw std::invalid_argument(what + ": '" + text + "' is not an integer");
    return v;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(origin + ":" + std::to_string(number) + ": expected key = value");
        }
        try {
            c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(origin + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
        throw std::invalid_argument("key '" + key + "' needs a section prefix such as model.");
    }
    const std::string section = key.substr(0, dot);
    if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw std::invalid_argument("unknown section '" + section + "' in key '" + key + "'");
    }
    values_[key] = value;
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v ? parse_double(*v, key) : fallback;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
    const auto v = get(key);
    return v ? static_cast<int>(parse_integer(*v, key)) : fallback;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    const long long n = parse_integer(*v, key);
    if (n < 0) throw std::invalid_argument(key + " must be nonnegative");
    return static_cast<std::uint64_t>(n);
}

std::vector<double> RunConfig::get_list(const std::string& key, const std::vector<double>& fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), key));
    if (out.empty()) throw std::invalid_argument(key + " is empty");
    return out;
}

ModelParams RunConfig::model() const {
    if (!has("model.alpha")) throw std::invalid_argument("model.alpha is required (--alpha)");
    ModelParams p;
    p.d = get_int("model.d", 1);
    p.alpha = get_double("model.alpha", 0.0);
    p.beta = get_double("model.beta", p.alpha / 2.0);
    p.validate();
    return p;
}

SpaceTimeGrid RunConfig::grid() const {
    SpaceTimeGrid g;
    g.L = get_double("grid.L", g.L);
    g.N = get_int("grid.N", g.N);
    g.t_max = get_double("grid.t_max", g.t_max);
    g.M = get_int("grid.M", g.M);
    g.validate();
    return g;
}

SimConfig RunConfig::sim() const {
    SimConfig s;
    s.n_paths = static_cast<std::size_t>(get_u64("sim.n_paths", s.n_paths));
    s.dt = get_double("sim.dt", s.dt);
    s.horizon = get_double("sim.horizon", s.horizon);
    s.seed = get_u64("sim.seed", s.seed);
    s.domain_cap = get_double("sim.domain_cap", s.domain_cap);
    s.x0 = get_double("sim.x0", s.x0);
    s.record_times = {s.horizon};
    s.validate();
    return s;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
}

}  // namespace nlpert
