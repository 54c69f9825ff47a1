#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "nlpert/model.hpp"

namespace nlpert {

enum class Expectation { Pass, ExpectedViolation };
enum class Status { Pass, Fail, Skip };
const char* to_string(Status s);

/// One check of the suite. `kind` selects the procedure; `options` carries its inputs
/// (presets, grid, simulation settings, times) as JSON.
struct CheckSpec {
    std::string name;
    int criterion = 0;
    std::string kind;
    ModelParams params{1, 1.2, 0.6};
    double tolerance = 1e-2;
    Expectation expected = Expectation::Pass;
    nlohmann::json options = nlohmann::json::object();

    /// Throws std::invalid_argument on malformed specs. Zero tolerances are accepted here and
    /// reported as unattainable by run_suite.
    void validate() const;
};

struct Measurement {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    std::string relation;  // "<=", ">=" or "info"
    std::string oracle;
    bool ok() const;
};

struct Verdict {
    std::string name;
    int criterion = 0;
    Status status = Status::Skip;
    std::string message;
    std::vector<Measurement> measured;
    nlohmann::json provenance = nlohmann::json::object();
    double seconds = 0.0;  // timing, excluded from reproducibility comparisons
};

struct SuiteOptions {
    std::string work_dir;  // scratch files of the determinism check; empty uses the system temp dir
    bool verbose = false;
    std::vector<std::string> only;  // run just these checks (others stay visible to the determinism check)
};

std::vector<CheckSpec> parse_suite(const nlohmann::json& doc);
std::vector<CheckSpec> load_suite(const std::string& path);
/// Path of the shipped default suite.
std::string default_suite_path();

Verdict run_check(const CheckSpec& spec, const SuiteOptions& options = {});
/// Runs every check in order; a throwing check becomes a fail verdict.
std::vector<Verdict> run_suite(const std::vector<CheckSpec>& specs, const SuiteOptions& options = {});
/// True when no verdict failed.
bool suite_passed(const std::vector<Verdict>& verdicts);

nlohmann::json to_json(const Verdict& v, bool with_timing = true);
nlohmann::json to_json(const std::vector<Verdict>& verdicts, bool with_timing = true);
/// Fixed-width summary table.
std::string summary_table(const std::vector<Verdict>& verdicts);

}  // namespace nlpert
