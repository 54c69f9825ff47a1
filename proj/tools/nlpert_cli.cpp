// nlpert: kernels, Picard series, verification suite and Monte Carlo from the command line.

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nlpert/duhamel_series.hpp"
#include "nlpert/mc_simulator.hpp"
#include "nlpert/nonlocal_operator.hpp"
#include "nlpert/parallel.hpp"
#include "nlpert/run_config.hpp"
#include "nlpert/stable_kernels.hpp"
#include "nlpert/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nlpert;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitCheckFailed = 4;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A flag that writes its value into the config under `key` when given.
struct Binding {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
};

class Flags {
public:
    void add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
        bindings_.push_back({key, "", nullptr});
        bindings_.back().option = app->add_option(name, bindings_.back().value, help + " [" + key + "]");
    }
    void apply(RunConfig& cfg) const {
        for (const Binding& b : bindings_) {
            if (b.option->count() > 0) cfg.set(b.key, b.value);
        }
    }

private:
    std::deque<Binding> bindings_;
};

json header(const std::string& command, const RunConfig& cfg) {
    return {{"schema_version", 1}, {"build", NLPERT_BUILD_ID}, {"command", command}, {"config", cfg.to_json()}};
}

fs::path out_path(const RunConfig& cfg, const std::string& name) {
    const fs::path dir = cfg.get_string("output.dir", ".");
    fs::create_directories(dir);
    return dir / (cfg.get_string("output.prefix", "") + name);
}

// CSV whose first line is '# ' followed by the JSON header.
class CsvWriter {
public:
    CsvWriter(const fs::path& path, const json& head, const std::string& columns) : path_(path), out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << "# " << head.dump() << '\n' << columns << '\n' << std::setprecision(15);
    }
    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((out_ << (first ? "" : ",") << v, first = false), ...);
        out_ << '\n';
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& doc) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << doc.dump(2) << '\n';
}

// --- kernel ----------------------------------------------------------------

int cmd_kernel(const RunConfig& cfg) {
    const ModelParams p = cfg.model();
    const std::string quantity = cfg.get_string("kernel.quantity", cfg.has("kernel.a") ? "pa" : "p0");
    static const std::set<std::string> known{"p0", "pa", "grad", "hess", "h", "g", "f0", "f"};
    if (!known.count(quantity))
        throw UsageError("unknown kernel quantity '" + quantity + "' (p0, pa, grad, hess, h, g, f0, f)");
    const double a = cfg.get_double("kernel.a", 0.0);
    const double lambda = cfg.get_double("kernel.lambda", std::numeric_limits<double>::infinity());
    const auto ts = cfg.get_list("kernel.t", {1.0});
    std::vector<double> rs;
    if (cfg.has("kernel.r")) {
        rs = cfg.get_list("kernel.r", {});
    } else {
        const double r_max = cfg.get_double("kernel.r_max", 4.0);
        const int points = cfg.get_int("kernel.r_points", 81);
        if (points < 2) throw UsageError("kernel.r_points must be at least 2");
        for (int k = 0; k < points; ++k) rs.push_back(r_max * k / (points - 1));
    }
    CsvWriter csv(out_path(cfg, "kernel.csv"), header("kernel", cfg), "t,r,value");
    for (double t : ts) {
        for (double r : rs) {
            std::vector<double> x(static_cast<std::size_t>(p.d), 0.0);
            x[0] = r;
            double v = 0.0;
            if (quantity == "p0") v = eval_p0(p, t, r);
            else if (quantity == "pa") v = eval_pa(p, a, t, r);
            else if (quantity == "grad") v = grad_p0(p, t, x)[0];
            else if (quantity == "hess") v = hess_p0(p, t, x)[0];
            else if (quantity == "h") v = comparison_h(p, {a, lambda}, t, r);
            else if (quantity == "g") v = comparison_g(p, a, t, r);
            else if (quantity == "f0") v = comparison_f0(p, t, r);
            else v = comparison_f(p, {a, lambda}, t, r);
            csv.row(t, r, v);
        }
    }
    std::cout << csv.path().string() << '\n';
    return 0;
}

// --- series ----------------------------------------------------------------

json report_json(const SeriesReport& r) {
    return {{"term_norms", r.term_norms},     {"term_masses", r.term_masses},
            {"term_ratios", r.term_ratios},   {"ratio", r.ratio},
            {"truncation_bound", r.truncation_bound},
            {"horizon_estimate", std::isfinite(r.horizon_estimate) ? json(r.horizon_estimate) : json("inf")},
            {"mass_defect", r.mass_defect},   {"terms_used", r.terms_used},
            {"converged", r.converged}};
}

SeriesOptions series_options(const RunConfig& cfg) {
    SeriesOptions so;
    so.n_max = cfg.get_int("series.n_max", so.n_max);
    so.tol = cfg.get_double("series.tol", so.tol);
    return so;
}

int cmd_series(const RunConfig& cfg) {
    const ModelParams p = cfg.model();
    const SpaceTimeGrid g = cfg.grid();
    const BFunction b = make_preset(cfg.get_string("model.b", "constant:0"), p);
    const double x0 = cfg.get_double("series.x0", 0.0);
    const int row = g.node_index(x0);
    SeriesOptions so = series_options(cfg);
    if (!b.translation_invariant()) so.rows = {row};
    SeriesResult r;
    try {
        r = sum_series(b, p, g, so);
    } catch (const DivergenceError& e) {
        std::ostringstream msg;
        msg << "series diverges on [0, " << g.t_max << "]: " << e.what() << "\nestimated horizon T* = "
            << e.horizon_estimate() << "; the admissible horizon scales like (A_0/||b||_inf)^{alpha/(alpha-beta)}"
            << ", rerun with grid.t_max below T*";
        json doc = header("series", cfg);
        doc["status"] = "diverged";
        doc["message"] = msg.str();
        doc["horizon_estimate"] = e.horizon_estimate();
        write_json(out_path(cfg, "series_report.json"), doc);
        std::cerr << msg.str() << '\n';
        return kExitDivergence;
    }
    const int i = b.translation_invariant() ? 0 : row;
    const ImageCorrection images(b, p, g);
    CsvWriter csv(out_path(cfg, "series_field.csv"), header("series", cfg), "t,x,y,value");
    for (std::size_t slot = 0; slot < r.sum.slots(); ++slot) {
        const double t = r.sum.time_of_slot(static_cast<int>(slot));
        if (t <= 0.0) continue;
        for (int off = -g.N / 2; off < g.N / 2; ++off) {
            const int j = ((i + off) % g.N + g.N) % g.N;
            csv.row(t, g.x(row), g.x(row) + off * g.h(), line_value(r.sum, images, static_cast<int>(slot), i, j));
        }
    }
    json doc = header("series", cfg);
    doc["status"] = "ok";
    doc["b"] = b.id();
    doc["grid"] = {{"L", g.L}, {"N", g.N}, {"t_max", g.t_max}, {"M", g.M}};
    doc["report"] = report_json(r.report);
    write_json(out_path(cfg, "series_report.json"), doc);
    std::cout << csv.path().string() << '\n';
    return 0;
}

// --- check -----------------------------------------------------------------

int cmd_check(const RunConfig& cfg, bool verbose) {
    const std::string suite = cfg.get_string("check.suite", "default");
    std::vector<CheckSpec> specs = load_suite(suite == "default" ? default_suite_path() : suite);
    if (cfg.has("check.tolerance")) {
        for (CheckSpec& s : specs) s.tolerance = cfg.get_double("check.tolerance", s.tolerance);
    }
    SuiteOptions opts;
    opts.work_dir = cfg.get_string("check.work_dir", (fs::path(cfg.get_string("output.dir", ".")) / "determinism").string());
    opts.verbose = verbose;
    if (cfg.has("check.only")) {
        std::stringstream ss(*cfg.get("check.only"));
        for (std::string n; std::getline(ss, n, ',');) opts.only.push_back(n);
    }
    const std::vector<Verdict> verdicts = run_suite(specs, opts);
    json doc = header("check", cfg);
    doc["verdicts"] = to_json(verdicts);
    doc["passed"] = suite_passed(verdicts);
    write_json(out_path(cfg, "verdicts.json"), doc);
    std::cout << summary_table(verdicts);
    return suite_passed(verdicts) ? 0 : kExitCheckFailed;
}

// --- simulate / compare ----------------------------------------------------

std::vector<double> bin_edges(const RunConfig& cfg) {
    return uniform_edges(cfg.get_double("sim.bins_lo", -8.0), cfg.get_double("sim.bins_hi", 8.0),
                         cfg.get_int("sim.bins", 80));
}

json ensemble_json(const PathEnsemble& e, const Histogram& h) {
    std::size_t flagged = 0;
    for (auto f : e.flagged) flagged += f;
    return {{"n_paths", e.size()}, {"seed", e.config.seed}, {"dt", e.config.dt}, {"horizon", e.config.horizon},
            {"x0", e.config.x0}, {"model", e.model_id}, {"alpha_jumps", e.alpha_jumps},
            {"beta_jumps", e.beta_jumps}, {"flagged", flagged}, {"outside_mass", h.outside}};
}

int cmd_simulate(const RunConfig& cfg) {
    const ModelParams p = cfg.model();
    const SimConfig sc = cfg.sim();
    const SdeCoefficient c = sde_coefficient(cfg.get_string("sim.c", "const:1"), p);
    const PathEnsemble e = simulate_sde(c.c, c.label, p, sc, nullptr, c.zero);
    const Histogram h = empirical_density(e, sc.horizon, bin_edges(cfg));
    CsvWriter csv(out_path(cfg, "simulate_histogram.csv"), header("simulate", cfg),
                  "bin_lo,bin_hi,probability,density,std_error");
    for (std::size_t k = 0; k < h.probability.size(); ++k) {
        csv.row(h.edges[k], h.edges[k + 1], h.probability[k], h.density[k], h.std_error[k]);
    }
    json doc = header("simulate", cfg);
    doc["ensemble"] = ensemble_json(e, h);
    write_json(out_path(cfg, "simulate_summary.json"), doc);
    std::cout << csv.path().string() << '\n';
    return 0;
}

int cmd_compare(const RunConfig& cfg) {
    const ModelParams p = cfg.model();
    SimConfig sc = cfg.sim();
    std::string b_id = cfg.get_string("model.b", "sde");
    std::string c_id = cfg.get_string("sim.c", "");
    if (b_id == "sde") {
        if (c_id.empty()) throw UsageError("--b sde needs --c");
        b_id = c_id.rfind("sde:", 0) == 0 ? c_id : "sde:" + c_id;
    } else if (c_id.empty()) {
        if (b_id.rfind("constant:", 0) != 0 && b_id.rfind("sde:", 0) != 0) {
            throw UsageError("b = " + b_id + " has no jump coefficient c; pass --c");
        }
        c_id = b_id;
    }
    const BFunction b = make_preset(b_id, p);
    const SdeCoefficient c = sde_coefficient(c_id, p);
    SpaceTimeGrid g = cfg.grid();
    if (!cfg.has("grid.t_max")) g.t_max = sc.horizon;
    const int row = g.node_index(sc.x0);
    if (std::abs(g.x(row) - sc.x0) > 1e-12) throw UsageError("sim.x0 must be a grid node");
    SeriesOptions so = series_options(cfg);
    so.rows = {row};
    so.keep_all_times = false;
    so.record_times = {sc.horizon};
    SeriesResult r;
    try {
        r = sum_series(b, p, g, so);
    } catch (const DivergenceError& e) {
        std::cerr << "series diverges: " << e.what() << "; estimated horizon " << e.horizon_estimate() << '\n';
        return kExitDivergence;
    }
    const ImageCorrection images(b, p, g);
    const std::vector<double> edges = bin_edges(cfg);
    const std::vector<double> model =
        row_bin_integrals(r.sum, &images, r.sum.slot_of_time(sc.horizon), row, edges);
    const PathEnsemble e = simulate_sde(c.c, c.label, p, sc, nullptr, c.zero);
    const Histogram h = empirical_density(e, sc.horizon, edges);
    const DensityComparison cmp = compare_density(h, model);
    CsvWriter csv(out_path(cfg, "compare.csv"), header("compare", cfg), "bin_lo,bin_hi,empirical,series");
    for (std::size_t k = 0; k < model.size(); ++k) csv.row(edges[k], edges[k + 1], h.probability[k], model[k]);
    json doc = header("compare", cfg);
    doc["b"] = b.id();
    doc["c"] = c.label;
    doc["t"] = sc.horizon;
    doc["tv"] = cmp.tv;
    doc["max_z"] = cmp.max_z;
    doc["ensemble"] = ensemble_json(e, h);
    doc["series_report"] = report_json(r.report);
    write_json(out_path(cfg, "compare.json"), doc);
    std::cout << "tv " << cmp.tv << "  max_z " << cmp.max_z << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat kernels of fractional Laplacians with lower order nonlocal perturbations"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(NLPERT_BUILD_ID));

    std::string config_path;
    int threads = -1;
    bool verbose = false;
    Flags common;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--threads", threads, "worker threads, 0 = all cores");
    app.add_flag("-v,--verbose", verbose, "progress on stderr");
    common.add(&app, "--seed", "sim.seed", "random seed");
    common.add(&app, "--out", "output.dir", "output directory");

    Flags model;
    auto add_model = [&](CLI::App* sub) {
        model.add(sub, "--alpha", "model.alpha", "stability index of the leading part");
        model.add(sub, "--beta", "model.beta", "index of the perturbation");
        model.add(sub, "--d", "model.d", "dimension");
    };
    Flags grid;
    auto add_grid = [&](CLI::App* sub) {
        grid.add(sub, "--L", "grid.L", "half width of the periodic box");
        grid.add(sub, "--N", "grid.N", "space nodes");
        grid.add(sub, "--t-max", "grid.t_max", "time horizon");
        grid.add(sub, "--M", "grid.M", "time steps");
    };
    Flags sim;
    auto add_sim = [&](CLI::App* sub) {
        sim.add(sub, "--c", "sim.c", "jump coefficient: const:v, constant:a or an expression in x");
        sim.add(sub, "--n", "sim.n_paths", "paths");
        sim.add(sub, "--dt", "sim.dt", "Euler step");
        sim.add(sub, "--x0", "sim.x0", "starting point");
        sim.add(sub, "--bins", "sim.bins", "histogram bins");
        sim.add(sub, "--bins-lo", "sim.bins_lo", "left edge of the histogram");
        sim.add(sub, "--bins-hi", "sim.bins_hi", "right edge of the histogram");
    };

    Flags local;
    CLI::App* kernel = app.add_subcommand("kernel", "evaluate p_0, p_a, derivatives or comparison functions");
    add_model(kernel);
    local.add(kernel, "--quantity", "kernel.quantity", "p0, pa, grad, hess, h, g, f0 or f");
    local.add(kernel, "--a", "kernel.a", "weight of the beta-stable part");
    local.add(kernel, "--lambda", "kernel.lambda", "truncation radius for h and f");
    local.add(kernel, "--t", "kernel.t", "times, comma separated");
    local.add(kernel, "--r", "kernel.r", "radii, comma separated");
    local.add(kernel, "--r-max", "kernel.r_max", "largest radius of the default grid");
    local.add(kernel, "--r-points", "kernel.r_points", "radii in the default grid");

    CLI::App* series = app.add_subcommand("series", "sum the Picard series on the periodic grid");
    add_model(series);
    add_grid(series);
    local.add(series, "--b", "model.b", "constant:a, sde:<expr>, truncated:inner,outer,lambda, critical-negative:lambda");
    local.add(series, "--x0", "series.x0", "row written to the field file");
    local.add(series, "--n-max", "series.n_max", "largest term index");
    local.add(series, "--tol", "series.tol", "relative size of the last term");

    CLI::App* check = app.add_subcommand("check", "run the verification suite");
    local.add(check, "--suite", "check.suite", "'default' or a suite file");
    local.add(check, "--only", "check.only", "comma separated check names");
    local.add(check, "--tol", "check.tolerance", "override every check tolerance");
    local.add(check, "--work-dir", "check.work_dir", "scratch directory of the determinism check");

    CLI::App* simulate = app.add_subcommand("simulate", "simulate the SDE driven by alpha- and beta-stable noise");
    add_model(simulate);
    add_sim(simulate);
    local.add(simulate, "--t", "sim.horizon", "final time");
    local.add(simulate, "--tol", "sim.tol", "unused; accepted for uniformity");

    CLI::App* compare = app.add_subcommand("compare", "Monte Carlo histogram against the series kernel");
    add_model(compare);
    add_grid(compare);
    add_sim(compare);
    local.add(compare, "--b", "model.b", "'sde' (b = |c|^beta) or a preset");
    local.add(compare, "--t", "sim.horizon", "comparison time");
    local.add(compare, "--tol", "series.tol", "relative size of the last series term");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    CLI::App* chosen = app.get_subcommands().front();
    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::load(config_path);
        common.apply(cfg);
        model.apply(cfg);
        grid.apply(cfg);
        sim.apply(cfg);
        local.apply(cfg);
        if (threads >= 0) cfg.set("run.threads", std::to_string(threads));
        set_thread_count(cfg.get_int("run.threads", 0));

        const std::string name = chosen->get_name();
        if (name == "kernel") return cmd_kernel(cfg);
        if (name == "series") return cmd_series(cfg);
        if (name == "check") return cmd_check(cfg, verbose);
        if (name == "simulate") return cmd_simulate(cfg);
        if (name == "compare") return cmd_compare(cfg);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "; estimated horizon " << e.horizon_estimate() << '\n';
        return kExitDivergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n\n" << chosen->help();
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitUsage;
}
