#include "nlpert/verification.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <cstdio>
#include <algorithm>
#include <sstream>

#include "nlpert/duhamel_series.hpp"
#include "nlpert/mc_simulator.hpp"
#include "nlpert/nonlocal_operator.hpp"
#include "nlpert/stable_kernels.hpp"

namespace nlpert {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsed(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

SpaceTimeGrid grid_from(const json& o) {
    SpaceTimeGrid g;
    if (o.contains("grid")) {
        const json& j = o.at("grid");
        g.L = j.value("L", g.L);
        g.N = j.value("N", g.N);
        g.t_max = j.value("t_max", g.t_max);
        g.M = j.value("M", g.M);
    }
    g.validate();
    return g;
}

json grid_json(const SpaceTimeGrid& g) { return {{"L", g.L}, {"N", g.N}, {"t_max", g.t_max}, {"M", g.M}}; }

SimConfig sim_from(const json& o) {
    SimConfig c;
    if (o.contains("sim")) {
        const json& j = o.at("sim");
        c.n_paths = j.value("n_paths", c.n_paths);
        c.dt = j.value("dt", c.dt);
        c.seed = j.value("seed", c.seed);
        c.domain_cap = j.value("domain_cap", c.domain_cap);
        c.x0 = j.value("x0", c.x0);
    }
    return c;
}

std::vector<std::string> presets_from(const json& o) {
    if (!o.contains("presets")) throw std::invalid_argument("check needs a 'presets' list");
    return o.at("presets").get<std::vector<std::string>>();
}

SeriesOptions rows_for(const BFunction& b, const SpaceTimeGrid& g, int stride) {
    SeriesOptions so;
    if (!b.translation_invariant() && stride > 1) {
        for (int i = 0; i < g.N; i += stride) so.rows.push_back(i);
    }
    return so;
}

int signed_offset(int i, int j, int n) {
    int off = (j - i) % n;
    if (off < 0) off += n;
    if (off > n / 2) off -= n;
    return off;
}

class Recorder {
public:
    explicit Recorder(Verdict& v) : v_(v) {}
    void le(const std::string& name, double value, double tol, const std::string& oracle) {
        v_.measured.push_back({name, value, tol, "<=", oracle});
    }
    void ge(const std::string& name, double value, double tol, const std::string& oracle) {
        v_.measured.push_back({name, value, tol, ">=", oracle});
    }
    void info(const std::string& name, double value, const std::string& oracle) {
        v_.measured.push_back({name, value, 0.0, "info", oracle});
    }

private:
    Verdict& v_;
};

// --- kernels ---------------------------------------------------------------

void check_cauchy(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const auto start = std::chrono::steady_clock::now();
    const auto times = s.options.value("times", std::vector<double>{0.25, 1.0, 4.0});
    const double x_max = s.options.value("x_max", 8.0);
    const double step = s.options.value("x_step", 0.05);
    if (s.params.alpha != 1.0) throw std::invalid_argument("the Cauchy oracle needs alpha = 1");
    double worst = 0.0;
    for (double t : times) {
        for (double x = -x_max; x <= x_max + 1e-12; x += step) {
            const double exact = t / (std::numbers::pi * (t * t + x * x));
            worst = std::max(worst, std::abs(eval_p0(s.params, t, std::abs(x)) / exact - 1.0));
        }
    }
    rec.le("max_relative_error", worst, s.tolerance, "Cauchy density t/(pi(t^2+x^2))");
    rec.le("runtime_seconds", elapsed(start), s.options.value("runtime_limit", 1.0), "wall clock");
}

// --- series ----------------------------------------------------------------

void check_constant_b(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const auto start = std::chrono::steady_clock::now();
    const SpaceTimeGrid g = grid_from(s.options);
    const auto values = s.options.value("values", std::vector<double>{1.0, 0.5});
    const auto times = s.options.value("times", std::vector<double>{0.125, 0.25, 0.5});
    const double radius = s.options.value("radius", 4.0);
    const double floor = s.options.value("floor", 1e-4);
    for (double a : values) {
        const BFunction b = BFunction::constant(a);
        const SeriesResult r = sum_series(b, s.params, g);
        const ImageCorrection images(b, s.params, g);
        double worst = 0.0;
        for (double t : times) {
            const int slot = r.sum.slot_of_time(t);
            for (int off = 0; off * g.h() <= radius + 1e-12; ++off) {
                const double exact = eval_pa(s.params, a, t, off * g.h());
                if (exact <= floor) continue;
                worst = std::max(worst, std::abs(line_value(r.sum, images, slot, 0, off) / exact - 1.0));
            }
        }
        std::ostringstream name;
        name << "max_relative_error_b=" << a;
        rec.le(name.str(), worst, s.tolerance, "p_a by radial Fourier inversion");
        name.str("");
        name << "terms_used_b=" << a;
        rec.info(name.str(), r.report.terms_used, "series report");
    }
    rec.le("runtime_seconds", elapsed(start), s.options.value("runtime_limit", 600.0), "wall clock");
    v.provenance["grid_hash"] = hex(fnv1a(grid_json(g).dump()));
}

void check_fourier_terms(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    const double a = s.options.value("value", 1.0);
    const auto terms = s.options.value("terms", std::vector<int>{1, 2});
    const auto times = s.options.value("times", std::vector<double>{0.125, 0.25, 0.5});
    const double radius = s.options.value("radius", 4.0);
    const double floor = s.options.value("floor", 1e-4);
    const BFunction b = BFunction::constant(a);
    SeriesOptions so;
    so.keep_terms = terms;
    const SeriesResult r = sum_series(b, s.params, g, so);
    const ImageCorrection images(b, s.params, g);
    for (int n : terms) {
        const KernelField& q = r.terms.at(n);
        double worst = 0.0;
        for (double t : times) {
            const int slot = q.slot_of_time(t);
            const double factor = std::pow(-t * a, n) / std::tgamma(n + 1.0);
            for (int off = 0; off * g.h() <= radius + 1e-12; ++off) {
                const double exact = factor * fourier_moment_1d(s.params.alpha, t, n * s.params.beta, off * g.h());
                if (std::abs(exact) <= floor) continue;
                worst = std::max(worst, std::abs(line_value(q, images, slot, 0, off) - exact) / std::abs(exact));
            }
        }
        rec.le("max_relative_error_term_" + std::to_string(n), worst, s.tolerance,
               "inverse transform of (-t|xi|^beta)^n e^{-t|xi|^alpha}/n!");
    }
}

void check_conservativeness(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    const int terms = s.options.value("terms", 4);
    for (const std::string& preset : presets_from(s.options)) {
        const BFunction b = make_preset(preset, s.params);
        const SeriesResult r = sum_series(b, s.params, g, rows_for(b, g, s.options.value("row_stride", 1)));
        rec.le(preset + ":sum_mass_defect", r.report.mass_defect, s.tolerance, "h sum_y q");
        for (int n = 1; n <= terms; ++n) {
            const double m = n < static_cast<int>(r.report.term_masses.size()) ? r.report.term_masses[static_cast<std::size_t>(n)] : 0.0;
            rec.le(preset + ":term_" + std::to_string(n) + "_mass", m, s.tolerance, "h sum_y q_n");
        }
    }
}

void check_chapman_kolmogorov(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    const auto pairs = s.options.value("pairs", std::vector<std::vector<double>>{{0.125, 0.125}, {0.125, 0.25}});
    for (const std::string& preset : presets_from(s.options)) {
        const BFunction b = make_preset(preset, s.params);
        const SeriesResult r = sum_series(b, s.params, g);
        const double sup = r.sum.sup_abs();
        for (const auto& pr : pairs) {
            if (pr.size() != 2) throw std::invalid_argument("time pairs need two entries");
            std::ostringstream name;
            name << preset << ":(" << pr[0] << "," << pr[1] << ")";
            rec.le(name.str(), chapman_kolmogorov_residual(r.sum, pr[0], pr[1]) / sup, s.tolerance,
                   "spatial product of stored kernels");
        }
    }
}

void check_duhamel(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    for (const std::string& preset : presets_from(s.options)) {
        const BFunction b = make_preset(preset, s.params);
        const SeriesResult r = sum_series(b, s.params, g);
        const double sup = r.sum.sup_abs();
        const ResidualFields res = duhamel_residuals(r.sum, b);
        rec.le(preset + ":forward", res.forward_sup / sup, s.tolerance, "q - p_0 - q * S^b p_0");
        rec.le(preset + ":backward", res.backward_sup / sup, s.tolerance, "q - p_0 - p_0 * S^b q");
    }
}

double windowed_min(const KernelField& q, const ImageCorrection& images, double t_min, double offset_max) {
    const SpaceTimeGrid& g = q.grid();
    double m = kInf;
    for (std::size_t slot = 0; slot < q.slots(); ++slot) {
        if (q.time_of_slot(static_cast<int>(slot)) < t_min - 1e-12) continue;
        for (int i : q.rows()) {
            for (int j = 0; j < g.N; ++j) {
                if (std::abs(signed_offset(i, j, g.N)) * g.h() > offset_max + 1e-12) continue;
                m = std::min(m, line_value(q, images, static_cast<int>(slot), i, j));
            }
        }
    }
    return m;
}

void check_positivity(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    const double threshold = s.tolerance;
    const double t_min = s.options.value("t_min", g.dt());
    const double offset_max = s.options.value("offset_max", g.L / 2.0);
    const int stride = s.options.value("row_stride", 16);
    std::vector<double> xs;
    std::vector<double> zs;
    for (int k = -40; k <= 40; ++k) xs.push_back(0.25 * k);
    for (int k = 1; k <= 400; ++k) zs.push_back(std::pow(10.0, -3.0 + 6.0 * k / 400.0));
    const std::size_t nz = zs.size();
    for (std::size_t k = 0; k < nz; ++k) zs.push_back(-zs[k]);
    for (const std::string& preset : presets_from(s.options)) {
        const BFunction b = make_preset(preset, s.params);
        const PositivityReport cond = check_positivity_condition(b, s.params, xs, zs);
        const SeriesResult r = sum_series(b, s.params, g, rows_for(b, g, stride));
        const ImageCorrection images(b, s.params, g);
        const double m = windowed_min(r.sum, images, t_min, offset_max);
        if (s.expected == Expectation::ExpectedViolation) {
            rec.le(preset + ":min_q", m, -threshold, "summed series, line values");
            rec.le(preset + ":kernel_condition_margin", cond.worst_margin, -1e-12, "positivity condition on samples");
        } else {
            rec.ge(preset + ":min_q", m, -threshold, "summed series, line values");
            rec.ge(preset + ":kernel_condition_margin", cond.worst_margin, -1e-12, "positivity condition on samples");
        }
    }
    v.provenance["grid_hash"] = hex(fnv1a(grid_json(g).dump()));
}

void check_near_diagonal(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    const double t_min = s.options.value("t_min", g.dt());
    const double t_max_used = s.options.value("t_max_used", g.t_max);
    const double bound = s.options.value("bound", 0.5);
    for (const std::string& preset : presets_from(s.options)) {
        const BFunction b = make_preset(preset, s.params);
        if (b.sup_norm() > s.options.value("max_sup_norm", 0.5) + 1e-12) {
            throw std::invalid_argument(preset + ": sup norm above the near-diagonal class");
        }
        const SeriesResult r = sum_series(b, s.params, g, rows_for(b, g, s.options.value("row_stride", 16)));
        const EnvelopeReport env = envelope_report(r.sum, b, 1.0, t_min, t_max_used, 3.0 * std::pow(t_max_used, 1.0 / s.params.alpha));
        rec.ge(preset + ":inf_q_over_p0", env.near_diagonal_inf, bound - s.tolerance, "discretized p_0 on the same grid");
    }
}

void check_scaling(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    const auto lambdas = s.options.value("lambdas", std::vector<double>{0.5, 2.0});
    for (const std::string& preset : presets_from(s.options)) {
        const BFunction b = make_preset(preset, s.params);
        for (double lam : lambdas) {
            std::ostringstream name;
            name << preset << ":lambda=" << lam;
            rec.le(name.str(), scaling_equivalence_check(b, s.params, lam, g, rows_for(b, g, s.options.value("row_stride", 32))),
                   s.tolerance, "series for the rescaled coefficient on the rescaled grid");
        }
    }
}

void check_finite_range(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const SpaceTimeGrid g = grid_from(s.options);
    const std::string preset = s.options.value("preset", std::string("truncated:0.5,0,1"));
    const double M = s.options.value("M", 2.0);
    const double t_min = s.options.value("t_min", g.dt());
    const double radius = s.options.value("radius", 4.0);
    const BFunction b = make_preset(preset, s.params);
    std::vector<double> xs{0.0};
    std::vector<double> zs;
    for (int k = 1; k <= 400; ++k) zs.push_back(std::pow(10.0, -3.0 + 6.0 * k / 400.0));
    const bool condition = check_lower_kernel_condition(b, s.params, M, xs, zs);
    rec.ge("lower_kernel_condition_holds", condition ? 1.0 : 0.0, 1.0, "two-sided bound on j^b with M");
    double support = 0.0;
    for (double r : b.radial_breakpoints()) support = std::max(support, r);
    rec.ge("b_vanishes_beyond_support", std::abs(b.eval1(0.0, support + 1.0)) < 1e-15 ? 1.0 : 0.0, 1.0, "coefficient");
    const SeriesResult r = sum_series(b, s.params, g);
    const EnvelopeReport env = envelope_report(r.sum, b, 1.0, t_min, g.t_max, radius);
    rec.ge("inf_q_over_p0", env.inf_ratio_p0, 1e-12, "discretized p_0");
    rec.le("sup_q_over_p0", env.sup_ratio_p0, 1e12, "discretized p_0");
    rec.le("sup_over_inf", env.sup_ratio_p0 / env.inf_ratio_p0, s.tolerance, "two-sided comparability");
}

// --- Monte Carlo -----------------------------------------------------------

std::vector<double> edges_from(const json& o) {
    const json b = o.value("bins", json{{"lo", -8.0}, {"hi", 8.0}, {"n", 80}});
    return uniform_edges(b.value("lo", -8.0), b.value("hi", 8.0), b.value("n", 80));
}

std::vector<double> series_bins(const std::string& preset, const ModelParams& params, const SpaceTimeGrid& g, double t,
                                double x0, const std::vector<double>& edges) {
    const BFunction b = make_preset(preset, params);
    const int row = g.node_index(x0);
    if (std::abs(g.x(row) - x0) > 1e-12) throw std::invalid_argument("starting point must be a grid node");
    SeriesOptions so;
    so.rows = {row};
    so.keep_all_times = false;
    so.record_times = {t};
    const SeriesResult r = sum_series(b, params, g, so);
    const ImageCorrection images(b, params, g);
    return row_bin_integrals(r.sum, &images, r.sum.slot_of_time(t), row, edges);
}

json histogram_json(const Histogram& h) {
    return {{"edges", h.edges}, {"probability", h.probability}, {"outside", h.outside}, {"n", h.n}};
}

json mc_density_outputs(const CheckSpec& s) {
    json out = json::array();
    const std::vector<double> edges = edges_from(s.options);
    for (const json& c : s.options.at("cases")) {
        SimConfig cfg = sim_from(s.options);
        const double t = c.at("t").get<double>();
        cfg.horizon = t;
        cfg.record_times = {t};
        if (c.contains("seed")) cfg.seed = c.at("seed").get<std::uint64_t>();
        const SdeCoefficient coef = sde_coefficient(c.at("c").get<std::string>(), s.params);
        const PathEnsemble ens = simulate_sde(coef.c, coef.label, s.params, cfg, nullptr, coef.zero);
        const Histogram h = empirical_density(ens, t, edges);
        std::vector<double> model;
        const std::string kernel = c.at("kernel").get<std::string>();
        if (kernel == "pa") {
            const double a = c.value("a", 0.0);
            model = bin_probabilities([&](double x) { return eval_pa(s.params, a, t, std::abs(x - cfg.x0)); }, edges);
        } else if (kernel == "series") {
            SpaceTimeGrid g = grid_from(c);
            model = series_bins(c.at("b").get<std::string>(), s.params, g, t, cfg.x0, edges);
        } else {
            throw std::invalid_argument("unknown kernel '" + kernel + "'");
        }
        const DensityComparison cmp = compare_density(h, model);
        out.push_back({{"c", c.at("c")}, {"kernel", kernel}, {"t", t}, {"seed", cfg.seed}, {"n_paths", cfg.n_paths},
                       {"histogram", histogram_json(h)}, {"model_probability", model}, {"tv", cmp.tv},
                       {"max_z", cmp.max_z}, {"tv_limit", c.at("tv")}});
    }
    return out;
}

void check_mc_density(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const auto start = std::chrono::steady_clock::now();
    const json out = mc_density_outputs(s);
    for (const json& c : out) {
        const std::string label = c.at("c").get<std::string>() + "@t=" + c.at("t").dump();
        rec.le(label + ":tv", c.at("tv").get<double>(), c.at("tv_limit").get<double>(), c.at("kernel").get<std::string>());
        rec.info(label + ":max_z", c.at("max_z").get<double>(), "binwise z-score");
        v.provenance["seeds"].push_back(c.at("seed"));
    }
    rec.le("runtime_seconds", elapsed(start), s.options.value("runtime_limit", 600.0), "wall clock");
}

json levy_outputs(const CheckSpec& s) {
    SimConfig cfg = sim_from(s.options);
    cfg.horizon = s.options.value("horizon", 1.0);
    const auto from = s.options.at("from").get<std::vector<double>>();
    const auto to = s.options.at("to").get<std::vector<double>>();
    cfg.levy = {{{from.at(0), from.at(1)}, {to.at(0), to.at(1)}}};
    const SdeCoefficient coef = sde_coefficient(s.options.value("c", std::string("const:1")), s.params);
    const PathEnsemble ens = simulate_sde(coef.c, coef.label, s.params, cfg, nullptr, coef.zero);
    const ZScore z = levy_system_check(ens, 0);
    return {{"c", coef.label}, {"seed", cfg.seed}, {"n_paths", cfg.n_paths}, {"horizon", cfg.horizon},
            {"from", from}, {"to", to}, {"empirical", z.empirical}, {"predicted", z.predicted}, {"z", z.z},
            {"standard_error", z.standard_error}};
}

void check_levy(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const json out = levy_outputs(s);
    rec.le("abs_z", std::abs(out.at("z").get<double>()), s.tolerance, "compensator along paths");
    rec.info("mean_jumps", out.at("empirical").get<double>(), "path counts");
    rec.info("mean_predicted", out.at("predicted").get<double>(), "int 1_A(X) int_B J^b dy ds");
    v.provenance["seeds"] = {out.at("seed")};
}

json meyer_outputs(const CheckSpec& s) {
    const std::string b_id = s.options.value("b", std::string("constant:0"));
    const std::string b_hat_id = s.options.value("b_hat", std::string("truncated:0,1,1"));
    const double lambda = s.options.value("lambda", 1.0);
    const double t = s.options.value("t", 0.25);
    SimConfig cfg = sim_from(s.options);
    cfg.horizon = t;
    cfg.record_times = {t};
    const BFunction b = make_preset(b_id, s.params);
    const BFunction b_hat = make_preset(b_hat_id, s.params);
    const SdeCoefficient coef = sde_coefficient(b_id, s.params);
    const MeyerAugmentation aug = MeyerAugmentation::from_coefficients(b, b_hat, s.params, lambda);
    const PathEnsemble ens = meyer_augment(coef.c, coef.label, s.params, cfg, aug, coef.zero);
    const std::vector<double> edges = edges_from(s.options);
    const Histogram h = empirical_density(ens, t, edges);
    const std::vector<double> model = series_bins(b_hat_id, s.params, grid_from(s.options), t, cfg.x0, edges);
    const DensityComparison cmp = compare_density(h, model);
    const ZScore count = meyer_count_check(ens);

    // b_hat = b: the augmentation must be the identity in law
    const MeyerAugmentation same = MeyerAugmentation::from_coefficients(b, b, s.params, lambda);
    SimConfig other = cfg;
    other.seed = s.options.value("identity_seed", cfg.seed + 1);
    const PathEnsemble base = simulate_sde(coef.c, coef.label, s.params, cfg, nullptr, coef.zero);
    const PathEnsemble augmented = meyer_augment(coef.c, coef.label, s.params, other, same, coef.zero);
    const TwoSample ks = ks_two_sample(base.positions_at(t), augmented.positions_at(t));
    return {{"b", b_id}, {"b_hat", b_hat_id}, {"lambda", lambda}, {"t", t}, {"seed", cfg.seed},
            {"identity_seed", other.seed}, {"intensity", aug.intensity()}, {"histogram", histogram_json(h)},
            {"model_probability", model}, {"tv", cmp.tv}, {"max_z", cmp.max_z}, {"meyer_jumps", count.empirical},
            {"meyer_compensator", count.predicted}, {"meyer_count_z", count.z}, {"identity_meyer_jumps", augmented.meyer_counts.empty() ? 0.0 : std::accumulate(augmented.meyer_counts.begin(), augmented.meyer_counts.end(), 0.0)},
            {"identity_ks_statistic", ks.statistic}, {"identity_ks_p", ks.p_value}};
}

void check_meyer(const CheckSpec& s, Verdict& v) {
    Recorder rec(v);
    const json out = meyer_outputs(s);
    rec.le("tv_vs_series_for_b_hat", out.at("tv").get<double>(), s.tolerance, "series kernel of b_hat");
    rec.le("abs_count_z", std::abs(out.at("meyer_count_z").get<double>()), s.options.value("z_limit", 3.0),
           "E int J(X_s) ds");
    rec.ge("identity_ks_p_value", out.at("identity_ks_p").get<double>(), s.options.value("ks_level", 0.05),
           "two-sample Kolmogorov-Smirnov");
    rec.le("identity_added_jumps", out.at("identity_meyer_jumps").get<double>(), 0.0, "clock never rings");
    v.provenance["seeds"] = {out.at("seed"), out.at("identity_seed")};
}

json mc_outputs(const CheckSpec& s) {
    if (s.kind == "mc_density") return mc_density_outputs(s);
    if (s.kind == "levy_system") return levy_outputs(s);
    if (s.kind == "meyer") return meyer_outputs(s);
    throw std::invalid_argument("check '" + s.name + "' has no Monte Carlo outputs");
}

void check_determinism(const CheckSpec& s, Verdict& v, const std::vector<CheckSpec>* suite, const SuiteOptions& opts) {
    Recorder rec(v);
    if (!suite) throw std::invalid_argument("the determinism check needs the surrounding suite");
    namespace fs = std::filesystem;
    fs::path dir = opts.work_dir.empty() ? fs::temp_directory_path() / "nlpert-determinism" : fs::path(opts.work_dir);
    fs::create_directories(dir / "run1");
    fs::create_directories(dir / "run2");
    for (const std::string& name : s.options.at("repeat").get<std::vector<std::string>>()) {
        const auto it = std::find_if(suite->begin(), suite->end(), [&](const CheckSpec& c) { return c.name == name; });
        if (it == suite->end()) throw std::invalid_argument("determinism: no check named '" + name + "'");
        std::vector<std::string> contents;
        for (const char* run : {"run1", "run2"}) {
            const fs::path file = dir / run / (name + ".json");
            {
                std::ofstream f(file);
                f << mc_outputs(*it).dump(2) << '\n';
            }
            std::ifstream f(file);
            std::stringstream ss;
            ss << f.rdbuf();
            contents.push_back(ss.str());
        }
        rec.ge(name + ":identical_outputs", contents[0] == contents[1] ? 1.0 : 0.0, 1.0, "byte comparison of output files");
        v.provenance["files"].push_back((dir / "run1" / (name + ".json")).string());
    }
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Status s) {
    switch (s) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        case Status::Skip: return "skip";
    }
    return "?";
}

bool Measurement::ok() const {
    if (relation == "info") return true;
    if (!std::isfinite(value)) return false;
    return relation == "<=" ? value <= tolerance : value >= tolerance;
}

void CheckSpec::validate() const {
    if (name.empty()) throw std::invalid_argument("check without a name");
    if (kind.empty()) throw std::invalid_argument("check '" + name + "' has no kind");
    params.validate();
    if (expected == Expectation::ExpectedViolation && kind != "positivity") {
        throw std::invalid_argument("check '" + name + "': expected-violation is reserved for positivity checks");
    }
    if (!options.is_object()) throw std::invalid_argument("check '" + name + "': options must be an object");
}

std::vector<CheckSpec> parse_suite(const json& doc) {
    const json& checks = doc.is_array() ? doc : doc.at("checks");
    std::vector<CheckSpec> out;
    for (const json& c : checks) {
        CheckSpec s;
        s.name = c.at("name").get<std::string>();
        s.criterion = c.value("criterion", 0);
        s.kind = c.at("kind").get<std::string>();
        if (c.contains("params")) {
            const json& p = c.at("params");
            s.params.d = p.value("d", s.params.d);
            s.params.alpha = p.value("alpha", s.params.alpha);
            s.params.beta = p.value("beta", s.params.beta);
        }
        s.tolerance = c.value("tolerance", s.tolerance);
        const std::string expected = c.value("expected", std::string("pass"));
        if (expected == "pass") s.expected = Expectation::Pass;
        else if (expected == "expected-violation") s.expected = Expectation::ExpectedViolation;
        else throw std::invalid_argument("unknown expectation '" + expected + "'");
        s.options = c.value("options", json::object());
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<CheckSpec> load_suite(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open suite file " + path);
    return parse_suite(json::parse(f));
}

std::string default_suite_path() { return std::string(NLPERT_SOURCE_DIR) + "/suites/default.json"; }

namespace {
Verdict run_check_in(const CheckSpec& spec, const SuiteOptions& options, const std::vector<CheckSpec>* suite) {
    Verdict v;
    v.name = spec.name;
    v.criterion = spec.criterion;
    v.provenance["kind"] = spec.kind;
    v.provenance["options_hash"] = hex(fnv1a(spec.options.dump()));
    const auto start = std::chrono::steady_clock::now();
    try {
        spec.validate();
        if (!(spec.tolerance > 0.0)) {
            v.status = Status::Fail;
            v.message = "tolerance unattainable: numerical error is never exactly zero";
            return v;
        }
        const std::string& k = spec.kind;
        if (k == "cauchy_closed_form") check_cauchy(spec, v);
        else if (k == "constant_b_identity") check_constant_b(spec, v);
        else if (k == "fourier_terms") check_fourier_terms(spec, v);
        else if (k == "conservativeness") check_conservativeness(spec, v);
        else if (k == "chapman_kolmogorov") check_chapman_kolmogorov(spec, v);
        else if (k == "duhamel_residuals") check_duhamel(spec, v);
        else if (k == "positivity") check_positivity(spec, v);
        else if (k == "near_diagonal") check_near_diagonal(spec, v);
        else if (k == "scaling") check_scaling(spec, v);
        else if (k == "finite_range") check_finite_range(spec, v);
        else if (k == "mc_density") check_mc_density(spec, v);
        else if (k == "levy_system") check_levy(spec, v);
        else if (k == "meyer") check_meyer(spec, v);
        else if (k == "determinism") check_determinism(spec, v, suite, options);
        else throw std::invalid_argument("unknown check kind '" + k + "'");
        bool ok = !v.measured.empty();
        for (const Measurement& m : v.measured) ok = ok && m.ok();
        v.status = ok ? Status::Pass : Status::Fail;
        if (!ok && v.message.empty()) {
            for (const Measurement& m : v.measured) {
                if (!m.ok()) {
                    std::ostringstream os;
                    os << m.name << " = " << m.value << " (needs " << m.relation << ' ' << m.tolerance << ")";
                    v.message = os.str();
                    break;
                }
            }
        }
    } catch (const std::exception& e) {
        v.status = Status::Fail;
        v.message = std::string("error: ") + e.what();
    }
    v.seconds = elapsed(start);
    return v;
}
}  // namespace

Verdict run_check(const CheckSpec& spec, const SuiteOptions& options) { return run_check_in(spec, options, nullptr); }

std::vector<Verdict> run_suite(const std::vector<CheckSpec>& specs, const SuiteOptions& options) {
    std::vector<Verdict> out;
    for (const std::string& name : options.only) {
        if (std::none_of(specs.begin(), specs.end(), [&](const CheckSpec& s) { return s.name == name; })) {
            throw std::invalid_argument("no check named '" + name + "' in the suite");
        }
    }
    for (const CheckSpec& s : specs) {
        if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), s.name) == options.only.end()) {
            continue;
        }
        out.push_back(run_check_in(s, options, &specs));
        if (options.verbose) {
            const Verdict& v = out.back();
            std::fprintf(stderr, "[%s] %s (%.1fs)%s%s\n", to_string(v.status), v.name.c_str(), v.seconds,
                         v.message.empty() ? "" : ": ", v.message.c_str());
        }
    }
    return out;
}

bool suite_passed(const std::vector<Verdict>& verdicts) {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.status != Status::Fail; });
}

json to_json(const Verdict& v, bool with_timing) {
    json m = json::array();
    for (const Measurement& x : v.measured) {
        if (!with_timing && x.name.rfind("runtime", 0) == 0) continue;
        m.push_back({{"name", x.name}, {"value", std::isfinite(x.value) ? json(x.value) : json(std::to_string(x.value))},
                     {"tolerance", x.tolerance}, {"relation", x.relation}, {"oracle", x.oracle}, {"ok", x.ok()}});
    }
    json j = {{"name", v.name}, {"criterion", v.criterion}, {"status", to_string(v.status)}, {"message", v.message},
              {"measured", m}, {"provenance", v.provenance}};
    if (with_timing) j["seconds"] = v.seconds;
    return j;
}

json to_json(const std::vector<Verdict>& verdicts, bool with_timing) {
    json a = json::array();
    for (const Verdict& v : verdicts) a.push_back(to_json(v, with_timing));
    return a;
}

std::string summary_table(const std::vector<Verdict>& verdicts) {
    std::ostringstream os;
    os << std::left << std::setw(4) << "id" << std::setw(34) << "check" << std::setw(7) << "status" << std::setw(10)
       << "seconds" << "detail\n";
    for (const Verdict& v : verdicts) {
        os << std::left << std::setw(4) << v.criterion << std::setw(34) << v.name << std::setw(7) << to_string(v.status)
           << std::setw(10) << std::fixed << std::setprecision(1) << v.seconds << v.message << '\n';
    }
    return os.str();
}

}  // namespace nlpert
