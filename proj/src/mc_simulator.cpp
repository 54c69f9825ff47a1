#include "nlpert/mc_simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "nlpert/expression.hpp"
#include "nlpert/parallel.hpp"
#include "nlpert/quadrature.hpp"

namespace nlpert {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform_open(Rng& rng) {
    // (0, 1): 53 random bits shifted off zero
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double exponential(Rng& rng) { return -std::log(uniform_open(rng)); }

double standard_symmetric_stable(double alpha, Rng& rng) {
    const double v = kPi * (uniform_open(rng) - 0.5);
    if (alpha == 1.0) return std::tan(v);
    const double w = exponential(rng);
    return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
}

int grid_index(double t, double dt, const char* what) {
    const double pos = t / dt;
    const long k = std::lround(pos);
    if (k < 0 || std::abs(pos - static_cast<double>(k)) > 1e-9 * std::max(1.0, pos)) {
        std::ostringstream os;
        os << what << " " << t << " is not a multiple of dt = " << dt;
        throw std::invalid_argument(os.str());
    }
    return static_cast<int>(k);
}

ZScore paired_z(const std::vector<double>& counts, const std::vector<double>& predicted) {
    const std::size_t n = counts.size();
    ZScore z;
    double mean_diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z.empirical += counts[i];
        z.predicted += predicted[i];
        mean_diff += counts[i] - predicted[i];
    }
    z.empirical /= static_cast<double>(n);
    z.predicted /= static_cast<double>(n);
    mean_diff /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = counts[i] - predicted[i] - mean_diff;
        var += d * d;
    }
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    z.standard_error = std::sqrt(var / static_cast<double>(n));
    z.z = z.standard_error > 0.0 ? mean_diff / z.standard_error : 0.0;
    return z;
}

}  // namespace

Rng path_rng(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

double sample_stable(double alpha, double t_scale, Rng& rng) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("sample_stable: alpha outside (0, 2]");
    if (!(t_scale > 0.0)) throw std::invalid_argument("sample_stable: t must be positive");
    return std::pow(t_scale, 1.0 / alpha) * standard_symmetric_stable(alpha, rng);
}

double sample_positive_stable(double a, double t_scale, Rng& rng) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("sample_positive_stable: index outside (0, 1)");
    const double u = kPi * uniform_open(rng);
    const double e = exponential(rng);
    const double s = std::sin(a * u) / std::pow(std::sin(u), 1.0 / a) * std::pow(std::sin((1.0 - a) * u) / e, (1.0 - a) / a);
    return std::pow(t_scale, 1.0 / a) * s;
}

std::vector<double> sample_stable_isotropic(double alpha, double t_scale, int d, Rng& rng) {
    if (d < 1) throw std::invalid_argument("sample_stable_isotropic: d must be >= 1");
    if (d == 1) return {sample_stable(alpha, t_scale, rng)};
    // E exp(i xi.Y) = E exp(-S |xi|^2) with Y = sqrt(2 S) N(0, I)
    const double s = sample_positive_stable(alpha / 2.0, t_scale, rng);
    std::normal_distribution<double> normal;
    std::vector<double> y(static_cast<std::size_t>(d));
    for (double& v : y) v = std::sqrt(2.0 * s) * normal(rng);
    return y;
}

void SimConfig::validate() const {
    if (n_paths < 1) throw std::invalid_argument("simulation needs at least one path");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(horizon > 0.0) || dt > horizon) throw std::invalid_argument("horizon must be positive and >= dt");
    if (!(domain_cap > 0.0)) throw std::invalid_argument("domain cap must be positive");
    for (double t : record_times) {
        if (!(t > 0.0) || t > horizon * (1.0 + 1e-12)) throw std::invalid_argument("record time outside (0, horizon]");
    }
    for (double r : exit_radii) {
        if (!(r > 0.0)) throw std::invalid_argument("exit radius must be positive");
    }
    for (const LevyRegions& lr : levy) {
        if (!(lr.from.hi > lr.from.lo) || !(lr.to.hi > lr.to.lo)) throw std::invalid_argument("empty Levy region");
        if (!(lr.from.hi < lr.to.lo || lr.to.hi < lr.from.lo)) throw std::invalid_argument("Levy regions must be disjoint");
    }
}

const char* to_string(JumpTag tag) {
    switch (tag) {
        case JumpTag::Alpha: return "alpha";
        case JumpTag::Beta: return "beta";
        case JumpTag::Meyer: return "meyer";
    }
    return "?";
}

// ---------------------------------------------------------------------------

MeyerAugmentation::MeyerAugmentation(RadialProfile added, const ModelParams& params, double lambda)
    : added_(std::move(added)), beta_(params.beta), lambda_(lambda) {
    params.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("Meyer augmentation: lambda must be positive");
    std::vector<double> cuts{lambda};
    for (double r : added_.breakpoints()) {
        if (r > lambda) cuts.push_back(r);
    }
    cuts.push_back(kInf);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        Segment s{cuts[i], cuts[i + 1], {}, 0.0};
        for (const PowerPiece& p : added_.pieces()) {
            if (p.inner <= s.lo && p.outer >= s.hi) s.pieces.push_back(p);
        }
        s.mass = segment_cdf(s, s.hi);
        if (s.mass < 0.0) throw std::invalid_argument("Meyer augmentation: negative intensity");
        if (s.mass == 0.0) continue;
        total += s.mass;
        segments_.push_back(std::move(s));
        cumulative_.push_back(total);
    }
    intensity_ = 2.0 * normalizing_constant(1, params.beta) * total;
}

double MeyerAugmentation::segment_cdf(const Segment& s, double r) const {
    double v = 0.0;
    for (const PowerPiece& p : s.pieces) {
        const double e = p.exponent - beta_;  // antiderivative of r^{e-1}
        const double hi = std::isinf(r) ? 0.0 : std::pow(r, e);
        v += p.coeff * (hi - std::pow(s.lo, e)) / e;
    }
    return v;
}

MeyerAugmentation MeyerAugmentation::from_coefficients(const BFunction& b, const BFunction& b_hat,
                                                       const ModelParams& params, double lambda) {
    if (b.id() == b_hat.id()) return MeyerAugmentation(RadialProfile(), params, lambda);
    if (!b.is_separable() || !b_hat.is_separable() || !b.translation_invariant() || !b_hat.translation_invariant()) {
        throw std::invalid_argument("Meyer augmentation needs x-independent coefficients");
    }
    std::vector<PowerPiece> pieces;
    for (const SeparableTerm& t : b_hat.terms()) {
        for (PowerPiece p : t.profile.pieces()) {
            p.coeff *= t.u_value;
            pieces.push_back(p);
        }
    }
    for (const SeparableTerm& t : b.terms()) {
        for (PowerPiece p : t.profile.pieces()) {
            p.coeff *= -t.u_value;
            pieces.push_back(p);
        }
    }
    RadialProfile diff(pieces);
    std::vector<double> probes;
    for (int k = 0; k <= 400; ++k) probes.push_back(lambda * std::pow(10.0, -6.0 + 12.0 * k / 400.0));
    for (double r : diff.breakpoints()) {
        probes.push_back(r * (1.0 - 1e-9));
        probes.push_back(r * (1.0 + 1e-9));
    }
    for (double r : probes) {
        const double g = diff(r);
        if (r < lambda && std::abs(g) > 1e-12) {
            throw std::invalid_argument("Meyer augmentation: b_hat - b must vanish on |z| <= lambda");
        }
        if (g < -1e-12) throw std::invalid_argument("Meyer augmentation: b_hat < b somewhere (negative intensity)");
    }
    return MeyerAugmentation(std::move(diff), params, lambda);
}

double MeyerAugmentation::sample_radius(Rng& rng) const {
    if (segments_.empty()) throw std::logic_error("sample_radius on an empty augmentation");
    const double u = uniform_open(rng) * cumulative_.back();
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
                                                   cumulative_.begin());
    const Segment& s = segments_[std::min(k, segments_.size() - 1)];
    const double target = u - (k == 0 ? 0.0 : cumulative_[k - 1]);
    if (s.pieces.size() == 1) {
        // single power: closed-form inverse
        const PowerPiece& p = s.pieces.front();
        const double e = p.exponent - beta_;
        const double v = std::pow(s.lo, e) + target * e / p.coeff;
        const double r = std::pow(v, 1.0 / e);
        if (std::isfinite(r)) return std::clamp(r, s.lo, s.hi);
    }
    double lo = s.lo;
    double hi = std::isinf(s.hi) ? 2.0 * s.lo : s.hi;
    while (std::isinf(s.hi) && segment_cdf(s, hi) < target) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = std::sqrt(lo * hi);
        (segment_cdf(s, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

SdeCoefficient sde_coefficient(const std::string& spec, const ModelParams& params) {
    const auto constant = [](double v, std::string label) {
        return SdeCoefficient{[v](double) { return v; }, std::move(label), v == 0.0};
    };
    const auto number = [&](const std::string& text) {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("bad number in coefficient '" + spec + "'");
        return v;
    };
    if (spec.rfind("const:", 0) == 0) return constant(number(spec.substr(6)), spec.substr(6));
    if (spec.rfind("constant:", 0) == 0) {
        const double a = number(spec.substr(9));
        if (a < 0.0) throw std::invalid_argument("a negative constant b has no SDE representation");
        return constant(std::pow(a, 1.0 / params.beta), "(" + spec.substr(9) + ")^(1/beta)");
    }
    const std::string text = spec.rfind("sde:", 0) == 0 ? spec.substr(4) : spec;
    auto expr = std::make_shared<Expression>(Expression::parse(text));
    return SdeCoefficient{[expr](double x) { return (*expr)(x); }, text, false};
}

double jump_rate_into(const ModelParams& params, double c_value, double x, const Interval& to) {
    double a;
    double b;
    if (x < to.lo) {
        a = to.lo - x;
        b = to.hi - x;
    } else if (x > to.hi) {
        a = x - to.hi;
        b = x - to.lo;
    } else {
        throw std::invalid_argument("jump_rate_into: x must lie outside the target region");
    }
    const auto power_integral = [&](double g) { return (std::pow(a, -g) - std::pow(b, -g)) / g; };
    double rate = normalizing_constant(1, params.alpha) * power_integral(params.alpha);
    if (c_value != 0.0) {
        rate += normalizing_constant(1, params.beta) * std::pow(std::abs(c_value), params.beta) * power_integral(params.beta);
    }
    return rate;
}

const std::vector<double>& PathEnsemble::positions_at(double t) const {
    for (std::size_t k = 0; k < config.record_times.size(); ++k) {
        if (std::abs(config.record_times[k] - t) <= 1e-12 * std::max(1.0, t)) return positions[k];
    }
    throw std::invalid_argument("time was not recorded in this ensemble");
}

PathEnsemble simulate_sde(const std::function<double(double)>& c, const std::string& c_label, const ModelParams& params,
                          const SimConfig& config, const MeyerAugmentation* augmentation, bool c_is_zero) {
    params.validate();
    config.validate();
    if (params.d != 1) throw std::invalid_argument("simulate_sde works in dimension 1");
    const int steps = static_cast<int>(std::ceil(config.horizon / config.dt - 1e-9));
    std::vector<int> record_steps;
    for (double t : config.record_times) record_steps.push_back(grid_index(t, config.dt, "record time"));

    PathEnsemble ens;
    ens.config = config;
    ens.params = params;
    ens.model_id = "sde:" + c_label;
    if (augmentation && !augmentation->empty()) ens.model_id += "+meyer";
    const std::size_t n = config.n_paths;
    ens.positions.assign(config.record_times.size(), std::vector<double>(n, 0.0));
    ens.flagged.assign(n, 0);
    ens.exit_times.assign(config.exit_radii.size(), std::vector<double>(n, kInf));
    ens.levy_counts.assign(config.levy.size(), std::vector<double>(n, 0.0));
    ens.levy_predicted.assign(config.levy.size(), std::vector<double>(n, 0.0));
    ens.meyer_counts.assign(n, 0.0);
    ens.meyer_compensator.assign(n, 0.0);
    if (config.keep_paths) ens.paths.resize(n);

    const double scale_alpha = std::pow(config.dt, 1.0 / params.alpha);
    const double scale_beta = std::pow(config.dt, 1.0 / params.beta);
    const double threshold = config.jump_factor * scale_alpha;
    const double rate = augmentation ? augmentation->intensity() : 0.0;
    std::atomic<std::uint64_t> alpha_jumps{0};
    std::atomic<std::uint64_t> beta_jumps{0};

    parallel_for(n, [&](int, std::size_t p) {
        Rng rng = path_rng(config.seed, p);
        double x = config.x0;
        PathRecord* rec = config.keep_paths ? &ens.paths[p] : nullptr;
        if (rec) {
            rec->times.push_back(0.0);
            rec->positions.push_back(x);
        }
        double next_clock = rate > 0.0 ? exponential(rng) / rate : kInf;
        std::uint64_t na = 0;
        std::uint64_t nb = 0;
        for (int k = 0; k < steps; ++k) {
            const double t0 = k * config.dt;
            const double h = std::min(config.dt, config.horizon - t0);
            const double t1 = t0 + h;
            const double sa = h == config.dt ? scale_alpha : std::pow(h, 1.0 / params.alpha);
            const double dy = sa * standard_symmetric_stable(params.alpha, rng);
            double cv = 0.0;
            double dz = 0.0;
            if (!c_is_zero) {
                cv = c(x);
                const double sb = h == config.dt ? scale_beta : std::pow(h, 1.0 / params.beta);
                dz = cv * sb * standard_symmetric_stable(params.beta, rng);
            }
            for (std::size_t r = 0; r < config.levy.size(); ++r) {
                if (config.levy[r].from.contains(x)) ens.levy_predicted[r][p] += h * jump_rate_into(params, cv, x, config.levy[r].to);
            }
            double xn = x + dy + dz;
            if (std::abs(dy) > threshold) {
                ++na;
                if (rec) rec->jumps.push_back({t1, x, x + dy, JumpTag::Alpha});
            }
            if (std::abs(dz) > threshold) {
                ++nb;
                if (rec) rec->jumps.push_back({t1, x + dy, x + dy + dz, JumpTag::Beta});
            }
            for (std::size_t r = 0; r < config.levy.size(); ++r) {
                if (config.levy[r].from.contains(x) && config.levy[r].to.contains(xn)) ens.levy_counts[r][p] += 1.0;
            }
            while (next_clock <= t1) {
                const double radius = augmentation->sample_radius(rng);
                const double jump = uniform_open(rng) < 0.5 ? -radius : radius;
                if (rec) rec->jumps.push_back({next_clock, xn, xn + jump, JumpTag::Meyer});
                xn += jump;
                ens.meyer_counts[p] += 1.0;
                next_clock += exponential(rng) / rate;
            }
            ens.meyer_compensator[p] += h * rate;
            for (std::size_t r = 0; r < config.exit_radii.size(); ++r) {
                if (std::isinf(ens.exit_times[r][p]) && std::abs(xn - config.x0) >= config.exit_radii[r]) {
                    ens.exit_times[r][p] = t1;
                }
            }
            if (std::abs(xn) > config.domain_cap) ens.flagged[p] = 1;
            x = xn;
            for (std::size_t r = 0; r < record_steps.size(); ++r) {
                if (record_steps[r] == k + 1) ens.positions[r][p] = x;
            }
            if (rec) {
                rec->times.push_back(t1);
                rec->positions.push_back(x);
            }
        }
        alpha_jumps += na;
        beta_jumps += nb;
    });
    ens.alpha_jumps = alpha_jumps.load();
    ens.beta_jumps = beta_jumps.load();
    return ens;
}

PathEnsemble meyer_augment(const std::function<double(double)>& c, const std::string& c_label,
                           const ModelParams& params, const SimConfig& config, const MeyerAugmentation& augmentation,
                           bool c_is_zero) {
    return simulate_sde(c, c_label, params, config, &augmentation, c_is_zero);
}

ZScore levy_system_check(const PathEnsemble& ensemble, std::size_t region) {
    if (region >= ensemble.levy_counts.size()) throw std::out_of_range("no such Levy region pair");
    ZScore z = paired_z(ensemble.levy_counts[region], ensemble.levy_predicted[region]);
    if (z.predicted * static_cast<double>(ensemble.size()) < 10.0) {
        throw std::runtime_error("Levy system check: fewer than 10 expected jumps; widen the regions or raise the horizon");
    }
    return z;
}

ZScore meyer_count_check(const PathEnsemble& ensemble) {
    return paired_z(ensemble.meyer_counts, ensemble.meyer_compensator);
}

ExitEstimate exit_probability(const PathEnsemble& ensemble, std::size_t radius_index, double t) {
    if (radius_index >= ensemble.exit_times.size()) throw std::out_of_range("no such exit radius");
    const std::vector<double>& tau = ensemble.exit_times[radius_index];
    const double r = ensemble.config.exit_radii[radius_index];
    ExitEstimate e;
    std::size_t hits = 0;
    for (double v : tau) hits += v <= t ? 1 : 0;
    e.probability = static_cast<double>(hits) / static_cast<double>(tau.size());
    std::vector<double> sorted = tau;
    const std::size_t k = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    const double median = std::isinf(sorted[k]) ? ensemble.config.horizon : sorted[k];
    e.kappa_hat = median / std::pow(r, ensemble.params.alpha);
    if (ensemble.config.dt > 0.01 * median) {
        e.discretization_warning = true;
        std::ostringstream os;
        os << "exit probability: dt = " << ensemble.config.dt << " exceeds 1% of the median exit time " << median;
        log_warning(os.str());
    }
    return e;
}

std::vector<double> uniform_edges(double lo, double hi, int bins) {
    if (bins < 1 || !(hi > lo)) throw std::invalid_argument("uniform_edges: need hi > lo and bins >= 1");
    std::vector<double> e(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) e[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / bins;
    return e;
}

Histogram histogram(const std::vector<double>& samples, const std::vector<double>& edges,
                    const std::vector<std::uint8_t>* flagged) {
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) throw std::invalid_argument("bad bin edges");
    Histogram h;
    h.edges = edges;
    h.n = samples.size();
    const std::size_t bins = edges.size() - 1;
    std::vector<std::size_t> counts(bins, 0);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double v = samples[i];
        if ((flagged && (*flagged)[i]) || v < edges.front() || v >= edges.back()) {
            ++outside;
            continue;
        }
        const auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin()) - 1;
        ++counts[k];
    }
    const double n = static_cast<double>(std::max<std::size_t>(h.n, 1));
    for (std::size_t k = 0; k < bins; ++k) {
        const double p = static_cast<double>(counts[k]) / n;
        const double w = edges[k + 1] - edges[k];
        h.probability.push_back(p);
        h.density.push_back(p / w);
        h.std_error.push_back(std::sqrt(p * (1.0 - p) / n) / w);
    }
    h.outside = static_cast<double>(outside) / n;
    return h;
}

Histogram empirical_density(const PathEnsemble& ensemble, double t, const std::vector<double>& edges) {
    if (t > ensemble.config.horizon * (1.0 + 1e-12)) throw std::invalid_argument("time beyond the simulated horizon");
    return histogram(ensemble.positions_at(t), edges, &ensemble.flagged);
}

DensityComparison compare_density(const Histogram& h, const std::vector<double>& model_probability) {
    if (model_probability.size() + 1 != h.edges.size()) throw std::invalid_argument("model bins do not match the histogram");
    DensityComparison c;
    const double n = static_cast<double>(std::max<std::size_t>(h.n, 1));
    double model_inside = 0.0;
    for (std::size_t k = 0; k < model_probability.size(); ++k) {
        const double P = model_probability[k];
        const double p = h.probability[k];
        model_inside += P;
        c.tv += 0.5 * std::abs(p - P);
        const double se = std::sqrt(std::max(P * (1.0 - P), 1.0 / n) / n);
        c.max_z = std::max(c.max_z, std::abs(p - P) / se);
    }
    c.tv += 0.5 * std::abs(h.outside - std::max(0.0, 1.0 - model_inside));
    return c;
}

std::vector<double> bin_probabilities(const std::function<double(double)>& density, const std::vector<double>& edges) {
    std::vector<double> out;
    quad::Tolerance tol;
    tol.abs = 1e-11;
    tol.rel = 1e-8;
    tol.max_depth = 12;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) out.push_back(quad::adaptive(density, edges[k], edges[k + 1], tol).value);
    return out;
}

double kolmogorov_survival(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16 * std::abs(sum)) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

TwoSample ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("two-sample test needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    TwoSample r;
    r.statistic = d;
    const double en = std::sqrt(na * nb / (na + nb));
    r.p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
    return r;
}

std::pair<double, double> ecf_cos(const std::vector<double>& samples, double xi) {
    const double n = static_cast<double>(samples.size());
    double m = 0.0;
    double m2 = 0.0;
    for (double v : samples) {
        const double c = std::cos(xi * v);
        m += c;
        m2 += c * c;
    }
    m /= n;
    const double var = std::max(0.0, m2 / n - m * m);
    return {m, std::sqrt(var / n)};
}

}  // namespace nlpert
