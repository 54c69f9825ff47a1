#include "nlpert/stable_kernels.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "nlpert/quadrature.hpp"

namespace nlpert {

void ModelParams::validate() const {
    if (d < 1) throw std::invalid_argument("ModelParams: d must be >= 1");
    if (!(beta > 0.0 && beta < alpha && alpha < 2.0)) {
        std::ostringstream os;
        os << "ModelParams: need 0 < beta < alpha < 2 (alpha=" << alpha << ", beta=" << beta << ")";
        throw std::invalid_argument(os.str());
    }
}

void ComparisonWeight::validate() const {
    if (!(a >= 0.0)) throw std::invalid_argument("ComparisonWeight: a must be >= 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("ComparisonWeight: lambda must be > 0");
}

void log_warning(const std::string& message) { std::cerr << "[nlpert] warning: " << message << '\n'; }

namespace {

constexpr double kPi = std::numbers::pi;

enum class Oscillation { Cos, Sin, Bessel };

struct Spectrum {
    double t;
    double alpha;
    double a;     // weight of the beta part
    double beta;
    double power;  // extra u^power factor
};

double spectrum_value(const Spectrum& s, double u) {
    if (u == 0.0) return s.power == 0.0 ? 1.0 : 0.0;
    double e = s.t * std::pow(u, s.alpha);
    if (s.a != 0.0) e += s.a * s.t * std::pow(u, s.beta);
    return std::exp(-e) * (s.power == 0.0 ? 1.0 : std::pow(u, s.power));
}

void check_time(double t, const KernelOptions& opts) {
    if (!(t > 0.0)) throw std::invalid_argument("kernel evaluation needs t > 0");
    if (t < opts.t_floor) {
        std::ostringstream os;
        os << "t=" << t << " is below the configured floor " << opts.t_floor;
        throw std::invalid_argument(os.str());
    }
}

// int_0^inf spectrum(u) K(u r) du with K = cos, sin or J_nu.
DensityValue radial_integral(const Spectrum& s, double r, Oscillation kind, double nu, const KernelOptions& opts) {
    const double upper = std::pow((opts.tail_exponent + 4.0 * s.power) / s.t, 1.0 / s.alpha);
    const double max_len = r > 0.0 ? std::min(kPi / (2.0 * r), upper / 4.0) : upper / 8.0;
    const double count = upper / max_len;
    if (count > static_cast<double>(opts.max_panels)) {
        throw QuadratureError("radial inversion needs too many panels (t too small or r too large)",
                              std::numeric_limits<double>::infinity());
    }
    const auto breaks = quad::graded_breaks(upper, max_len);
    std::function<double(double)> f;
    switch (kind) {
        case Oscillation::Cos:
            f = [&](double u) { return spectrum_value(s, u) * std::cos(u * r); };
            break;
        case Oscillation::Sin:
            f = [&](double u) { return spectrum_value(s, u) * std::sin(u * r); };
            break;
        case Oscillation::Bessel:
            f = [&](double u) { return spectrum_value(s, u) * std::cyl_bessel_j(nu, u * r); };
            break;
    }
    quad::Tolerance tol;
    tol.abs = opts.abs_tol;
    tol.rel = opts.rel_tol;
    tol.max_depth = 12;
    const quad::Result q = quad::panels(f, breaks, tol);
    // tail: int_U^inf e^{-t u^alpha} u^p du <~ e^{-t U^alpha} U^{p+1} / (t alpha U^alpha)
    const double tail = std::exp(-s.t * std::pow(upper, s.alpha)) * std::pow(upper, s.power + 1.0) /
                        (s.t * s.alpha * std::pow(upper, s.alpha));
    return {q.value, q.error + tail};
}

double sphere_area(int d) { return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }

// Radial inversion of exp(-t(|xi|^alpha + a|xi|^beta)) in dimension d.
DensityValue invert(int d, double alpha, double beta, double a, double t, double r, const KernelOptions& opts) {
    Spectrum s{t, alpha, a, beta, 0.0};
    if (d == 1) {
        const DensityValue v = radial_integral(s, r, Oscillation::Cos, 0.0, opts);
        return {v.value / kPi, v.error / kPi};
    }
    if (r == 0.0) {
        s.power = d - 1.0;
        const DensityValue v = radial_integral(s, 0.0, Oscillation::Cos, 0.0, opts);
        const double c = sphere_area(d) / std::pow(2.0 * kPi, d);
        return {c * v.value, c * v.error};
    }
    if (d == 3) {
        s.power = 1.0;
        const DensityValue v = radial_integral(s, r, Oscillation::Sin, 0.0, opts);
        const double c = 1.0 / (2.0 * kPi * kPi * r);
        return {c * v.value, c * v.error};
    }
    const double nu = 0.5 * d - 1.0;
    s.power = 0.5 * d;
    const DensityValue v = radial_integral(s, r, Oscillation::Bessel, nu, opts);
    const double c = std::pow(2.0 * kPi, -0.5 * d) * std::pow(r, -nu);
    return {c * v.value, c * v.error};
}

double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace

double stable_tail_series(double alpha, double x, int derivative) {
    if (!(x > 0.0)) throw std::invalid_argument("stable_tail_series: x must be positive");
    double sum = 0.0;
    double last = std::numeric_limits<double>::infinity();
    const double lx = std::log(x);
    for (int k = 1; k < 400; ++k) {
        const double mag = std::exp(std::lgamma(k * alpha + 1.0) - std::lgamma(k + 1.0) - (k * alpha + 1.0) * lx);
        if (mag > last && k > 2) break;  // asymptotic regime exhausted
        last = mag;
        double term = mag * std::sin(k * kPi * alpha / 2.0) * ((k % 2 == 1) ? 1.0 : -1.0);
        if (derivative == 1) term *= -(k * alpha + 1.0) / x;
        sum += term;
        if (mag < 1e-18 * std::abs(sum)) break;
    }
    return sum / kPi;
}

DensityValue eval_pa_detailed(const ModelParams& params, double a, double t, double r, const KernelOptions& opts) {
    params.validate();
    check_time(t, opts);
    if (!(a >= 0.0)) throw std::invalid_argument("eval_pa: a must be >= 0");
    if (!(r >= 0.0)) throw std::invalid_argument("eval_pa: r must be >= 0");
    if (a == 0.0) return eval_p0_detailed(params, t, r, opts);
    return invert(params.d, params.alpha, params.beta, a, t, r, opts);
}

double eval_pa(const ModelParams& params, double a, double t, double r, const KernelOptions& opts) {
    return eval_pa_detailed(params, a, t, r, opts).value;
}

DensityValue eval_p0_detailed(const ModelParams& params, double t, double r, const KernelOptions& opts) {
    params.validate();
    check_time(t, opts);
    if (!(r >= 0.0)) throw std::invalid_argument("eval_p0: r must be >= 0");
    if (params.d == 1) {
        const double scale = std::pow(t, -1.0 / params.alpha);
        const double x = r * scale;
        if (x >= 40.0) return {scale * stable_tail_series(params.alpha, x, 0), 0.0};
    }
    return invert(params.d, params.alpha, params.beta, 0.0, t, r, opts);
}

double fourier_moment_1d(double alpha, double t, double power, double r, const KernelOptions& opts) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("fourier_moment_1d: alpha outside (0, 2)");
    if (!(power >= 0.0)) throw std::invalid_argument("fourier_moment_1d: power must be >= 0");
    check_time(t, opts);
    Spectrum s{t, alpha, 0.0, alpha / 2.0, power};
    return radial_integral(s, std::abs(r), Oscillation::Cos, 0.0, opts).value / kPi;
}

double eval_p0(const ModelParams& params, double t, double r, const KernelOptions& opts) {
    return eval_p0_detailed(params, t, r, opts).value;
}

std::vector<double> grad_p0(const ModelParams& params, double t, std::span<const double> x,
                            const KernelOptions& opts) {
    params.validate();
    check_time(t, opts);
    if (static_cast<int>(x.size()) != params.d) throw std::invalid_argument("grad_p0: point has wrong dimension");
    std::vector<double> g(x.size(), 0.0);
    const double r = norm(x);
    if (r == 0.0) return g;
    double dr = 0.0;
    if (params.d == 1) {
        Spectrum s{t, params.alpha, 0.0, params.beta, 1.0};
        dr = -radial_integral(s, r, Oscillation::Sin, 0.0, opts).value / kPi;
    } else {
        ModelParams lifted = params;
        lifted.d = params.d + 2;
        dr = -2.0 * kPi * r * eval_p0(lifted, t, r, opts);
    }
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = dr * x[i] / r;
    return g;
}

std::vector<double> hess_p0(const ModelParams& params, double t, std::span<const double> x,
                            const KernelOptions& opts) {
    params.validate();
    check_time(t, opts);
    const auto d = static_cast<std::size_t>(params.d);
    if (x.size() != d) throw std::invalid_argument("hess_p0: point has wrong dimension");
    std::vector<double> h(d * d, 0.0);
    const double r = norm(x);
    if (params.d == 1) {
        Spectrum s{t, params.alpha, 0.0, params.beta, 2.0};
        h[0] = -radial_integral(s, r, Oscillation::Cos, 0.0, opts).value / kPi;
        return h;
    }
    ModelParams lift2 = params;
    lift2.d = params.d + 2;
    const double p2 = eval_p0(lift2, t, r, opts);
    if (r == 0.0) {
        for (std::size_t i = 0; i < d; ++i) h[i * d + i] = -2.0 * kPi * p2;
        return h;
    }
    ModelParams lift4 = params;
    lift4.d = params.d + 4;
    const double p4 = eval_p0(lift4, t, r, opts);
    const double first_over_r = -2.0 * kPi * p2;
    const double second = -2.0 * kPi * p2 + 4.0 * kPi * kPi * r * r * p4;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double ninj = x[i] * x[j] / (r * r);
            h[i * d + j] = second * ninj + first_over_r * ((i == j ? 1.0 : 0.0) - ninj);
        }
    }
    return h;
}

double comparison_h(const ModelParams& params, const ComparisonWeight& weight, double t, double r) {
    params.validate();
    weight.validate();
    const double d = params.d;
    double cap = std::pow(t, -d / params.alpha);
    if (weight.a > 0.0) cap = std::min(cap, std::pow(weight.a * t, -d / params.beta));
    if (r == 0.0) return cap;
    const double jump = t / std::pow(r, d + params.alpha) + weight.a * t / std::pow(r, d + params.beta);
    return std::min(cap, jump);
}

double comparison_g(const ModelParams& params, double a, double t, double r) {
    params.validate();
    const double d = params.d;
    if (r <= std::pow(t, 1.0 / params.alpha)) return std::pow(t, -d / params.alpha);
    return t / std::pow(r, d + params.alpha) + a * t / std::pow(r, d + params.beta);
}

double comparison_f0(const ModelParams& params, double t, double r) {
    params.validate();
    return std::pow(std::max(std::pow(t, 1.0 / params.alpha), r), -(params.d + params.beta));
}

double comparison_f(const ModelParams& params, const ComparisonWeight& weight, double t, double r) {
    params.validate();
    weight.validate();
    const double d = params.d;
    if (r <= std::pow(t, 1.0 / params.alpha)) return std::pow(t, -(d + params.beta) / params.alpha);
    if (r <= weight.lambda) return std::pow(r, -(d + params.beta));
    return std::pow(r, -(d + params.alpha)) + weight.a * std::pow(r, -(d + params.beta));
}

EnvelopePair truncated_envelope(const ModelParams& params, double t, double r, const EnvelopeConstants& c) {
    params.validate();
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("truncated_envelope: t must lie in (0, 1]");
    if (r <= 1.0) {
        const double shape = r == 0.0 ? std::pow(t, -params.d / params.alpha)
                                      : std::min(std::pow(t, -params.d / params.alpha),
                                                 t / std::pow(r, params.d + params.alpha));
        return {shape / c.near, shape * c.near};
    }
    const double ratio = t / r;
    return {c.c1 * std::pow(ratio, c.c2 * r), c.c3 * std::pow(ratio, c.c4 * r)};
}

double scaling_check_p0(const ModelParams& params, double lambda, double t, std::span<const double> x,
                        const KernelOptions& opts) {
    if (!(lambda > 0.0)) throw std::invalid_argument("scaling_check_p0: lambda must be positive");
    const double r = norm(x);
    if (lambda == 1.0) return 0.0;
    const double lhs = eval_p0(params, t, r, opts);
    const double rhs = std::pow(lambda, -params.d / params.alpha) *
                       eval_p0(params, t / lambda, std::pow(lambda, -1.0 / params.alpha) * r, opts);
    return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------

StableDensityTable::StableDensityTable(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("StableDensityTable: alpha outside (0, 2)");
    table_end_ = alpha < 1.0 ? 4.0 : 40.0;
    step_ = 0.025;
    const auto n = static_cast<std::size_t>(std::llround(table_end_ / step_)) + 1;
    values_.resize(n);
    slopes_.resize(n);
    KernelOptions opts;
    opts.rel_tol = 1e-11;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) * step_;
        Spectrum s0{1.0, alpha, 0.0, 0.0, 0.0};
        Spectrum s1{1.0, alpha, 0.0, 0.0, 1.0};
        values_[i] = radial_integral(s0, x, Oscillation::Cos, 0.0, opts).value / kPi;
        slopes_[i] = x == 0.0 ? 0.0 : -radial_integral(s1, x, Oscillation::Sin, 0.0, opts).value / kPi;
    }
    for (int k = 1; k < 400; ++k) {
        tail_mag_.push_back(std::exp(std::lgamma(k * alpha + 1.0) - std::lgamma(k + 1.0)) / kPi);
        tail_sign_.push_back(std::sin(k * kPi * alpha / 2.0) * ((k % 2 == 1) ? 1.0 : -1.0));
    }
}

// same truncation rule as stable_tail_series
double StableDensityTable::tail(double x, int derivative) const {
    const double y = std::pow(x, -alpha_);
    double pw = y / x;
    double sum = 0.0;
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tail_mag_.size(); ++i, pw *= y) {
        const double k = static_cast<double>(i + 1);
        const double mag = tail_mag_[i] * pw;
        if (mag > last && i > 1) break;
        last = mag;
        double term = mag * tail_sign_[i];
        if (derivative == 1) term *= -(k * alpha_ + 1.0) / x;
        sum += term;
        if (mag < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

std::shared_ptr<const StableDensityTable> StableDensityTable::get(double alpha) {
    static std::mutex mutex;
    static std::map<double, std::shared_ptr<const StableDensityTable>> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(alpha);
    if (it != cache.end()) return it->second;
    auto table = std::make_shared<const StableDensityTable>(alpha);
    cache.emplace(alpha, table);
    return table;
}

double StableDensityTable::standard(double x) const {
    x = std::abs(x);
    if (x >= table_end_) return tail(x, 0);
    const double pos = x / step_;
    const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
    const double u = pos - static_cast<double>(i);
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * values_[i] + h10 * step_ * slopes_[i] + h01 * values_[i + 1] + h11 * step_ * slopes_[i + 1];
}

double StableDensityTable::standard_derivative(double x) const {
    const double sign = x < 0.0 ? -1.0 : 1.0;
    x = std::abs(x);
    if (x >= table_end_) return sign * tail(x, 1);
    const double pos = x / step_;
    const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
    const double u = pos - static_cast<double>(i);
    const double d00 = 6 * u * u - 6 * u;
    const double d10 = 3 * u * u - 4 * u + 1;
    const double d01 = -6 * u * u + 6 * u;
    const double d11 = 3 * u * u - 2 * u;
    return sign * (d00 * values_[i] / step_ + d10 * slopes_[i] + d01 * values_[i + 1] / step_ + d11 * slopes_[i + 1]);
}

double StableDensityTable::p0(double t, double r) const {
    const double scale = std::pow(t, -1.0 / alpha_);
    return scale * standard(r * scale);
}

double StableDensityTable::dp0(double t, double r) const {
    const double scale = std::pow(t, -1.0 / alpha_);
    return scale * scale * standard_derivative(r * scale);
}

}  // namespace nlpert
