#include "nlpert/nonlocal_operator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>

#include "nlpert/expression.hpp"
#include "nlpert/quadrature.hpp"

namespace nlpert {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sphere_area(int d) { return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }

void check_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma < 2.0)) {
        std::ostringstream os;
        os << "stability index " << gamma << " outside (0, 2)";
        throw std::invalid_argument(os.str());
    }
}

// Cumulative values of Phi_gamma at the integers 2..60 plus the value at infinity.
struct PhiTable {
    std::vector<double> at_integer;  // index k -> Phi(k), k = 2..60
    double at_infinity = 0.0;
};

constexpr int kPhiSwitch = 60;

double phi_series(double gamma, double x) {
    // sum_{k>=1} (-1)^{k+1} x^{2k-gamma} / ((2k)! (2k-gamma)), used for x <= 2
    double sum = 0.0;
    double power = x * x;  // x^{2k}
    double fact = 2.0;     // (2k)!
    for (int k = 1; k < 40; ++k) {
        const double term = power / (fact * (2.0 * k - gamma));
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-18 * std::abs(sum)) break;
        power *= x * x;
        fact *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
    }
    return sum * std::pow(x, -gamma);
}

const PhiTable& phi_table(double gamma) {
    static std::mutex mutex;
    static std::map<double, PhiTable> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(gamma);
    if (it != cache.end()) return it->second;
    PhiTable table;
    table.at_integer.assign(kPhiSwitch + 1, 0.0);
    table.at_integer[2] = phi_series(gamma, 2.0);
    const auto f = [gamma](double v) { return (1.0 - std::cos(v)) * std::pow(v, -1.0 - gamma); };
    quad::Tolerance tol;
    tol.abs = 1e-17;
    tol.rel = 1e-14;
    for (int k = 3; k <= kPhiSwitch; ++k) {
        table.at_integer[static_cast<std::size_t>(k)] =
            table.at_integer[static_cast<std::size_t>(k - 1)] + quad::adaptive(f, k - 1.0, k, tol).value;
    }
    const double x0 = kPhiSwitch;
    table.at_infinity =
        table.at_integer[kPhiSwitch] + std::pow(x0, -gamma) / gamma - quad::oscillatory_tail(1.0 + gamma, x0, 0);
    return cache.emplace(gamma, std::move(table)).first->second;
}

// int_0^2 r^{-1-gamma} (1 - Lambda_nu(r)) dr with Lambda_nu(r) = Gamma(nu+1)(2/r)^nu J_nu(r),
// term by term from the power series of Lambda_nu.
double bessel_head(double nu, double gamma) {
    double sum = 0.0;
    for (int k = 1; k < 40; ++k) {
        const double coeff = std::exp(std::lgamma(nu + 1.0) - std::lgamma(k + 1.0) - std::lgamma(nu + k + 1.0));
        const double term = coeff * std::pow(2.0, -gamma) / (2.0 * k - gamma);
        sum += (k % 2 == 1) ? term : -term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

double multiplier_radial_integral(int d, double gamma) {
    const double nu = 0.5 * d - 1.0;
    const double c = std::tgamma(nu + 1.0) * std::pow(2.0, nu);
    const auto lambda = [&](double r) { return c * std::pow(r, -nu) * std::cyl_bessel_j(nu, r); };
    const auto f = [&](double r) { return std::pow(r, -1.0 - gamma) * (1.0 - lambda(r)); };
    const double upper = 400.0;
    std::vector<double> breaks;
    for (double r = 2.0; r <= upper; r += 1.0) breaks.push_back(r);
    quad::Tolerance tol;
    tol.abs = 1e-17;
    tol.rel = 1e-14;
    double value = bessel_head(nu, gamma) + quad::panels(f, breaks, tol).value;
    // tail: R^{-gamma}/gamma - c int_R^inf r^{-1-gamma-nu} J_nu(r) dr with the two-term Hankel expansion
    const double mu = 4.0 * nu * nu;
    const double phase = nu * kPi / 2.0 + kPi / 4.0;
    const double p = 1.5 + gamma + nu;
    const double amp = std::sqrt(2.0 / kPi);
    const double jtail = amp * (quad::shifted_cos_tail(p, upper, phase) -
                                (mu - 1.0) * (mu - 9.0) / 128.0 * quad::shifted_cos_tail(p + 2.0, upper, phase) -
                                (mu - 1.0) / 8.0 * quad::shifted_cos_tail(p + 1.0, upper, phase + kPi / 2.0));
    value += std::pow(upper, -gamma) / gamma - c * jtail;
    return sphere_area(d) * value;
}

// Integrand convention: S f(x) = (A/2) int_0^inf H(r) r^{-1-gamma} dr, where H(r) is the sphere
// integral of the second difference times b.
struct RadialSetup {
    double gamma;
    double constant;                       // A/2
    double tail_weight;                    // int_{S} int_R^inf b r^{-1-gamma}, times -2 f(x) below
    double f0;
    std::vector<double> breaks;
};

double radial_pv(const std::function<double(double)>& h, const RadialSetup& s, const OperatorOptions& opts) {
    quad::Tolerance tol;
    tol.abs = opts.abs_tol;
    tol.rel = opts.rel_tol;
    tol.max_depth = 30;
    const auto f = [&](double r) { return h(r) * std::pow(r, -1.0 - s.gamma); };
    double total = quad::panels(f, s.breaks, tol).value;
    // [0, r_min]: H(r) ~ H(r_min)(r/r_min)^2
    const double rmin = s.breaks.front();
    total += h(rmin) * std::pow(rmin, -s.gamma) / (2.0 - s.gamma);
    total += -2.0 * s.f0 * s.tail_weight;
    return s.constant * total;
}

std::vector<double> radial_breaks(double r_min, double r_max, double rho, std::vector<double> extra) {
    std::vector<double> b;
    for (double r = r_min; r < r_max; r *= rho) b.push_back(r);
    b.push_back(r_max);
    for (double e : extra) {
        if (e > r_min && e < r_max && std::isfinite(e)) b.push_back(e);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

// Directions and weights on S^{d-1} (weights sum to |S^{d-1}|).
void sphere_rule(int d, int n, std::vector<double>& dirs, std::vector<double>& weights) {
    dirs.clear();
    weights.clear();
    if (d == 1) {
        dirs = {1.0, -1.0};
        weights = {1.0, 1.0};
        return;
    }
    if (d == 2) {
        for (int j = 0; j < n; ++j) {
            const double th = 2.0 * kPi * (j + 0.5) / n;
            dirs.push_back(std::cos(th));
            dirs.push_back(std::sin(th));
            weights.push_back(2.0 * kPi / n);
        }
        return;
    }
    if (d == 3) {
        std::vector<double> mu, w;
        quad::gauss_legendre(std::max(2, n / 2), mu, w);
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const double s = std::sqrt(1.0 - mu[i] * mu[i]);
            for (int j = 0; j < n; ++j) {
                const double ph = 2.0 * kPi * (j + 0.5) / n;
                dirs.push_back(s * std::cos(ph));
                dirs.push_back(s * std::sin(ph));
                dirs.push_back(mu[i]);
                weights.push_back(w[i] * 2.0 * kPi / n);
            }
        }
        return;
    }
    throw std::invalid_argument("operator quadrature supports d <= 3");
}

double norm(std::span<const double> z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return std::sqrt(s);
}

RadialProfile split_profile(const RadialProfile& g, double lambda, bool keep_inside, bool outside_sign_positive) {
    std::vector<PowerPiece> out;
    for (const PowerPiece& p : g.pieces()) {
        if (keep_inside && p.inner < lambda) {
            PowerPiece q = p;
            q.outer = std::min(p.outer, lambda);
            out.push_back(q);
        }
        if (p.outer > lambda) {
            const bool positive = p.coeff > 0.0;
            if (positive == outside_sign_positive && p.coeff != 0.0) {
                PowerPiece q = p;
                q.inner = std::max(p.inner, lambda);
                out.push_back(q);
            }
        }
    }
    return RadialProfile(std::move(out));
}

bool pieces_overlap(const RadialProfile& g) {
    auto pieces = g.pieces();
    std::sort(pieces.begin(), pieces.end(), [](const PowerPiece& a, const PowerPiece& b) { return a.inner < b.inner; });
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        if (pieces[i].inner < pieces[i - 1].outer) return true;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------

double normalizing_constant_closed_form(int d, double gamma) {
    check_gamma(gamma);
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    return gamma * std::pow(2.0, gamma - 1.0) * std::tgamma(0.5 * (d + gamma)) /
           (std::pow(kPi, 0.5 * d) * std::tgamma(1.0 - 0.5 * gamma));
}

double normalizing_constant(int d, double gamma) {
    check_gamma(gamma);
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    static std::mutex mutex;
    static std::map<std::pair<int, double>, double> cache;
    {
        std::lock_guard lock(mutex);
        auto it = cache.find({d, gamma});
        if (it != cache.end()) return it->second;
    }
    const double integral = d == 1 ? 2.0 * phi_gamma(gamma, kInf) : multiplier_radial_integral(d, gamma);
    const double value = 1.0 / integral;
    const double closed = normalizing_constant_closed_form(d, gamma);
    if (std::abs(value / closed - 1.0) > 1e-8) {
        std::ostringstream os;
        os << "normalizing constant A(" << d << ", -" << gamma << ") from the multiplier integral (" << value
           << ") differs from the Gamma-function value (" << closed << ")";
        log_warning(os.str());
    }
    std::lock_guard lock(mutex);
    cache[{d, gamma}] = value;
    return value;
}

double phi_gamma(double gamma, double x) {
    check_gamma(gamma);
    if (!(x > 0.0)) return 0.0;
    if (x <= 2.0) return phi_series(gamma, x);
    const PhiTable& t = phi_table(gamma);
    if (std::isinf(x)) return t.at_infinity;
    if (x <= kPhiSwitch) {
        const int k = static_cast<int>(std::floor(x));
        double v = t.at_integer[static_cast<std::size_t>(k)];
        if (x > k) {
            const auto f = [gamma](double u) { return (1.0 - std::cos(u)) * std::pow(u, -1.0 - gamma); };
            quad::Tolerance tol;
            tol.abs = 1e-17;
            tol.rel = 1e-14;
            v += quad::adaptive(f, k, x, tol).value;
        }
        return v;
    }
    // Phi(x) = Phi(inf) - int_x^inf (1 - cos v) v^{-1-gamma} dv
    return t.at_infinity - std::pow(x, -gamma) / gamma + quad::oscillatory_tail(1.0 + gamma, x, 0);
}

// ---------------------------------------------------------------------------

RadialProfile::RadialProfile(std::vector<PowerPiece> pieces) : pieces_(std::move(pieces)) {
    for (const PowerPiece& p : pieces_) {
        if (!(p.inner >= 0.0) || !(p.outer > p.inner)) throw std::invalid_argument("RadialProfile: empty or bad range");
        if (!std::isfinite(p.coeff)) throw std::invalid_argument("RadialProfile: non-finite coefficient");
    }
}

double RadialProfile::operator()(double r) const {
    double v = 0.0;
    for (const PowerPiece& p : pieces_) {
        if (r >= p.inner && r < p.outer) v += p.exponent == 0.0 ? p.coeff : p.coeff * std::pow(r, p.exponent);
    }
    return v;
}

std::vector<double> RadialProfile::breakpoints() const {
    std::vector<double> b;
    for (const PowerPiece& p : pieces_) {
        if (p.inner > 0.0) b.push_back(p.inner);
        if (std::isfinite(p.outer)) b.push_back(p.outer);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

double RadialProfile::sup_abs() const {
    std::vector<double> cuts = breakpoints();
    cuts.insert(cuts.begin(), 0.0);
    cuts.push_back(kInf);
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        double s = 0.0;
        for (const PowerPiece& p : pieces_) {
            if (p.inner >= hi || p.outer <= lo) continue;
            const double c = std::abs(p.coeff);
            if (p.exponent == 0.0) s += c;
            else if (p.exponent > 0.0) s += c * std::pow(hi, p.exponent);
            else s += c * std::pow(lo, p.exponent);
        }
        best = std::max(best, s);
    }
    return best;
}

double RadialProfile::tail_integral(double lo, double beta) const {
    double total = 0.0;
    for (const PowerPiece& p : pieces_) {
        const double a = std::max(lo, p.inner);
        if (a >= p.outer) continue;
        const double e = p.exponent - beta;
        const double hi = std::isinf(p.outer) ? 0.0 : std::pow(p.outer, e);
        if (std::isinf(p.outer) && e >= 0.0) return kInf;
        total += p.coeff * (hi - std::pow(a, e)) / e;
    }
    return total;
}

double radial_symbol(const RadialProfile& profile, const ModelParams& params, double xi) {
    params.validate();
    if (params.d != 1) throw std::invalid_argument("radial_symbol is one-dimensional");
    const double k = std::abs(xi);
    if (k == 0.0) return 0.0;
    const double a_beta = normalizing_constant(1, params.beta);
    double v = 0.0;
    for (const PowerPiece& p : profile.pieces()) {
        const double gamma = params.beta - p.exponent;
        check_gamma(gamma);
        const double upper = std::isinf(p.outer) ? phi_gamma(gamma, kInf) : phi_gamma(gamma, p.outer * k);
        const double lower = phi_gamma(gamma, p.inner * k);
        v += -2.0 * a_beta * p.coeff * std::pow(k, gamma) * (upper - lower);
    }
    return v;
}

// ---------------------------------------------------------------------------

BFunction BFunction::zero() {
    BFunction b;
    b.id_ = "constant:0";
    return b;
}

BFunction BFunction::constant(double a) {
    if (!std::isfinite(a)) throw std::invalid_argument("constant coefficient must be finite");
    std::ostringstream os;
    os << "constant:" << a;
    if (a == 0.0) {
        BFunction b = zero();
        b.id_ = os.str();
        return b;
    }
    SeparableTerm t;
    t.u_value = 1.0;
    t.u_sup = 1.0;
    t.profile = RadialProfile({{a, 0.0, 0.0, kInf}});
    return separable({t}, os.str());
}

BFunction BFunction::sde(std::function<double(double)> c, double beta, std::string label, std::optional<double> c_sup) {
    if (!c) throw std::invalid_argument("sde coefficient: empty function");
    double sup = 0.0;
    if (c_sup) {
        sup = *c_sup;
    } else {
        for (int i = -20000; i <= 20000; ++i) sup = std::max(sup, std::abs(c(i * 0.005)));
        for (double x : {1e3, -1e3, 1e6, -1e6}) sup = std::max(sup, std::abs(c(x)));
    }
    if (!std::isfinite(sup)) throw std::invalid_argument("sde coefficient c must be bounded");
    SeparableTerm t;
    t.u = [c = std::move(c), beta](std::span<const double> x) { return std::pow(std::abs(c(x[0])), beta); };
    t.u_sup = std::pow(sup, beta);
    t.u_nonnegative = true;
    t.profile = RadialProfile({{1.0, 0.0, 0.0, kInf}});
    return separable({t}, "sde:" + label);
}

BFunction BFunction::truncated(double inner, double outer, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("truncated: lambda must be positive");
    std::ostringstream os;
    os << "truncated:" << inner << ',' << outer << ',' << lambda;
    std::vector<PowerPiece> pieces;
    if (inner != 0.0) pieces.push_back({inner, 0.0, 0.0, lambda});
    if (outer != 0.0) pieces.push_back({outer, 0.0, lambda, kInf});
    if (pieces.empty()) {
        BFunction b = zero();
        b.id_ = os.str();
        return b;
    }
    SeparableTerm t;
    t.profile = RadialProfile(std::move(pieces));
    return separable({t}, os.str());
}

BFunction BFunction::critical_negative(const ModelParams& params, double lambda) {
    params.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("critical-negative: lambda must be positive");
    const double ratio = normalizing_constant(params.d, params.alpha) / normalizing_constant(params.d, params.beta);
    SeparableTerm t;
    t.profile = RadialProfile({{-ratio, params.beta - params.alpha, lambda, kInf}});
    std::ostringstream os;
    os << "critical-negative:" << lambda;
    return separable({t}, os.str());
}

BFunction BFunction::separable(std::vector<SeparableTerm> terms, std::string id) {
    BFunction b;
    b.id_ = std::move(id);
    for (SeparableTerm& t : terms) {
        if (t.constant_in_x()) t.u_sup = std::abs(t.u_value);
        b.sup_norm_ += t.u_sup * t.profile.sup_abs();
    }
    b.terms_ = std::move(terms);
    return b;
}

BFunction BFunction::from_function(Eval eval, double sup_norm, std::string id, int dim, SymmetryPolicy policy) {
    if (!eval) throw std::invalid_argument("BFunction: empty evaluator");
    if (!(sup_norm >= 0.0)) throw std::invalid_argument("BFunction: sup_norm must be >= 0");
    double worst = 0.0;
    std::vector<double> x(static_cast<std::size_t>(dim)), z(x.size()), mz(x.size());
    for (double xv : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
        for (double r : {0.01, 0.3, 1.0, 2.5, 10.0}) {
            for (int dir = 0; dir < 2; ++dir) {
                std::fill(x.begin(), x.end(), xv);
                for (std::size_t i = 0; i < z.size(); ++i) {
                    z[i] = dir == 0 ? (i == 0 ? r : 0.0) : r / std::sqrt(static_cast<double>(dim));
                    mz[i] = -z[i];
                }
                worst = std::max(worst, std::abs(eval(x, z) - eval(x, mz)));
            }
        }
    }
    if (worst > 1e-12) {
        std::ostringstream os;
        os << "coefficient " << id << " is not even in z (asymmetry " << worst << ")";
        if (policy == SymmetryPolicy::Reject) throw std::invalid_argument(os.str());
        log_warning(os.str() + "; using (b(x,z) + b(x,-z))/2");
    }
    BFunction b;
    b.id_ = std::move(id);
    b.sup_norm_ = sup_norm;
    b.separable_ = false;
    b.general_ = [eval = std::move(eval)](std::span<const double> x, std::span<const double> z) {
        std::vector<double> mz(z.begin(), z.end());
        for (double& v : mz) v = -v;
        return 0.5 * (eval(x, z) + eval(x, mz));
    };
    return b;
}

double BFunction::operator()(std::span<const double> x, std::span<const double> z) const {
    if (!separable_) return general_(x, z);
    double v = 0.0;
    if (terms_.empty()) return v;
    const double r = norm(z);
    for (const SeparableTerm& t : terms_) {
        const double g = t.profile(r);
        if (g != 0.0) v += t.u_at(x) * g;
    }
    return v;
}

double BFunction::eval1(double x, double z) const {
    return (*this)(std::span<const double>(&x, 1), std::span<const double>(&z, 1));
}

bool BFunction::translation_invariant() const {
    if (!separable_) return false;
    return std::all_of(terms_.begin(), terms_.end(), [](const SeparableTerm& t) { return t.constant_in_x(); });
}

std::vector<double> BFunction::radial_breakpoints() const {
    std::vector<double> b;
    for (const SeparableTerm& t : terms_) {
        const auto p = t.profile.breakpoints();
        b.insert(b.end(), p.begin(), p.end());
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

BFunction make_preset(const std::string& spec, const ModelParams& params) {
    params.validate();
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    const auto numbers = [&](std::size_t expected) {
        std::vector<double> v;
        std::stringstream ss(arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(item, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size() || item.empty()) throw std::invalid_argument("preset '" + spec + "': bad number '" + item + "'");
            v.push_back(x);
        }
        if (v.size() != expected) throw std::invalid_argument("preset '" + spec + "': wrong number of arguments");
        return v;
    };
    if (name == "constant") return BFunction::constant(numbers(1)[0]);
    if (name == "truncated") {
        const auto v = numbers(3);
        return BFunction::truncated(v[0], v[1], v[2]);
    }
    if (name == "critical-negative") return BFunction::critical_negative(params, numbers(1)[0]);
    if (name == "sde") {
        if (arg.empty()) throw std::invalid_argument("preset 'sde' needs an expression for c(x)");
        const Expression c = Expression::parse(arg);
        return BFunction::sde([c](double x) { return c(x); }, params.beta, arg);
    }
    throw std::invalid_argument("unknown coefficient preset '" + spec + "'");
}

// ---------------------------------------------------------------------------

namespace {

// S f(x) for the kernel b(x, z)|z|^{-d-gamma} with constant A(d, -gamma).
double apply_jump_operator(const BFunction& b, int d, double gamma, const ScalarField& f, std::span<const double> x,
                           const OperatorOptions& opts) {
    check_gamma(gamma);
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("operator: point has wrong dimension");
    if (b.is_zero()) return 0.0;
    std::vector<double> dirs, weights;
    if (d == 1) {
        dirs = {1.0};
        weights = {2.0};  // b is even in z
    } else {
        sphere_rule(d, opts.angular_nodes, dirs, weights);
    }
    const double f0 = f(x);
    const auto ud = static_cast<std::size_t>(d);
    const auto h = [&](double r) {
        std::vector<double> xp(ud), xm(ud), z(ud);
        double acc = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            for (std::size_t i = 0; i < ud; ++i) {
                z[i] = r * dirs[k * ud + i];
                xp[i] = x[i] + z[i];
                xm[i] = x[i] - z[i];
            }
            const double bv = b(x, z);
            if (bv == 0.0) continue;
            acc += weights[k] * (f(xp) + f(xm) - 2.0 * f0) * bv;
        }
        return acc;
    };
    const double rmax = opts.r_max_factor * (1.0 + norm(x));
    std::vector<double> extra = b.radial_breakpoints();
    extra.insert(extra.end(), opts.extra_breaks.begin(), opts.extra_breaks.end());
    RadialSetup s;
    s.gamma = gamma;
    s.constant = 0.5 * normalizing_constant(d, gamma);
    s.f0 = f0;
    s.breaks = radial_breaks(opts.r_min, rmax, opts.rho, extra);
    if (b.is_separable()) {
        double w = 0.0;
        for (const SeparableTerm& t : b.terms()) w += t.u_at(x) * t.profile.tail_integral(rmax, gamma);
        s.tail_weight = sphere_area(d) * w;
    } else {
        std::vector<double> z(ud, 0.0);
        z[0] = rmax;
        s.tail_weight = sphere_area(d) * b(x, z) * std::pow(rmax, -gamma) / gamma;
    }
    return radial_pv(h, s, opts);
}

}  // namespace

double apply_Sb(const BFunction& b, const ModelParams& params, const ScalarField& f, std::span<const double> x,
                const OperatorOptions& opts) {
    params.validate();
    return apply_jump_operator(b, params.d, params.beta, f, x, opts);
}

double apply_Sb_1d(const BFunction& b, const ModelParams& params, const std::function<double(double)>& f, double x,
                   const OperatorOptions& opts) {
    if (params.d != 1) throw std::invalid_argument("apply_Sb_1d needs d = 1");
    const ScalarField g = [&f](std::span<const double> p) { return f(p[0]); };
    return apply_Sb(b, params, g, std::span<const double>(&x, 1), opts);
}

double apply_Sb_compensated_1d(const BFunction& b, const ModelParams& params, const std::function<double(double)>& f,
                               double fprime, double x, double radius, const OperatorOptions& opts) {
    params.validate();
    if (params.d != 1) throw std::invalid_argument("apply_Sb_compensated_1d needs d = 1");
    if (!(radius > 0.0)) throw std::invalid_argument("compensation radius must be positive");
    if (b.is_zero()) return 0.0;
    const double f0 = f(x);
    const double rmax = opts.r_max_factor * (1.0 + std::abs(x));
    std::vector<double> extra = b.radial_breakpoints();
    extra.insert(extra.end(), opts.extra_breaks.begin(), opts.extra_breaks.end());
    extra.push_back(radius);
    double total = 0.0;
    for (int side : {1, -1}) {
        const auto h = [&](double r) {
            const double drift = r <= radius ? side * fprime * r : 0.0;
            // H is twice the one-sided integrand so that radial_pv's A/2 gives A
            return 2.0 * (f(x + side * r) - f0 - drift) * b.eval1(x, side * r);
        };
        RadialSetup s;
        s.gamma = params.beta;
        s.constant = 0.5 * normalizing_constant(1, params.beta);
        s.f0 = 0.5 * f0;
        s.breaks = radial_breaks(opts.r_min, rmax, opts.rho, extra);
        if (b.is_separable()) {
            double w = 0.0;
            const double xs[1] = {x};
            for (const SeparableTerm& t : b.terms()) w += t.u_at(xs) * t.profile.tail_integral(rmax, params.beta);
            s.tail_weight = 2.0 * w;
        } else {
            s.tail_weight = 2.0 * b.eval1(x, side * rmax) * std::pow(rmax, -params.beta) / params.beta;
        }
        total += radial_pv(h, s, opts);
    }
    return total;
}

double apply_frac_laplacian(double gamma, const ModelParams& params, const ScalarField& f, std::span<const double> x,
                            const OperatorOptions& opts) {
    params.validate();
    static const BFunction one = BFunction::constant(1.0);
    return apply_jump_operator(one, params.d, gamma, f, x, opts);
}

double apply_frac_laplacian_1d(double gamma, const std::function<double(double)>& f, double x,
                               const OperatorOptions& opts) {
    ModelParams p;
    p.d = 1;
    const ScalarField g = [&f](std::span<const double> q) { return f(q[0]); };
    return apply_frac_laplacian(gamma, p, g, std::span<const double>(&x, 1), opts);
}

// ---------------------------------------------------------------------------

double jb_kernel(const BFunction& b, const ModelParams& params, std::span<const double> x, std::span<const double> z) {
    params.validate();
    const double r = norm(z);
    if (r == 0.0) throw std::invalid_argument("jump kernel is singular at z = 0");
    const int d = params.d;
    return normalizing_constant(d, params.alpha) * std::pow(r, -d - params.alpha) +
           normalizing_constant(d, params.beta) * b(x, z) * std::pow(r, -d - params.beta);
}

double Jb_kernel(const BFunction& b, const ModelParams& params, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("Jb_kernel: dimension mismatch");
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = y[i] - x[i];
    return jb_kernel(b, params, x, z);
}

double lower_kernel_ratio(const BFunction& b, const ModelParams& params, std::span<const double> x,
                          std::span<const double> z) {
    params.validate();
    const double r = norm(z);
    if (r == 0.0) throw std::invalid_argument("lower_kernel_ratio: z = 0");
    return normalizing_constant(params.d, params.alpha) +
           normalizing_constant(params.d, params.beta) * b(x, z) * std::pow(r, params.alpha - params.beta);
}

PositivityReport check_positivity_condition(const BFunction& b, const ModelParams& params,
                                            std::span<const double> x_samples, std::span<const double> z_samples) {
    params.validate();
    const auto d = static_cast<std::size_t>(params.d);
    if (x_samples.empty() || z_samples.empty() || x_samples.size() % d || z_samples.size() % d) {
        throw std::invalid_argument("check_positivity_condition: sample sets must be nonempty multiples of d");
    }
    const double ratio = normalizing_constant(params.d, params.alpha) / normalizing_constant(params.d, params.beta);
    PositivityReport rep;
    for (std::size_t i = 0; i < x_samples.size(); i += d) {
        const auto x = x_samples.subspan(i, d);
        for (std::size_t j = 0; j < z_samples.size(); j += d) {
            const auto z = z_samples.subspan(j, d);
            const double r = norm(z);
            if (r == 0.0) continue;
            const double bound = ratio * std::pow(r, params.beta - params.alpha);
            const double margin = b(x, z) + bound;
            if (margin < rep.worst_margin) {
                rep.worst_margin = margin;
                rep.worst_x.assign(x.begin(), x.end());
                rep.worst_z.assign(z.begin(), z.end());
            }
            if (margin < -1e-12 * std::max(1.0, bound)) rep.holds = false;
        }
    }
    return rep;
}

bool check_lower_kernel_condition(const BFunction& b, const ModelParams& params, double M,
                                  std::span<const double> x_samples, std::span<const double> z_samples) {
    params.validate();
    if (!(M >= 1.0)) throw std::invalid_argument("check_lower_kernel_condition: M must be >= 1");
    const auto d = static_cast<std::size_t>(params.d);
    if (x_samples.size() % d || z_samples.size() % d) throw std::invalid_argument("samples must be multiples of d");
    const double ratio = normalizing_constant(params.d, params.alpha) / normalizing_constant(params.d, params.beta);
    for (std::size_t i = 0; i < x_samples.size(); i += d) {
        const auto x = x_samples.subspan(i, d);
        for (std::size_t j = 0; j < z_samples.size(); j += d) {
            const auto z = z_samples.subspan(j, d);
            const double r = norm(z);
            if (r == 0.0) continue;
            const double k = ratio * std::pow(r, params.beta - params.alpha);
            const double tol = 1e-12 * std::max(1.0, k);
            const double v = b(x, z);
            if (v < -(1.0 - 1.0 / M) * k - tol || v > (M - 1.0) * k + tol) return false;
        }
    }
    return true;
}

TailStats tail_stats(const BFunction& b, const ModelParams& params, double lambda, int samples, std::uint64_t seed) {
    params.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("tail_stats: lambda must be positive");
    const auto d = static_cast<std::size_t>(params.d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss;
    TailStats st;
    st.lambda = lambda;
    st.m_lower = kInf;
    st.M_upper = 0.0;
    st.m_plus = kInf;
    st.M_plus = 0.0;
    std::vector<double> x(d), z(d);
    const auto record = [&](double v) {
        st.m_lower = std::min(st.m_lower, v);
        st.M_upper = std::max(st.M_upper, std::abs(v));
        st.m_plus = std::min(st.m_plus, std::max(v, 0.0));
        st.M_plus = std::max(st.M_plus, std::max(v, 0.0));
    };
    const auto random_direction = [&]() {
        if (d == 1) {
            z[0] = unif(rng) < 0.5 ? -1.0 : 1.0;
            return;
        }
        double n = 0.0;
        for (double& v : z) {
            v = gauss(rng);
            n += v * v;
        }
        n = std::sqrt(n);
        for (double& v : z) v /= n;
    };
    std::vector<double> probes = {lambda * (1.0 + 1e-9)};
    for (double r : b.radial_breakpoints()) {
        if (r > lambda) {
            probes.push_back(r * (1.0 - 1e-9));
            probes.push_back(r * (1.0 + 1e-9));
        }
    }
    for (int i = 0; i < samples; ++i) {
        for (double& v : x) v = -20.0 + 40.0 * unif(rng);
        random_direction();
        const double r = i < static_cast<int>(probes.size()) ? probes[static_cast<std::size_t>(i)]
                                                               : lambda * std::pow(10.0, 4.0 * unif(rng)) * (1.0 + 1e-12);
        for (double& v : z) v *= r;
        record(b(x, z));
    }
    if (samples <= 0) st.m_lower = st.m_plus = 0.0;
    return st;
}

BFunction scale_b(const BFunction& b, const ModelParams& params, double lambda) {
    params.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("scale_b: lambda must be positive");
    const double amp = std::pow(lambda, params.beta / params.alpha - 1.0);
    const double shrink = std::pow(lambda, -1.0 / params.alpha);
    std::ostringstream os;
    os << b.id() << "@scale" << lambda;
    if (b.is_zero()) {
        BFunction z = BFunction::zero();
        return z;
    }
    if (b.is_separable()) {
        std::vector<SeparableTerm> terms;
        for (const SeparableTerm& t : b.terms()) {
            SeparableTerm s;
            if (t.constant_in_x()) {
                s.u_value = amp * t.u_value;
            } else {
                s.u = [u = t.u, amp, shrink](std::span<const double> x) {
                    std::vector<double> y(x.begin(), x.end());
                    for (double& v : y) v *= shrink;
                    return amp * u(y);
                };
                s.u_sup = amp * t.u_sup;
            }
            std::vector<PowerPiece> pieces;
            for (const PowerPiece& p : t.profile.pieces()) {
                pieces.push_back({p.coeff * std::pow(shrink, p.exponent), p.exponent, p.inner / shrink, p.outer / shrink});
            }
            s.profile = RadialProfile(std::move(pieces));
            terms.push_back(std::move(s));
        }
        return BFunction::separable(std::move(terms), os.str());
    }
    auto eval = [b, amp, shrink](std::span<const double> x, std::span<const double> z) {
        std::vector<double> xs(x.begin(), x.end()), zs(z.begin(), z.end());
        for (double& v : xs) v *= shrink;
        for (double& v : zs) v *= shrink;
        return amp * b(xs, zs);
    };
    return BFunction::from_function(eval, amp * b.sup_norm(), os.str(), params.d);
}

BFunction hat_b(const BFunction& b, double lambda, int dim) {
    if (!(lambda > 0.0)) throw std::invalid_argument("hat_b: lambda must be positive");
    std::ostringstream os;
    os << "hat(" << b.id() << "," << lambda << ")";
    if (b.is_zero()) {
        BFunction z = BFunction::zero();
        return z;
    }
    if (b.is_separable() && b.terms().size() == 1) {
        const SeparableTerm& t = b.terms().front();
        const bool u_nonneg = t.constant_in_x() ? t.u_value >= 0.0 : t.u_nonnegative;
        const bool u_nonpos = t.constant_in_x() && t.u_value <= 0.0;
        if ((u_nonneg || u_nonpos) && !pieces_overlap(t.profile)) {
            SeparableTerm s = t;
            s.profile = split_profile(t.profile, lambda, true, u_nonneg);
            return BFunction::separable({s}, os.str());
        }
    }
    auto eval = [b, lambda](std::span<const double> x, std::span<const double> z) {
        const double v = b(x, z);
        return norm(z) <= lambda ? v : std::max(v, 0.0);
    };
    return BFunction::from_function(eval, b.sup_norm(), os.str(), dim);
}

}  // namespace nlpert
