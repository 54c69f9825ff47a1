#include "nlpert/quadrature.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace nlpert::quad {

namespace {

// Kronrod abscissae on [0,1] (QUADPACK qk15); odd indices are the Gauss points.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace

Result gauss_kronrod15(const std::function<double(double)>& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double resk = fc * kWgk[7];
    double resg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double sum = f(center - dx) + f(center + dx);
        resk += kWgk[j] * sum;
        if (j % 2 == 1) resg += kWg[j / 2] * sum;
    }
    Result r;
    r.value = resk * half;
    r.error = std::abs((resk - resg) * half);
    r.evaluations = 15;
    return r;
}

Result adaptive(const std::function<double(double)>& f, double a, double b, const Tolerance& tol) {
    struct Segment {
        double a, b;
        int depth;
    };
    Result total;
    std::vector<Segment> stack{{a, b, 0}};
    while (!stack.empty()) {
        const Segment s = stack.back();
        stack.pop_back();
        const Result r = gauss_kronrod15(f, s.a, s.b);
        total.evaluations += r.evaluations;
        const double target = std::max(tol.abs, tol.rel * std::abs(r.value));
        if (r.error <= target || s.depth >= tol.max_depth || !std::isfinite(r.value)) {
            total.value += r.value;
            total.error += r.error;
            continue;
        }
        const double mid = 0.5 * (s.a + s.b);
        stack.push_back({mid, s.b, s.depth + 1});
        stack.push_back({s.a, mid, s.depth + 1});
    }
    return total;
}

Result panels(const std::function<double(double)>& f, std::span<const double> breaks, const Tolerance& tol) {
    Result total;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] <= breaks[i]) continue;
        const Result r = adaptive(f, breaks[i], breaks[i + 1], tol);
        total.value += r.value;
        total.error += r.error;
        total.evaluations += r.evaluations;
    }
    return total;
}

std::vector<double> graded_breaks(double upper, double max_len, int dyadic_levels) {
    if (!(upper > 0.0) || !(max_len > 0.0)) throw std::invalid_argument("graded_breaks: bad range");
    const double first = std::min(max_len, upper);
    std::vector<double> b;
    b.reserve(static_cast<std::size_t>(dyadic_levels) + static_cast<std::size_t>(upper / max_len) + 3);
    b.push_back(0.0);
    for (int k = dyadic_levels; k >= 1; --k) b.push_back(std::ldexp(first, -k));
    b.push_back(first);
    const auto n = static_cast<std::size_t>(std::ceil((upper - first) / max_len));
    for (std::size_t i = 1; i <= n; ++i) {
        b.push_back(i == n ? upper : first + static_cast<double>(i) * max_len);
    }
    return b;
}

double oscillatory_tail(double mu, double x, int phase) {
    if (x < 20.0) throw std::invalid_argument("oscillatory_tail: asymptotic regime needs x >= 20");
    // int_x^inf e^{iv} v^{-mu} dv = i e^{ix} x^{-mu} sum_k (-i)^k (mu)_k x^{-k}
    std::complex<double> sum = 0.0;
    std::complex<double> term = 1.0;
    double last = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 200; ++k) {
        const double mag = std::abs(term);
        if (mag > last) break;
        sum += term;
        if (mag < 1e-18 * std::abs(sum)) break;
        last = mag;
        term *= std::complex<double>(0.0, -1.0) * (mu + k) / x;
    }
    const std::complex<double> value = std::complex<double>(0.0, 1.0) * std::polar(1.0, x) * std::pow(x, -mu) * sum;
    return phase == 0 ? value.real() : value.imag();
}

double shifted_cos_tail(double mu, double x, double shift) {
    return std::cos(shift) * oscillatory_tail(mu, x, 0) + std::sin(shift) * oscillatory_tail(mu, x, 1);
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        nodes[static_cast<std::size_t>(i)] = -z;
        nodes[static_cast<std::size_t>(n - 1 - i)] = z;
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
}

}  // namespace nlpert::quad
