#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "nlpert/nonlocal_operator.hpp"

using namespace nlpert;
namespace bq = boost::math::quadrature;

namespace {

double constant_oracle(int d, double g) {
    return g * std::pow(2.0, g - 1.0) * std::tgamma((d + g) / 2.0) /
           (std::pow(std::numbers::pi, d / 2.0) * std::tgamma(1.0 - g / 2.0));
}

double gaussian(double x) { return std::exp(-x * x); }

// Delta^{g/2} e^{-x^2} = -(1/pi) int_0^inf xi^g sqrt(pi) e^{-xi^2/4} cos(xi x) d xi
double frac_laplacian_gaussian(double g, double x) {
    const auto f = [g](double xi) { return std::pow(xi, g) * std::sqrt(std::numbers::pi) * std::exp(-xi * xi / 4); };
    if (x == 0.0) {
        bq::exp_sinh<double> es;
        return -es.integrate(f) / std::numbers::pi;
    }
    bq::ooura_fourier_cos<double> oc(1e-13);
    return -oc.integrate(f, x).first / std::numbers::pi;
}

}  // namespace

TEST_CASE("normalizing constant") {
    for (int d : {1, 2, 3}) {
        for (double g : {0.3, 0.6, 1.0, 1.2, 1.7}) {
            CAPTURE(d);
            CAPTURE(g);
            CHECK(normalizing_constant(d, g) == doctest::Approx(constant_oracle(d, g)).epsilon(1e-8));
            CHECK(normalizing_constant_closed_form(d, g) == doctest::Approx(constant_oracle(d, g)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(normalizing_constant(1, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(normalizing_constant(0, 1.0), std::invalid_argument);
}

TEST_CASE("phi_gamma against tanh-sinh") {
    bq::tanh_sinh<double> ts;
    for (double g : {0.4, 1.1, 1.8}) {
        const double oracle = ts.integrate(
            [g](double v) {
                const double s = v > 1e-8 ? std::sin(v / 2) / (v / 2) : 1.0;
                return s * s * std::pow(v, 1 - g) / 2;
            }, 0.0, 3.0);
        CHECK(phi_gamma(g, 3.0) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("fractional Laplacian of a Gaussian against the Fourier oracle") {
    for (double g : {0.6, 1.2}) {
        for (double x : {0.0, 0.5, 2.0}) {
            CAPTURE(g);
            CAPTURE(x);
            CHECK(apply_frac_laplacian_1d(g, gaussian, x) ==
                  doctest::Approx(frac_laplacian_gaussian(g, x)).epsilon(1e-7));
        }
    }
}

TEST_CASE("S^b for constant b is a multiple of the beta Laplacian") {
    const ModelParams p{1, 1.2, 0.6};
    for (double x : {0.0, 0.7}) {
        CHECK(apply_Sb_1d(BFunction::constant(1.0), p, gaussian, x) ==
              doctest::Approx(apply_frac_laplacian_1d(0.6, gaussian, x)).epsilon(1e-9));
        CHECK(apply_Sb_1d(BFunction::constant(0.4), p, gaussian, x) ==
              doctest::Approx(0.4 * frac_laplacian_gaussian(0.6, x)).epsilon(1e-7));
        CHECK(apply_Sb_1d(BFunction::zero(), p, gaussian, x) == 0.0);
    }
}

TEST_CASE("S^b for the sde coefficient is |c(x)|^beta times the beta Laplacian") {
    const ModelParams p{1, 1.2, 0.6};
    const BFunction b = make_preset("sde:1/(1+x^2)", p);
    for (double x : {0.0, 1.0, -2.0}) {
        const double c = 1.0 / (1.0 + x * x);
        CHECK(apply_Sb_1d(b, p, gaussian, x) ==
              doctest::Approx(std::pow(c, 0.6) * frac_laplacian_gaussian(0.6, x)).epsilon(1e-7));
    }
}

TEST_CASE("S^b for the far-jump coefficient against direct integration") {
    const ModelParams p{1, 1.2, 0.6};
    const BFunction b = make_preset("truncated:0,1,1", p);
    bq::exp_sinh<double> es;
    for (double x : {0.0, 0.8}) {
        const double integral = es.integrate(
            [x](double z) { return (gaussian(x + z) + gaussian(x - z) - 2 * gaussian(x)) * std::pow(z, -1.6); }, 1.0,
            std::numeric_limits<double>::infinity());
        CHECK(apply_Sb_1d(b, p, gaussian, x) == doctest::Approx(constant_oracle(1, 0.6) * integral).epsilon(1e-7));
    }
}

TEST_CASE("compensated and symmetric forms agree") {
    const ModelParams p{1, 1.2, 0.6};
    const BFunction b = make_preset("truncated:0.5,0.2,1", p);
    const double x = 0.3;
    const double fprime = -2 * x * gaussian(x);
    CHECK(apply_Sb_compensated_1d(b, p, gaussian, fprime, x, 1.0) ==
          doctest::Approx(apply_Sb_1d(b, p, gaussian, x)).epsilon(1e-7));
}

TEST_CASE("radial symbol of the far-jump profile") {
    const ModelParams p{1, 1.2, 0.6};
    const BFunction b = make_preset("truncated:0,1,1", p);
    const RadialProfile& g = b.terms().at(0).profile;
    bq::ooura_fourier_cos<double> oc(1e-13);
    bq::ooura_fourier_sin<double> os(1e-13);
    for (double xi : {0.3, 1.0, 4.0}) {
        const auto w = [](double u) { return std::pow(u + 1.0, -1.6); };
        const double cos_part = std::cos(xi) * oc.integrate(w, xi).first - std::sin(xi) * os.integrate(w, xi).first;
        const double oracle = 2 * constant_oracle(1, 0.6) * (cos_part - 1.0 / 0.6);
        CHECK(radial_symbol(g, p, xi) == doctest::Approx(oracle).epsilon(1e-7));
    }
    const RadialProfile one = BFunction::constant(0.7).terms().at(0).profile;
    CHECK(radial_symbol(one, p, 2.0) == doctest::Approx(-0.7 * std::pow(2.0, 0.6)).epsilon(1e-9));
}

TEST_CASE("critical negative coefficient annihilates the far kernel") {
    const ModelParams p{1, 1.2, 0.6};
    const BFunction b = BFunction::critical_negative(p, 0.5);
    const std::vector<double> x{0.3};
    for (double z : {0.7, 2.0, 30.0}) {
        const std::vector<double> zv{z};
        CHECK(std::abs(jb_kernel(b, p, x, zv)) < 1e-12 * normalizing_constant(1, 1.2) * std::pow(z, -2.2));
    }
    const std::vector<double> zin{0.2};
    CHECK(jb_kernel(b, p, x, zin) == doctest::Approx(normalizing_constant(1, 1.2) * std::pow(0.2, -2.2)));
    const std::vector<double> y{1.3};
    CHECK(Jb_kernel(b, p, x, y) == doctest::Approx(jb_kernel(b, p, x, std::vector<double>{1.0})));
}

TEST_CASE("positivity and lower-kernel conditions") {
    const ModelParams p{1, 1.2, 0.6};
    std::vector<double> xs{-1.0, 0.0, 2.0};
    std::vector<double> zs;
    for (int k = 1; k <= 200; ++k) zs.push_back(std::pow(10.0, -3.0 + 6.0 * k / 200.0));
    CHECK_FALSE(check_positivity_condition(BFunction::constant(-1.0), p, xs, zs).holds);
    CHECK(check_positivity_condition(BFunction::constant(1.0), p, xs, zs).holds);
    CHECK(check_positivity_condition(BFunction::critical_negative(p, 0.5), p, xs, zs).holds);
    CHECK(check_lower_kernel_condition(make_preset("truncated:0.5,0,1", p), p, 2.0, xs, zs));
    // unbounded ratio: a constant b against |z|^{beta - alpha} fails for large z
    CHECK_FALSE(check_lower_kernel_condition(BFunction::constant(1.0), p, 2.0, xs, zs));
    const std::vector<double> x{0.0}, z{2.0};
    CHECK(lower_kernel_ratio(BFunction::zero(), p, x, z) == doctest::Approx(normalizing_constant(1, 1.2)));
}

TEST_CASE("scaling and hat transforms") {
    const ModelParams p{1, 1.2, 0.6};
    const BFunction b = make_preset("sde:1/(1+x^2)", p);
    const double lam = 2.0;
    const BFunction s = scale_b(b, p, lam);
    for (double x : {0.0, 1.5}) {
        for (double z : {0.3, 4.0}) {
            const double k = std::pow(lam, -1.0 / 1.2);
            CHECK(s.eval1(x, z) == doctest::Approx(std::pow(lam, 0.5 - 1.0) * b.eval1(k * x, k * z)));
        }
    }
    const BFunction h = hat_b(BFunction::constant(-1.0), 1.0);
    CHECK(h.eval1(0.0, 0.5) == -1.0);
    CHECK(h.eval1(0.0, 1.5) == 0.0);
    const TailStats st = tail_stats(make_preset("truncated:-0.3,0.4,1", p), p, 1.0, 2000);
    CHECK(st.m_lower == doctest::Approx(0.4));
    CHECK(st.M_upper == doctest::Approx(0.4));
}

TEST_CASE("coefficient construction errors") {
    const ModelParams p{1, 1.2, 0.6};
    CHECK_THROWS_AS(make_preset("banana:1", p), std::invalid_argument);
    CHECK_THROWS_AS(make_preset("constant:x", p), std::invalid_argument);
    CHECK_THROWS_AS(make_preset("truncated:1,2", p), std::invalid_argument);
    CHECK_THROWS_AS(make_preset("critical-negative:0", p), std::invalid_argument);
    const auto asym = [](std::span<const double>, std::span<const double> z) { return z[0] > 0 ? 1.0 : 0.0; };
    CHECK_THROWS_AS(BFunction::from_function(asym, 1.0, "asym", 1, SymmetryPolicy::Reject), std::invalid_argument);
    const BFunction sym = BFunction::from_function(asym, 1.0, "asym", 1, SymmetryPolicy::Symmetrize);
    CHECK(sym.eval1(0.0, 0.5) == doctest::Approx(0.5));
    CHECK(sym.eval1(0.0, -0.5) == doctest::Approx(0.5));
}
