#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "nlpert/stable_kernels.hpp"

using namespace nlpert;
namespace bq = boost::math::quadrature;

namespace {

// (1/pi) int_0^inf g(xi) cos(xi r) d xi
double cos_transform(const std::function<double(double)>& g, double r) {
    if (r == 0.0) {
        bq::exp_sinh<double> es;
        return es.integrate(g) / std::numbers::pi;
    }
    static bq::ooura_fourier_cos<double> oc(1e-13);
    return oc.integrate(g, r).first / std::numbers::pi;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("Cauchy density for alpha = 1") {
    const ModelParams p{1, 1.0, 0.5};
    for (double t : {0.25, 1.0, 4.0}) {
        for (double x = 0.0; x <= 8.0; x += 0.5) {
            CHECK(rel(eval_p0(p, t, x), t / (std::numbers::pi * (t * t + x * x))) < 1e-10);
        }
    }
}

TEST_CASE("p0 against a Fourier cosine oracle") {
    for (double alpha : {0.7, 1.2, 1.8}) {
        const ModelParams p{1, alpha, alpha / 2};
        for (double t : {0.1, 1.0}) {
            for (double r : {0.0, 0.3, 1.0, 3.0, 10.0}) {
                const double oracle = cos_transform([&](double xi) { return std::exp(-t * std::pow(xi, alpha)); }, r);
                CAPTURE(alpha);
                CAPTURE(t);
                CAPTURE(r);
                CHECK(rel(eval_p0(p, t, r), oracle) < 1e-7);
            }
        }
    }
}

TEST_CASE("p_a against a Fourier cosine oracle") {
    const ModelParams p{1, 1.2, 0.6};
    for (double a : {0.0, 0.5, 1.0}) {
        for (double r : {0.0, 0.5, 2.0, 6.0}) {
            const double oracle = cos_transform(
                [&](double xi) { return std::exp(-0.5 * (std::pow(xi, 1.2) + a * std::pow(xi, 0.6))); }, r);
            CHECK(rel(eval_pa(p, a, 0.5, r), oracle) < 1e-7);
        }
    }
}

TEST_CASE("p_0 in three dimensions from the radial sine transform") {
    const ModelParams p{3, 1.5, 0.5};
    bq::ooura_fourier_sin<double> os(1e-13);
    for (double r : {0.5, 1.0, 2.5}) {
        const double oracle =
            os.integrate([](double xi) { return xi * std::exp(-std::pow(xi, 1.5)); }, r).first /
            (2.0 * std::numbers::pi * std::numbers::pi * r);
        CHECK(rel(eval_p0(p, 1.0, r), oracle) < 1e-7);
    }
}

TEST_CASE("fourier_moment_1d against the oracle") {
    for (double power : {0.6, 1.2}) {
        for (double r : {0.0, 0.4, 2.0}) {
            const double oracle =
                cos_transform([&](double xi) { return std::pow(xi, power) * std::exp(-0.25 * std::pow(xi, 1.2)); }, r);
            CHECK(std::abs(fourier_moment_1d(1.2, 0.25, power, r) - oracle) < 1e-8 * (1.0 + std::abs(oracle)));
        }
    }
}

TEST_CASE("p0 has unit mass") {
    const ModelParams p{1, 1.2, 0.6};
    bq::exp_sinh<double> es;
    const double mass = 2.0 * es.integrate([&](double r) { return eval_p0(p, 1.0, r); });
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("self-similarity p0(t, x) = t^{-1/alpha} p0(1, t^{-1/alpha} x)") {
    const ModelParams p{1, 1.4, 0.7};
    for (double t : {0.05, 0.5, 3.0}) {
        for (double x : {0.0, 0.2, 1.7, 9.0}) {
            const double s = std::pow(t, -1.0 / 1.4);
            CHECK(rel(eval_p0(p, t, x), s * eval_p0(p, 1.0, s * x)) < 1e-9);
            const std::vector<double> xv{x};
            CHECK(scaling_check_p0(p, 2.0, t, xv) < 1e-9 * eval_p0(p, t, x) + 1e-15);
        }
    }
}

TEST_CASE("gradient and Hessian match central differences") {
    const ModelParams p{1, 1.2, 0.6};
    const double h = 1e-4;
    for (double x : {0.3, 1.0, 2.5}) {
        const std::vector<double> xv{x};
        const double fd = (eval_p0(p, 1.0, x + h) - eval_p0(p, 1.0, x - h)) / (2 * h);
        CHECK(grad_p0(p, 1.0, xv)[0] == doctest::Approx(fd).epsilon(1e-6));
        const double fd2 = (eval_p0(p, 1.0, x + h) - 2 * eval_p0(p, 1.0, x) + eval_p0(p, 1.0, x - h)) / (h * h);
        CHECK(hess_p0(p, 1.0, xv)[0] == doctest::Approx(fd2).epsilon(1e-4));
    }
}

TEST_CASE("large-argument tail behaves like t A / |x|^{1+alpha}") {
    const ModelParams p{1, 1.2, 0.6};
    const double lead = std::tgamma(2.2) * std::sin(0.6 * std::numbers::pi) / std::numbers::pi;
    CHECK(rel(eval_p0(p, 1.0, 1e4) * std::pow(1e4, 2.2), lead) < 1e-3);
}

TEST_CASE("table agrees with direct inversion") {
    const auto table = StableDensityTable::get(1.2);
    const ModelParams p{1, 1.2, 0.6};
    for (double r : {0.0, 0.01, 0.7, 3.0, 25.0, 400.0}) {
        CHECK(rel(table->p0(0.3, r), eval_p0(p, 0.3, r)) < 1e-7);
    }
}

TEST_CASE("comparison functions") {
    const ModelParams p{1, 1.2, 0.6};
    // f_0 = (t^{1/alpha} v |x-y|)^{-(d+beta)}
    CHECK(comparison_f0(p, 1.0, 0.5) == doctest::Approx(1.0));
    CHECK(comparison_f0(p, 1.0, 2.0) == doctest::Approx(std::pow(2.0, -1.6)));
    // h_a and g_a are positive and decrease in r
    const ComparisonWeight w{1.0, std::numeric_limits<double>::infinity()};
    CHECK(comparison_h(p, w, 1.0, 1.0) > comparison_h(p, w, 1.0, 2.0));
    CHECK(comparison_g(p, 1.0, 1.0, 1.0) > comparison_g(p, 1.0, 1.0, 2.0));
    const auto env = truncated_envelope(p, 1.0, 0.5);
    CHECK(env.lower <= env.upper);
}

TEST_CASE("invalid input") {
    CHECK_THROWS_AS(eval_p0(ModelParams{1, 1.2, 0.6}, -1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(eval_p0(ModelParams{1, 2.2, 0.6}, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(eval_p0(ModelParams{1, 1.2, 1.3}, 1.0, 0.0), std::invalid_argument);
}
