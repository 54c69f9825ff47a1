#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "nlpert/mc_simulator.hpp"
#include "nlpert/parallel.hpp"
#include "nlpert/stable_kernels.hpp"

using namespace nlpert;
namespace bq = boost::math::quadrature;

namespace {

const ModelParams kP{1, 1.2, 0.6};

double a_const(double g) {
    return g * std::pow(2.0, g - 1.0) * std::tgamma((1 + g) / 2.0) / (std::sqrt(std::numbers::pi) * std::tgamma(1.0 - g / 2.0));
}

}  // namespace

TEST_CASE("stable samples have the characteristic function exp(-t|xi|^alpha)") {
    Rng rng = path_rng(3, 0);
    for (double alpha : {0.6, 1.0, 1.2, 1.7}) {
        std::vector<double> xs(200000);
        for (double& x : xs) x = sample_stable(alpha, 0.5, rng);
        for (double xi : {0.5, 1.0, 2.0}) {
            const auto [mean, se] = ecf_cos(xs, xi);
            CAPTURE(alpha);
            CAPTURE(xi);
            CHECK(std::abs(mean - std::exp(-0.5 * std::pow(xi, alpha))) < 4 * se + 1e-4);
        }
    }
}

TEST_CASE("isotropic samples in d = 3") {
    Rng rng = path_rng(4, 0);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    const double xi = 1.0;
    for (int k = 0; k < n; ++k) {
        const auto v = sample_stable_isotropic(1.5, 1.0, 3, rng);
        const double c = std::cos(xi * v[1]);
        sum += c;
        sum2 += c * c;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(mean - std::exp(-1.0)) < 4 * se);
}

TEST_CASE("positive stable Laplace transform") {
    Rng rng = path_rng(5, 0);
    const int n = 200000;
    std::vector<double> s(n);
    for (double& v : s) v = sample_positive_stable(0.6, 1.0, rng);
    for (double u : {0.5, 1.0, 3.0}) {
        double sum = 0.0, sum2 = 0.0;
        for (double v : s) {
            const double e = std::exp(-u * v);
            sum += e;
            sum2 += e * e;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / n);
        CHECK(std::abs(mean - std::exp(-std::pow(u, 0.6))) < 4 * se);
    }
}

TEST_CASE("streams are determined by seed and path index") {
    Rng a = path_rng(7, 11), b = path_rng(7, 11), c = path_rng(7, 12), d = path_rng(8, 11);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}

TEST_CASE("ensembles do not depend on the worker count") {
    SimConfig cfg;
    cfg.n_paths = 2000;
    cfg.horizon = 0.1;
    cfg.record_times = {0.1};
    cfg.seed = 21;
    const auto c = sde_coefficient("1/(1+x^2)", kP);
    set_thread_count(1);
    const PathEnsemble one = simulate_sde(c.c, c.label, kP, cfg);
    set_thread_count(3);
    const PathEnsemble three = simulate_sde(c.c, c.label, kP, cfg);
    set_thread_count(0);
    CHECK(one.positions_at(0.1) == three.positions_at(0.1));
    CHECK(one.alpha_jumps == three.alpha_jumps);
}

TEST_CASE("constant coefficient matches p_a") {
    SimConfig cfg;
    cfg.n_paths = 40000;
    cfg.horizon = 0.25;
    cfg.record_times = {0.25};
    const auto c = sde_coefficient("const:1", kP);
    const PathEnsemble e = simulate_sde(c.c, c.label, kP, cfg);
    const auto edges = uniform_edges(-6, 6, 48);
    const Histogram h = empirical_density(e, 0.25, edges);
    const auto model = bin_probabilities([](double x) { return eval_pa(kP, 1.0, 0.25, std::abs(x)); }, edges);
    const DensityComparison cmp = compare_density(h, model);
    CHECK(cmp.tv < 0.03);
    CHECK(cmp.max_z < 5.0);
}

TEST_CASE("coefficient parsing") {
    CHECK(sde_coefficient("const:2", kP).c(5.0) == 2.0);
    CHECK(sde_coefficient("constant:0.5", kP).c(1.0) == doctest::Approx(std::pow(0.5, 1 / 0.6)));
    CHECK(sde_coefficient("sde:1/(1+x^2)", kP).c(1.0) == doctest::Approx(0.5));
    CHECK(sde_coefficient("2*x", kP).c(1.5) == doctest::Approx(3.0));
    CHECK(sde_coefficient("const:0", kP).zero);
    CHECK_THROWS_AS(sde_coefficient("1/(1+", kP), std::invalid_argument);
}

TEST_CASE("bin probabilities of the Cauchy density") {
    const auto edges = uniform_edges(-2, 2, 4);
    const auto pr = bin_probabilities([](double x) { return 1.0 / (std::numbers::pi * (1 + x * x)); }, edges);
    for (std::size_t k = 0; k < pr.size(); ++k) {
        const double exact = (std::atan(edges[k + 1]) - std::atan(edges[k])) / std::numbers::pi;
        CHECK(pr[k] == doctest::Approx(exact).epsilon(1e-9));
    }
}

TEST_CASE("histogram and total variation") {
    const Histogram h = histogram({-0.5, 0.5, 0.5, 3.0}, {-1, 0, 1});
    CHECK(h.probability[0] == 0.25);
    CHECK(h.probability[1] == 0.5);
    CHECK(h.outside == 0.25);
    const DensityComparison cmp = compare_density(h, {0.5, 0.5});
    CHECK(cmp.tv == doctest::Approx(0.5 * (0.25 + 0.0) + 0.5 * 0.25));
}

TEST_CASE("Kolmogorov-Smirnov") {
    CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0505).epsilon(0.01));
    CHECK(kolmogorov_survival(0.0) == 1.0);
    Rng rng = path_rng(9, 0);
    std::normal_distribution<double> n01;
    std::vector<double> a(5000), b(5000), c(5000);
    for (double& v : a) v = n01(rng);
    for (double& v : b) v = n01(rng);
    for (double& v : c) v = n01(rng) + 0.2;
    CHECK(ks_two_sample(a, b).p_value > 0.001);
    CHECK(ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("Meyer added jumps: intensity and radius law") {
    const BFunction b = BFunction::zero();
    const BFunction b_hat = BFunction::truncated(0.0, 1.0, 1.0);
    const MeyerAugmentation aug = MeyerAugmentation::from_coefficients(b, b_hat, kP, 1.0);
    // 2 A(1, -beta) int_1^inf r^{-1-beta} dr
    CHECK(aug.intensity() == doctest::Approx(2 * a_const(0.6) / 0.6).epsilon(1e-9));
    Rng rng = path_rng(10, 0);
    const int n = 100000;
    int above = 0;
    for (int k = 0; k < n; ++k) above += aug.sample_radius(rng) > 3.0;
    const double p = std::pow(3.0, -0.6);
    CHECK(std::abs(above / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
    CHECK(MeyerAugmentation::from_coefficients(b, b, kP, 1.0).empty());
    // difference that does not vanish near the origin
    CHECK_THROWS_AS(MeyerAugmentation::from_coefficients(b, BFunction::constant(1.0), kP, 1.0), std::invalid_argument);
    // negative added intensity
    CHECK_THROWS_AS(MeyerAugmentation::from_coefficients(b, BFunction::truncated(0.0, -1.0, 1.0), kP, 1.0),
                    std::invalid_argument);
}

TEST_CASE("jump rate into an interval against Gauss-Kronrod") {
    const Interval to{2.0, 3.0};
    for (double c : {0.0, 0.5, 1.0}) {
        const double oracle = bq::gauss_kronrod<double, 31>::integrate(
            [c](double y) {
                const double r = std::abs(y + 0.5);
                return a_const(1.2) * std::pow(r, -2.2) + a_const(0.6) * std::pow(c, 0.6) * std::pow(r, -1.6);
            },
            2.0, 3.0, 8, 1e-12);
        CHECK(jump_rate_into(kP, c, -0.5, to) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("Levy system counts agree with the compensator") {
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.horizon = 1.0;
    cfg.levy = {{{-1.0, 0.0}, {2.0, 3.0}}};
    const auto c = sde_coefficient("const:1", kP);
    const PathEnsemble e = simulate_sde(c.c, c.label, kP, cfg);
    const ZScore z = levy_system_check(e, 0);
    CHECK(std::abs(z.z) < 4.0);
    CHECK(z.predicted > 0.0);
}

TEST_CASE("exit probability grows with time") {
    SimConfig cfg;
    cfg.n_paths = 5000;
    cfg.horizon = 0.5;
    cfg.exit_radii = {1.0};
    const auto c = sde_coefficient("const:1", kP);
    const PathEnsemble e = simulate_sde(c.c, c.label, kP, cfg);
    CHECK(exit_probability(e, 0, 0.1).probability < exit_probability(e, 0, 0.5).probability);
}

TEST_CASE("configuration errors") {
    SimConfig cfg;
    cfg.n_paths = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SimConfig{};
    cfg.dt = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
