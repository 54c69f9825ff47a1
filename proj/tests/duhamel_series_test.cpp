#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <cmath>
#include <numbers>

#include "nlpert/duhamel_series.hpp"
#include "nlpert/stable_kernels.hpp"

using namespace nlpert;
namespace bq = boost::math::quadrature;

namespace {

const ModelParams kP{1, 1.2, 0.6};

SpaceTimeGrid small_grid(int N = 256, double t_max = 0.25, int M = 32) {
    SpaceTimeGrid g;
    g.L = 16.0;
    g.N = N;
    g.t_max = t_max;
    g.M = M;
    return g;
}

double cos_transform(const std::function<double(double)>& f, double r) {
    if (r == 0.0) {
        bq::exp_sinh<double> es;
        return es.integrate(f) / std::numbers::pi;
    }
    bq::ooura_fourier_cos<double> oc(1e-13);
    return oc.integrate(f, r).first / std::numbers::pi;
}

}  // namespace

TEST_CASE("grid bookkeeping") {
    const SpaceTimeGrid g = small_grid();
    CHECK(g.h() == doctest::Approx(0.125));
    CHECK(g.time_index(0.125) == 16);
    CHECK_THROWS_AS(g.time_index(0.1), std::invalid_argument);
    CHECK(g.node_index(0.0) == 128);
    SpaceTimeGrid bad = g;
    bad.N = 255;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = g;
    bad.t_max = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("b = 0 gives term 0 exactly") {
    const SpaceTimeGrid g = small_grid();
    const SeriesResult r = sum_series(BFunction::zero(), kP, g);
    const KernelField p0 = p0_field(kP, g, "zero", true);
    for (std::size_t s = 0; s < r.sum.slots(); ++s) {
        for (int j = 0; j < g.N; j += 7) CHECK(r.sum(static_cast<int>(s), 0, j) == p0(static_cast<int>(s), 0, j));
    }
}

TEST_CASE("constant b reproduces p_a") {
    const SpaceTimeGrid g = small_grid(512, 0.5, 64);
    for (double a : {1.0, 0.5}) {
        const BFunction b = BFunction::constant(a);
        const SeriesResult r = sum_series(b, kP, g);
        const ImageCorrection images(b, kP, g);
        CHECK(r.report.converged);
        for (double t : {0.125, 0.5}) {
            const int slot = r.sum.slot_of_time(t);
            for (int off = 0; off * g.h() <= 4.0; off += 3) {
                const double exact = eval_pa(kP, a, t, off * g.h());
                if (exact <= 1e-4) continue;
                CHECK(line_value(r.sum, images, slot, 0, off) == doctest::Approx(exact).epsilon(1e-2));
            }
        }
    }
}

TEST_CASE("first and second terms against the Fourier oracle") {
    const SpaceTimeGrid g = small_grid(512, 0.5, 64);
    const BFunction b = BFunction::constant(1.0);
    SeriesOptions so;
    so.keep_terms = {1, 2};
    const SeriesResult r = sum_series(b, kP, g, so);
    const ImageCorrection images(b, kP, g);
    for (int n : {1, 2}) {
        for (double t : {0.25, 0.5}) {
            const int slot = r.terms.at(n).slot_of_time(t);
            for (int off : {0, 4, 16}) {
                const double oracle = cos_transform(
                    [&](double xi) {
                        return std::pow(-t * std::pow(xi, 0.6), n) / std::tgamma(n + 1.0) * std::exp(-t * std::pow(xi, 1.2));
                    },
                    off * g.h());
                CAPTURE(n);
                CAPTURE(t);
                CAPTURE(off);
                CHECK(line_value(r.terms.at(n), images, slot, 0, off) == doctest::Approx(oracle).epsilon(1e-2));
            }
        }
    }
}

TEST_CASE("x-dependent coefficient: mass, Chapman-Kolmogorov and Duhamel identities") {
    const SpaceTimeGrid g = small_grid(128, 0.25, 32);
    const BFunction b = make_preset("sde:1/(1+x^2)", kP);
    const SeriesResult r = sum_series(b, kP, g);
    const double sup = r.sum.sup_abs();
    CHECK(r.report.mass_defect < 1e-8);
    for (std::size_t n = 1; n < r.report.term_masses.size(); ++n) CHECK(r.report.term_masses[n] < 1e-8);
    CHECK(chapman_kolmogorov_residual(r.sum, 0.125, 0.125) < 1e-8 * sup);
    const ResidualFields res = duhamel_residuals(r.sum, b);
    CHECK(res.forward_sup < 1e-8 * sup);
    CHECK(res.backward_sup < 1e-2 * sup);
    const KernelField q = extend_time(r.sum, 0.25, 0.125);
    const int slot_q = q.slot_of_time(0.25);
    const int slot_r = r.sum.slot_of_time(0.25);
    for (int j = 0; j < g.N; j += 5) CHECK(q(slot_q, 40, j) == doctest::Approx(r.sum(slot_r, 40, j)).epsilon(1e-8));
}

TEST_CASE("semigroup on constants and the generator identity") {
    const SpaceTimeGrid g = small_grid(256, 0.25, 32);
    const BFunction b = make_preset("sde:1/(1+x^2)", kP);
    const SeriesResult r = sum_series(b, kP, g);
    const std::vector<double> ones(static_cast<std::size_t>(g.N), 1.0);
    for (double v : semigroup_apply(r.sum, ones, 0.25)) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
    const double res = generator_identity_check(r.sum, b, [](double x) { return std::exp(-x * x); }, 0.125);
    CHECK(res < 1e-2);
}

TEST_CASE("periodic bin integrals against Gauss-Kronrod on p_a") {
    const SpaceTimeGrid g = small_grid(512, 0.25, 64);
    const BFunction b = BFunction::constant(1.0);
    SeriesOptions so;
    so.keep_all_times = false;
    so.record_times = {0.25};
    const SeriesResult r = sum_series(b, kP, g, so);
    const ImageCorrection images(b, kP, g);
    std::vector<double> edges;
    for (int k = 0; k <= 40; ++k) edges.push_back(-8.0 + 0.4 * k);
    const std::vector<double> bins = row_bin_integrals(r.sum, &images, r.sum.slot_of_time(0.25), g.node_index(0.0), edges);
    double l1 = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double oracle = bq::gauss_kronrod<double, 31>::integrate(
            [](double x) { return eval_pa(kP, 1.0, 0.25, std::abs(x)); }, edges[k], edges[k + 1], 10, 1e-10);
        l1 += std::abs(bins[k] - oracle);
    }
    CHECK(l1 < 1e-3);
}

TEST_CASE("scaling identity and envelope for constant b") {
    const SpaceTimeGrid g = small_grid(256, 0.25, 32);
    CHECK(scaling_equivalence_check(BFunction::constant(1.0), kP, 2.0, g) < 1e-3);
    const SeriesResult r0 = sum_series(BFunction::zero(), kP, g);
    const EnvelopeReport e = envelope_report(r0.sum, BFunction::zero(), 1.0, 1.0 / 16, 0.25, 2.0);
    CHECK(e.inf_ratio_p0 == doctest::Approx(1.0));
    CHECK(e.sup_ratio_p0 == doctest::Approx(1.0));
}

TEST_CASE("divergence is detected with a horizon estimate") {
    SpaceTimeGrid g = small_grid(128, 50.0, 32);
    try {
        sum_series(BFunction::constant(1.0), kP, g);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.horizon_estimate() > 0.1);
        CHECK(e.horizon_estimate() < 50.0);
    }
    // T* = t_max (0.5 / r)^{alpha / (alpha - beta)}
    CHECK(horizon_from_ratio(kP, 1.0, 0.25) == doctest::Approx(4.0));
    CHECK(horizon_from_ratio(kP, 2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("S^b p_0 on nodes against the operator quadrature") {
    const BFunction b = make_preset("sde:1/(1+x^2)", kP);
    const std::vector<double> z{-1.0, 0.0, 0.5, 2.0};
    const std::vector<double> v = sb_p0_field(b, kP, 0.2, 0.3, z);
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double direct = apply_Sb_1d(b, kP, [](double w) { return eval_p0(kP, 0.2, std::abs(w - 0.3)); }, z[k]);
        CHECK(v[k] == doctest::Approx(direct).epsilon(1e-6));
    }
}
