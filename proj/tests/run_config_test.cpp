#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nlpert/run_config.hpp"

using namespace nlpert;

TEST_CASE("parse, override and resolve") {
    RunConfig c = RunConfig::parse(
        "# model\n"
        "model.alpha = 1.2\n"
        "model.beta=0.6\n"
        "\n"
        "grid.N = 256\n"
        "sim.n_paths = 1000\n"
        "sim.horizon = 0.5\n");
    CHECK(c.model() == ModelParams{1, 1.2, 0.6});
    CHECK(c.grid().N == 256);
    CHECK(c.grid().L == 16.0);
    c.set("grid.N", "128");
    CHECK(c.grid().N == 128);
    const SimConfig s = c.sim();
    CHECK(s.n_paths == 1000);
    CHECK(s.record_times == std::vector<double>{0.5});
    CHECK(c.to_json()["grid.N"] == "128");
}

TEST_CASE("beta defaults to half of alpha") {
    RunConfig c;
    c.set("model.alpha", "1");
    CHECK(c.model().beta == 0.5);
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(RunConfig::parse("alpha = 1"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::parse("nosuch.alpha = 1"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::parse("model.alpha"), std::invalid_argument);
    RunConfig c = RunConfig::parse("model.alpha = 1.2x");
    CHECK_THROWS_AS(c.model(), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig().model(), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/config"), std::invalid_argument);
    RunConfig d;
    d.set("kernel.t", "1,2,x");
    CHECK_THROWS_AS(d.get_list("kernel.t", {}), std::invalid_argument);
    d.set("sim.seed", "-3");
    CHECK_THROWS_AS(d.get_u64("sim.seed", 0), std::invalid_argument);
}

TEST_CASE("lists") {
    RunConfig c;
    c.set("kernel.r", "0, 0.5,1");
    CHECK(c.get_list("kernel.r", {}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(c.get_list("kernel.t", {2.0}) == std::vector<double>{2.0});
}
