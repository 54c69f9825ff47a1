#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "nlpert/verification.hpp"

using namespace nlpert;
using nlohmann::json;

namespace {

CheckSpec cauchy() {
    CheckSpec s;
    s.name = "cauchy";
    s.criterion = 1;
    s.kind = "cauchy_closed_form";
    s.params = {1, 1.0, 0.5};
    s.tolerance = 1e-6;
    s.options = {{"times", {1.0}}, {"x_max", 2.0}, {"x_step", 0.5}};
    return s;
}

}  // namespace

TEST_CASE("empty suite") {
    const auto v = run_suite({});
    CHECK(v.empty());
    CHECK(suite_passed(v));
}

TEST_CASE("a passing check records tolerances and oracles") {
    const Verdict v = run_check(cauchy());
    CHECK(v.status == Status::Pass);
    REQUIRE_FALSE(v.measured.empty());
    for (const Measurement& m : v.measured) {
        CHECK_FALSE(m.oracle.empty());
        CHECK(m.relation != "");
    }
    CHECK(v.provenance.contains("options_hash"));
}

TEST_CASE("zero tolerance is unattainable") {
    CheckSpec s = cauchy();
    s.tolerance = 0.0;
    const Verdict v = run_check(s);
    CHECK(v.status == Status::Fail);
    CHECK(v.message.find("tolerance unattainable") != std::string::npos);
}

TEST_CASE("crashing checks become fail verdicts and do not stop the suite") {
    CheckSpec bad = cauchy();
    bad.name = "bad";
    bad.kind = "no_such_kind";
    CheckSpec throwing = cauchy();
    throwing.name = "throwing";
    throwing.kind = "conservativeness";  // missing presets
    const auto v = run_suite({bad, throwing, cauchy()});
    REQUIRE(v.size() == 3);
    CHECK(v[0].status == Status::Fail);
    CHECK(v[1].status == Status::Fail);
    CHECK(v[1].message.find("presets") != std::string::npos);
    CHECK(v[2].status == Status::Pass);
    CHECK_FALSE(suite_passed(v));
}

TEST_CASE("expected violation is reserved for positivity checks") {
    CheckSpec s = cauchy();
    s.expected = Expectation::ExpectedViolation;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    json doc = {{"checks", json::array({{{"name", "x"}, {"kind", "scaling"}, {"expected", "expected-violation"}}})}};
    CHECK_THROWS_AS(parse_suite(doc), std::invalid_argument);
}

TEST_CASE("positivity violation for b = -1 is reported as expected") {
    CheckSpec s;
    s.name = "violation";
    s.kind = "positivity";
    s.tolerance = 1e-3;
    s.expected = Expectation::ExpectedViolation;
    s.options = {{"presets", {"constant:-1"}}, {"offset_max", 8.0},
                 {"grid", {{"L", 16}, {"N", 1024}, {"t_max", 0.25}, {"M", 64}}}};
    const Verdict v = run_check(s);
    CHECK(v.status == Status::Pass);
    s.options["presets"] = {"constant:1"};
    CHECK(run_check(s).status == Status::Fail);
}

TEST_CASE("verdict JSON is reproducible apart from timing") {
    const auto a = to_json(run_suite({cauchy()}), false).dump();
    const auto b = to_json(run_suite({cauchy()}), false).dump();
    CHECK(a == b);
    CHECK(a.find("seconds") == std::string::npos);
    CHECK(a.find("runtime") == std::string::npos);
}

TEST_CASE("default suite covers every acceptance criterion") {
    const auto specs = load_suite(default_suite_path());
    std::set<int> criteria;
    std::set<std::string> names;
    for (const CheckSpec& s : specs) {
        criteria.insert(s.criterion);
        names.insert(s.name);
        CHECK(s.tolerance > 0.0);
    }
    CHECK(criteria.size() == 14);
    CHECK(*criteria.begin() == 1);
    CHECK(*criteria.rbegin() == 14);
    CHECK(names.size() == specs.size());
}

TEST_CASE("suite filtering keeps the full list visible") {
    SuiteOptions o;
    o.only = {"cauchy"};
    CheckSpec other = cauchy();
    other.name = "other";
    const auto v = run_suite({other, cauchy()}, o);
    REQUIRE(v.size() == 1);
    CHECK(v[0].name == "cauchy");
    o.only = {"missing"};
    CHECK_THROWS_AS(run_suite({cauchy()}, o), std::invalid_argument);
}

TEST_CASE("summary table lists every check") {
    const auto v = run_suite({cauchy()});
    const std::string t = summary_table(v);
    CHECK(t.find("cauchy") != std::string::npos);
    CHECK(t.find("pass") != std::string::npos);
}
