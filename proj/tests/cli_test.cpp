#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "nlpert/stable_kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("nlpert-cli-" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(NLPERT_CLI_PATH) + " " + args + " > " + (scratch() / "stdout").string() +
                            " 2> " + (scratch() / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// CSV rows after the '# {json}' header and the column line.
std::vector<std::vector<double>> csv_rows(const fs::path& p, json* head = nullptr) {
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    if (head) *head = json::parse(line.substr(2));
    std::getline(f, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) r.push_back(std::stod(c));
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST_CASE("kernel: Cauchy value at the origin with a JSON header") {
    const fs::path out = scratch() / "k1";
    REQUIRE(run("kernel --alpha 1 --d 1 --t 1 --r 0 --out " + out.string()) == 0);
    json head;
    const auto rows = csv_rows(out / "kernel.csv", &head);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0][2] == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-12));
    CHECK(head["schema_version"] == 1);
    CHECK(head["config"]["model.alpha"] == "1");
    CHECK(head.contains("build"));
}

TEST_CASE("kernel: p_a rows match eval_pa") {
    const fs::path out = scratch() / "k2";
    REQUIRE(run("kernel --alpha 1.2 --beta 0.6 --a 1 --t 0.5,1 --r 0,1.5 --out " + out.string()) == 0);
    for (const auto& r : csv_rows(out / "kernel.csv")) {
        CHECK(r[2] == doctest::Approx(nlpert::eval_pa({1, 1.2, 0.6}, 1.0, r[0], r[1])).epsilon(1e-12));
    }
}

TEST_CASE("kernel: missing alpha is a usage error") {
    CHECK(run("kernel --t 1 --r 0") == 2);
    CHECK(slurp(scratch() / "stderr").find("Usage") != std::string::npos);
    CHECK(run("nosuchcommand") == 2);
    CHECK(run("kernel --alpha 1 --quantity banana") == 2);
}

TEST_CASE("config file with flag override") {
    const fs::path cfg = scratch() / "run.cfg";
    std::ofstream(cfg) << "model.alpha = 1\nkernel.t = 2\nkernel.r = 0\n";
    const fs::path out = scratch() / "k3";
    REQUIRE(run("kernel --config " + cfg.string() + " --t 1 --out " + out.string()) == 0);
    json head;
    const auto rows = csv_rows(out / "kernel.csv", &head);
    CHECK(rows[0][0] == 1.0);
    CHECK(head["config"]["kernel.t"] == "1");
}

TEST_CASE("series: b = 0 reproduces p_0 and b = 1 decays") {
    const fs::path out = scratch() / "s1";
    REQUIRE(run("series --alpha 1.2 --beta 0.6 --b constant:0 --N 256 --t-max 0.25 --M 16 --out " + out.string()) == 0);
    for (const auto& r : csv_rows(out / "series_field.csv")) {
        // the band-limited kernel resolves p_0 once t^{1/alpha} is a few grid spacings
        if (std::abs(r[2]) > 2.0 || r[0] < 0.2) continue;
        CHECK(r[3] == doctest::Approx(nlpert::eval_p0({1, 1.2, 0.6}, r[0], std::abs(r[2] - r[1]))).epsilon(1e-3));
    }
    const fs::path out2 = scratch() / "s2";
    REQUIRE(run("series --alpha 1.2 --beta 0.6 --b constant:1 --t-max 0.5 --N 256 --out " + out2.string()) == 0);
    const json rep = json::parse(slurp(out2 / "series_report.json"));
    const auto norms = rep["report"]["term_norms"].get<std::vector<double>>();
    REQUIRE(norms.size() > 4);
    for (std::size_t n = 2; n < 5; ++n) CHECK(norms[n] < 0.5 * norms[n - 1]);
}

TEST_CASE("series: long horizon diverges with exit 3 and horizon advice") {
    const fs::path out = scratch() / "s3";
    CHECK(run("series --alpha 1.2 --beta 0.6 --b constant:1 --t-max 50 --N 128 --out " + out.string()) == 3);
    CHECK(slurp(scratch() / "stderr").find("alpha/(alpha-beta)") != std::string::npos);
    CHECK(json::parse(slurp(out / "series_report.json"))["status"] == "diverged");
}

TEST_CASE("simulate: identical seeds give identical files") {
    const std::string args = "simulate --alpha 1.2 --beta 0.6 --c const:1 --n 5000 --seed 7 --t 0.25 --out ";
    const fs::path out = scratch() / "m";
    REQUIRE(run(args + out.string()) == 0);
    const std::string h1 = slurp(out / "simulate_histogram.csv"), s1 = slurp(out / "simulate_summary.json");
    REQUIRE(run(args + out.string()) == 0);
    CHECK(h1 == slurp(out / "simulate_histogram.csv"));
    CHECK(s1 == slurp(out / "simulate_summary.json"));
}

TEST_CASE("compare: TV against the series kernel") {
    const fs::path out = scratch() / "c";
    REQUIRE(run("compare --alpha 1.2 --beta 0.6 --b sde --c \"1/(1+x^2)\" --t 0.25 --n 20000 --out " + out.string()) == 0);
    const json doc = json::parse(slurp(out / "compare.json"));
    CHECK(doc["tv"].get<double>() < 0.05);
}

TEST_CASE("check: exit status follows the verdicts") {
    const fs::path suite = scratch() / "suite.json";
    std::ofstream(suite) << R"({"checks": [{"name": "cauchy", "criterion": 1, "kind": "cauchy_closed_form",
        "params": {"alpha": 1.0, "beta": 0.5}, "tolerance": 1e-6, "options": {"times": [1.0]}}]})";
    const fs::path out = scratch() / "v";
    CHECK(run("check --suite " + suite.string() + " --out " + out.string()) == 0);
    const json doc = json::parse(slurp(out / "verdicts.json"));
    CHECK(doc["verdicts"][0]["status"] == "pass");
    CHECK(run("check --suite " + suite.string() + " --tol 0 --out " + out.string()) == 4);
}
