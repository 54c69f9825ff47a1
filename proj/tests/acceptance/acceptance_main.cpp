// Runs the shipped default suite and prints one line per acceptance criterion.
// Exit status 0 only when every criterion passes.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "nlpert/verification.hpp"

using namespace nlpert;

int main(int argc, char** argv) {
    SuiteOptions opts;
    std::string suite = default_suite_path();
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--work-dir") == 0 && i + 1 < argc) opts.work_dir = argv[++i];
        else if (std::strcmp(argv[i], "--suite") == 0 && i + 1 < argc) suite = argv[++i];
        else if (std::strcmp(argv[i], "-v") == 0) opts.verbose = true;
        else {
            std::fprintf(stderr, "usage: acceptance [--suite FILE] [--work-dir DIR] [-v]\n");
            return 2;
        }
    }
    const std::vector<Verdict> verdicts = run_suite(load_suite(suite), opts);

    struct Line {
        bool ok = true;
        double seconds = 0.0;
        std::string detail;
    };
    std::map<int, Line> lines;
    for (const Verdict& v : verdicts) {
        Line& l = lines[v.criterion];
        l.ok = l.ok && v.status != Status::Fail;
        l.seconds += v.seconds;
        for (const Measurement& m : v.measured) {
            if (m.relation == "info" || m.name.rfind("runtime", 0) == 0) continue;
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s%s %.3g %s %.3g", l.detail.empty() ? "" : "; ", m.name.c_str(), m.value,
                          m.relation.c_str(), m.tolerance);
            l.detail += buf;
        }
        if (v.status == Status::Fail) l.detail = v.name + ": " + v.message + (l.detail.empty() ? "" : "; " + l.detail);
    }
    bool all = true;
    for (const auto& [criterion, l] : lines) {
        all = all && l.ok;
        std::printf("criterion %2d  %s  (%.1fs)  %s\n", criterion, l.ok ? "PASS" : "FAIL", l.seconds, l.detail.c_str());
    }
    if (!opts.work_dir.empty()) {
        std::filesystem::create_directories(opts.work_dir);
        std::ofstream(std::filesystem::path(opts.work_dir) / "acceptance_verdicts.json") << to_json(verdicts).dump(2) << '\n';
    }
    std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
    return all ? 0 : 1;
}
