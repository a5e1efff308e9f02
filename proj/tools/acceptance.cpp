// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: fca_acceptance [--only 1,5] [--paths N] [--seed S] [--stationary-m M]
// Exit status is 0 only when every selected criterion passes.

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fca/validation.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    fca::validation::Options opt;
    std::vector<int> only;
    app.add_option("--only", only, "Criteria to run")->delimiter(',')->check(CLI::Range(1, 11));
    app.add_option("--paths", opt.mc_paths, "Monte Carlo paths");
    app.add_option("--seed", opt.seed, "Monte Carlo seed");
    app.add_flag("--antithetic,!--no-antithetic", opt.antithetic, "Antithetic pairs in the pricing oracles (default on)");
    app.add_option("--stationary-m", opt.stationary_m, "Grid size for criterion 1");
    app.add_option("--threads", opt.threads, "Worker threads (0: hardware)");
    CLI11_PARSE(app, argc, argv);
    opt.only.insert(only.begin(), only.end());

    int failed = 0;
    const auto results = fca::validation::run_all(opt, [&](const fca::validation::CriterionResult& r) {
        std::printf("%s criterion %d (%s): measured=%.6g tolerance=%.6g runtime=%.1fs | %s\n", r.passed ? "PASS" : "FAIL",
                    r.id, r.name.c_str(), r.measured, r.tolerance, r.seconds, r.details.c_str());
        std::fflush(stdout);
        failed += !r.passed;
    });
    std::printf("%zu criteria, %d failed\n", results.size(), failed);
    return failed ? 1 : 0;
}
