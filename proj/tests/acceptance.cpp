// Acceptance suite: runs every criterion at its pinned tolerance and prints
// one pass/fail line each. Exit code 0 only if all pass.

#include <cstdio>

#include "gradsurg/verify.hpp"

int main() {
    using gradsurg::verify::CriterionResult;

    std::vector<CriterionResult> results = gradsurg::verify::run_acceptance(
        [](const CriterionResult& r) {
            std::printf("[%s] %02d %-55s (%6.2fs) %s\n", r.passed ? "PASS" : "FAIL",
                        r.id, r.name.c_str(), r.seconds, r.detail.c_str());
            std::fflush(stdout);
        });

    int failed = 0;
    for (const auto& r : results)
        if (!r.passed) ++failed;
    if (failed > 0) std::printf("%d criterion(s) failed\n", failed);
    else std::printf("all %zu criteria passed\n", results.size());
    return failed == 0 ? 0 : 1;
}
