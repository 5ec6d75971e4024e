#pragma once

#include <string>
#include <vector>

namespace sd2nn {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // measured quantity vs threshold
};

struct SelftestOptions {
    // Fault-injection fixture: evaluate s2relu with the sine factor dropped
    // (x(1-x) instead of sin(2 pi x) x(1-x)) to prove the activation identity
    // check actually bites.
    bool corrupt_s2relu = false;
};

// The built-in oracle suite: activation identities, the staged boundary
// penalty table, a loss-gradient finite-difference check, 1D/2D solver
// convergence orders, exact-solution residual spot checks, sampler
// statistics, hole-avoidance predicates, and initialization variance.
std::vector<CheckResult> run_selftests(const SelftestOptions& opt = {});

}  // namespace sd2nn
