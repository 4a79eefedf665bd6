#pragma once

#include <vector>

#include "losses/losses.hpp"
#include "model/config.hpp"
#include "json.hpp"

namespace cf2net {

struct OverfitOptions {
    ModelConfig model;
    LossWeights loss;
    std::string optimizer = "adagrad";
    double lr = 0.05;
    int max_steps = 500;
    uint64_t seed = 7;
    int threads = 0;
    bool early_stop = true;  // stop once the pass criterion is met

    static OverfitOptions tiny();  // full network, base_width 8, S = 64
};

struct OverfitResult {
    bool passed = false;
    double initial_loss = 0;
    double final_loss = 0;
    int steps_run = 0;
    bool grads_finite = true;
    std::vector<double> losses;  // per step
};

// Trains on 4 fixed synthetic samples for at most max_steps; passes iff the
// total loss drops below 10% of its initial value with finite gradients
// throughout.
OverfitResult overfit_smoke_test(const OverfitOptions& options);

// Gradient checks, metric oracles and the overfit smoke test in one bundle;
// returns a structured pass/fail report.
nlohmann::json run_selftest(const OverfitOptions& options);

}  // namespace cf2net
