#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vwapx/optim.hpp"

namespace vwapx::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Central finite differences over every parameter in the store against the
// analytic gradients produced by `backward`. Returns the worst relative error
// |analytic - fd| / max(1, |analytic|, |fd|).
double fd_max_rel_error(nn::ParamStore& store, const std::function<double()>& loss,
                        const std::function<void()>& backward, double step = 1e-4);

// Property suites. `quick` trims iteration counts for the CLI selftest; the
// acceptance suite runs the full counts.
CheckResult gradient_ops();
CheckResult gradient_policy_bptt();
CheckResult gradient_ushape_pipeline();
CheckResult structural_upred(int draws);
CheckResult structural_conservation(int episodes);
CheckResult oracle_reward_grid(int per_axis);
CheckResult oracle_target_strategy(int tapes);
CheckResult ppo_clip_cases();
CheckResult ppo_suffix_sums(int sequences);

std::vector<CheckResult> run_all(bool quick);

} // namespace vwapx::selftest
