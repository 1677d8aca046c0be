// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/grpo.hpp>
#include <pixkit/random.hpp>
#include <pixkit/reward.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

namespace pixkit
{

enum class QueryClass
{
    NeedsPixel = 0,
    TextSolvable = 1,
};

/// Two-mode policy: each rollout either attempts a visual operation (pixel
/// mode) or answers from text. Per-class arrays are indexed by QueryClass.
struct SimPolicy
{
    double pr_logit = 0;
    std::array<double, 2> skill_text {};
    std::array<double, 2> skill_pixel {};
    std::array<double, 2> skill_pixel_cap {};
    double op_error_rate = 0;
    double op_error_floor = 0;
    /// A failed operation still yields a correct answer w.p. skill_text * recovery.
    double recovery = 0;
    double step_size = 0.0025;
    /// Attempted operations so far.
    std::uint64_t practice = 0;

    [[nodiscard]] double pr_probability() const;
    /// Expected accuracy in each mode under a class mix.
    [[nodiscard]] double text_return(double needs_pixel_fraction) const;
    [[nodiscard]] double pixel_return(double needs_pixel_fraction) const;

    /// Post-instruction-tuning starting point: pixel mode chosen ~55% of the
    /// time, ~23% accurate against ~50% for text.
    static SimPolicy warm_start();
    /// Operations always fail and failure costs nothing, so pixel mode is a
    /// relabelled text answer; with the bonus on this is the reward-hacking regime.
    static SimPolicy no_correction();
};

struct SimRollout
{
    bool pixel = false;
    bool op_failed = false;
    int correct = 0;
};

struct SimGroup
{
    QueryClass query = QueryClass::NeedsPixel;
    std::vector<SimRollout> rollouts;
    RolloutGroup group;
};

[[nodiscard]] SimGroup sim_rollout_group(const SimPolicy& policy, QueryClass query, std::size_t group_size, Rng& rng,
                                         std::uint64_t query_index = 0);

struct PracticeModel
{
    /// Added to each class's pixel skill (capped) per successful operation.
    double practice_gain = 2.5e-5;
    /// Subtracted from op_error_rate (floored) per attempted operation.
    double error_decay = 1.1e-5;
};

/// Score-function step on the mode choice summed over all rollouts, then the
/// practice updates.
[[nodiscard]] SimPolicy policy_gradient_step(SimPolicy policy, const std::vector<SimGroup>& groups,
                                             const std::vector<AdvantageGroup>& advantages, const PracticeModel& practice);

struct SimConfig
{
    std::uint64_t seed = 7;
    std::size_t steps = 800;
    std::size_t group_size = 8;
    std::size_t queries_per_step = 64;
    double needs_pixel_fraction = 0.7;
    RewardConfig reward;
    bool with_curiosity = true;
    PracticeModel practice;
    AdvantageMode mode = AdvantageMode::MeanOnly;
    SimPolicy init = SimPolicy::warm_start();

    void validate() const;
};

struct MetricsRow
{
    std::size_t step = 0;
    double rapr = 0;
    /// Failed fraction of this step's attempted operations; the model rate
    /// when nothing was attempted.
    double op_error = 0;
    double return_text = 0;
    double return_pixel = 0;
    double bonus_mean = 0;
};

struct MetricsTrace
{
    std::vector<MetricsRow> rows;

    /// Mean of a column over rows [begin, end).
    [[nodiscard]] double mean(double MetricsRow::*column, std::size_t begin, std::size_t end) const;
    [[nodiscard]] double peak(double MetricsRow::*column) const;
    void write_csv(std::ostream& out) const;
};

[[nodiscard]] MetricsTrace run_training(const SimConfig& cfg);

} // namespace pixkit
