// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/tool_protocol.hpp>

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pixkit
{

/// Multipliers and constraint targets of the shaped reward.
struct RewardConfig
{
    double alpha = 0.5;       ///< curiosity multiplier
    double beta = 0.05;       ///< per-extra-operation cost
    double h_threshold = 0.3; ///< target rate of pixel-space reasoning
    double n_max = 1;         ///< operation budget per response

    /// Throws InvalidInput when a field is out of range.
    void validate() const;
};

struct LagrangianConfig
{
    double lambda1 = 0.5;
    double lambda2 = 0.05;

    void validate() const;
};

struct RolloutRecord
{
    std::string query_id;
    std::string trajectory_id;
    int correct = 0;
    bool is_pr = false;
    std::size_t n_vo = 0;

    /// Throws InvalidInput unless correct is 0/1 and is_pr agrees with n_vo.
    void validate() const;
};

struct RolloutGroup
{
    std::string query_id;
    std::vector<RolloutRecord> records;

    [[nodiscard]] std::size_t size() const { return records.size(); }
};

enum class AnswerMatcher
{
    Exact,
    Normalized,   ///< case-folded, trimmed, inner whitespace collapsed
    ChoiceLetter, ///< first option letter, tolerating "(B)", "B.", "B) text"
    Auto,         ///< ChoiceLetter for a single-letter gold, Normalized otherwise
};

[[nodiscard]] AnswerMatcher parse_matcher(std::string_view name);

[[nodiscard]] int correctness_reward(const std::optional<std::string>& answer, std::string_view gold,
                                     AnswerMatcher matcher = AnswerMatcher::Auto);

[[nodiscard]] double rapr(const RolloutGroup& group);

[[nodiscard]] double curiosity_bonus(const RewardConfig& cfg, double rapr_value, bool is_pr);
[[nodiscard]] double efficiency_penalty(const RewardConfig& cfg, std::size_t n_vo);

struct RewardTerms
{
    double correctness = 0;
    double curiosity = 0;
    double penalty = 0;
    double total = 0;
};

struct LagrangianTerms
{
    double correctness = 0;
    double rapr_term = 0; ///< -lambda1 * (H - RaPR)
    double ops_term = 0;  ///< -lambda2 * (n_vo - N)
    double total = 0;
};

[[nodiscard]] std::vector<RewardTerms> modified_reward_terms(const RewardConfig& cfg, const RolloutGroup& group);
[[nodiscard]] std::vector<double> modified_reward(const RewardConfig& cfg, const RolloutGroup& group);

/// Unclipped relaxation; pays for operating under budget. Uses cfg for H and N only.
[[nodiscard]] std::vector<LagrangianTerms> standard_lagrangian_terms(const LagrangianConfig& lcfg, const RewardConfig& cfg,
                                                                     const RolloutGroup& group);
[[nodiscard]] std::vector<double> standard_lagrangian_reward(const LagrangianConfig& lcfg, const RewardConfig& cfg,
                                                             const RolloutGroup& group);

[[nodiscard]] Json to_json(const RolloutRecord& record);
[[nodiscard]] RolloutRecord record_from_json(const Json& j);

/// One record per line. Groups are formed by query_id in order of first
/// appearance. Blank lines are skipped; other bad lines throw InvalidInput
/// naming the line number.
[[nodiscard]] std::vector<RolloutGroup> read_rollout_groups(std::istream& in);
void write_rollout_groups(std::ostream& out, const std::vector<RolloutGroup>& groups);

} // namespace pixkit
