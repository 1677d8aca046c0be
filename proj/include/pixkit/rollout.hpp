// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/conversation.hpp>
#include <pixkit/reward.hpp>
#include <pixkit/trajectory.hpp>
#include <pixkit/visual_ops.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pixkit
{

struct Query
{
    std::string id;
    std::string text;
    std::string gold;
    std::variant<ImageBuffer, VideoClip> visual;

    [[nodiscard]] bool is_video() const { return std::holds_alternative<VideoClip>(visual); }
};

/// Appended verbatim to every query in the user turn.
extern const std::string_view kGuidelineSuffix;

/// Default system turn describing the two operations and the call format.
extern const std::string_view kToolSystemPrompt;

struct RolloutLimits
{
    std::size_t max_visual_ops = 8;
    std::size_t max_steps = 16;            ///< generate calls per rollout
    std::size_t max_context_chars = 200000; ///< text characters in the conversation

    void validate() const;
};

struct RolloutOptions
{
    RolloutLimits limits;
    AnswerMatcher matcher = AnswerMatcher::Auto;
    /// Empty disables the system turn.
    std::string system_prompt = std::string(kToolSystemPrompt);
    SelectOptions select;
    /// Probability of an injected execution fault per operation.
    double fault_probability = 0;
};

enum class RolloutStatus
{
    Answered,
    NoAnswer,      ///< backend stopped without a boxed answer
    LimitExceeded, ///< truncated by RolloutLimits
    Failed,        ///< backend error; trajectory may be partial
};

[[nodiscard]] std::string_view to_string(RolloutStatus status);

struct RolloutResult
{
    Trajectory trajectory;
    RolloutRecord record;
    RolloutStatus status = RolloutStatus::NoAnswer;
    std::string error;
};

/// Conversation for the next generate call. The user turn carries the visual
/// input and the query text plus guideline; each tool invocation closes an
/// assistant turn and its outcome becomes a tool turn with any images it
/// produced. Pointers refer into query and workspace.
[[nodiscard]] Conversation assemble_prompt(const Query& query, const Trajectory& so_far, const VisualWorkspace& workspace,
                                           std::string_view system_prompt = kToolSystemPrompt);

/// Generate, execute, append, repeat. Execution errors are recorded as error
/// outcomes and the loop continues. Throws BackendUnavailable from the backend.
[[nodiscard]] RolloutResult run_rollout(PolicyBackend& policy, const Query& query, const RolloutOptions& options = {},
                                        std::uint64_t seed = 0, std::size_t rollout_index = 0);

struct GroupResult
{
    RolloutGroup group;
    std::vector<RolloutResult> rollouts;
};

/// G independent rollouts with at most `parallelism` in flight. A rollout whose
/// backend throws becomes a Failed record with correct = 0.
[[nodiscard]] GroupResult run_group(PolicyBackend& policy, const Query& query, std::size_t group_size,
                                    const RolloutOptions& options = {}, std::uint64_t seed = 0, std::size_t parallelism = 1);

[[nodiscard]] Json to_json(const RolloutResult& result);

/// Replays fixed chunks. Rollout i uses script i modulo the script count and
/// turn t returns chunk t. Past the end it repeats the last chunk when
/// repeat_last is set and returns an empty stop otherwise.
class ScriptedBackend : public PolicyBackend
{
  public:
    using Script = std::vector<std::string>;

    explicit ScriptedBackend(std::vector<Script> scripts, bool repeat_last = false, std::vector<std::size_t> failing_rollouts = {});

    Generation generate(const Conversation& conversation, const GenerationRequest& request) override;

    /// {"scripts": [[chunk, ...], ...], "repeat_last": bool, "fail": [index, ...]}
    static ScriptedBackend from_json(const Json& j);

  private:
    std::vector<Script> _scripts;
    bool _repeat_last;
    std::vector<std::size_t> _failing;
};

} // namespace pixkit
