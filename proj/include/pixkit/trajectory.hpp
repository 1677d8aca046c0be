// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/tool_protocol.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pixkit
{

enum class StepKind
{
    TextThought,
    ToolInvocation,
    ExecutionOutcome,
    FinalAnswer,
};

[[nodiscard]] std::string_view to_string(StepKind kind);

struct TextThought
{
    std::string text;
};

struct ToolInvocation
{
    ToolCall call;
    /// Exact text the model emitted; empty means "render canonically".
    std::string raw;
    /// Set when the emitted call could not be parsed. It still counts as an
    /// attempted visual operation.
    std::optional<std::string> malformed;
    /// Reconstructed from an outcome whose triggering call is not in the text.
    bool inferred = false;
};

/// Reference to an image produced by an operation, resolved against the
/// rollout's workspace when a conversation is assembled.
struct Attachment
{
    enum class Source
    {
        WorkspaceImage, ///< 1-based index into VisualWorkspace::images
        ClipFrame,      ///< 0-based index into the video clip
    };
    Source source = Source::WorkspaceImage;
    std::size_t index = 0;

    friend bool operator==(const Attachment&, const Attachment&) = default;
};

struct ExecutionOutcome
{
    /// Error message (without the marker prefix) or a textual placeholder
    /// standing in for the returned visual payload.
    std::string text;
    bool is_error = false;
    std::vector<Attachment> attachments;
};

struct FinalAnswer
{
    std::string answer;
    /// Raw text of the answer segment, e.g. `\boxed{C}`.
    std::string text;
};

using StepPayload = std::variant<TextThought, ToolInvocation, ExecutionOutcome, FinalAnswer>;

struct TrajectoryStep
{
    StepPayload payload;
    bool masked = false;

    [[nodiscard]] StepKind kind() const { return static_cast<StepKind>(payload.index()); }
};

struct Trajectory
{
    std::string query_id;
    std::vector<TrajectoryStep> steps;

    /// Attempted visual operations, including malformed and failed ones.
    [[nodiscard]] std::size_t n_vo() const;
    [[nodiscard]] bool is_pixel_space() const { return n_vo() >= 1; }
    [[nodiscard]] const FinalAnswer* final_answer() const;

    /// Throws ProtocolViolation if an outcome does not directly follow an
    /// invocation, or a final answer is repeated or not last.
    void validate() const;
};

/// How execution outcomes appear in flat transcripts. The error prefix marks a
/// one-line error outcome at the start of a line; response tags wrap any
/// outcome, whose content is an error when it starts with the error prefix.
struct OutcomeMarkers
{
    std::string error_prefix = "Execution error:";
    std::string response_open = "<tool_response>";
    std::string response_close = "</tool_response>";
    /// Logs sometimes drop the call and keep only its outcome. When set, such
    /// an outcome gets an inferred invocation instead of a ProtocolViolation.
    bool infer_elided_invocations = false;
};

/// Rebuild a trajectory from a flat transcript. Text between markers becomes
/// TextThought steps (trimmed, empty ones dropped); a `\boxed{}` in the text
/// after the last marker becomes the FinalAnswer.
[[nodiscard]] Trajectory segment_trajectory(std::string_view text, const OutcomeMarkers& markers = {}, std::string query_id = {});

[[nodiscard]] std::string render_step(const TrajectoryStep& step, const OutcomeMarkers& markers = {});

struct RenderedTranscript
{
    std::string text;
    /// One span per step; inferred invocations get an empty span.
    std::vector<ByteSpan> step_spans;
};

/// Steps joined by blank lines. segment_trajectory inverts this for
/// trajectories whose text fields are already trimmed.
[[nodiscard]] RenderedTranscript render_transcript(const Trajectory& trajectory, const OutcomeMarkers& markers = {});

[[nodiscard]] Json to_json(const TrajectoryStep& step);
[[nodiscard]] Json to_json(const Trajectory& trajectory);
[[nodiscard]] TrajectoryStep step_from_json(const Json& j);
[[nodiscard]] Trajectory trajectory_from_json(const Json& j);

} // namespace pixkit
