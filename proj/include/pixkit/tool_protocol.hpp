// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pixkit
{

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kCropImage = "crop_image";
inline constexpr std::string_view kSelectFrames = "select_frames";

inline constexpr std::string_view kToolCallOpen = "<tool_call>";
inline constexpr std::string_view kToolCallClose = "</tool_call>";

/// Half-open byte range [begin, end) into the text a value was parsed from.
struct ByteSpan
{
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const { return end - begin; }
    friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

/// A visual-operation request. Equality compares name and arguments only;
/// the span is provenance.
struct ToolCall
{
    std::string name;
    Json arguments = Json::object();
    ByteSpan source_span {};

    friend bool operator==(const ToolCall& a, const ToolCall& b)
    {
        return a.name == b.name && a.arguments == b.arguments;
    }
};

struct MalformedToolCall
{
    ByteSpan span;
    std::string reason;
    /// Best-effort name recovered from the broken payload, empty if none.
    std::string name_hint;
};

using ToolCallEntry = std::variant<ToolCall, MalformedToolCall>;

[[nodiscard]] bool is_known_operation(std::string_view name);

/// Every `<tool_call>...</tool_call>` block in order of appearance. A block
/// whose payload is not a JSON object with a non-empty string "name" becomes a
/// MalformedToolCall; other blocks are unaffected.
[[nodiscard]] std::vector<ToolCallEntry> parse_tool_calls(std::string_view text);

/// Parse the payload between the tags (no tags). Used by the rollout engine
/// and CLI when a call arrives without its wrapper.
[[nodiscard]] ToolCallEntry parse_tool_call_payload(std::string_view payload, ByteSpan span = {});

/// Canonical single-line rendering:
/// `<tool_call>{"name": <n>, "arguments": <a>}</tool_call>`.
[[nodiscard]] std::string render_tool_call(const ToolCall& call);

/// Canonical JSON text used inside the tags. Objects are written as
/// `{"k": v, "k2": v2}`, arrays as `[a,b,c]`, key order is preserved, and
/// "</" inside strings is escaped as "<\/" and "<tool_call>" as
/// "\u003ctool_call>" so a payload can never close or reopen a tag.
[[nodiscard]] std::string canonical_json(const Json& value);

/// Content of the last depth-balanced `\boxed{...}`; nullopt when there is none.
[[nodiscard]] std::optional<std::string> extract_boxed_answer(std::string_view text);

/// Byte offset of the `\boxed{` that extract_boxed_answer would pick.
[[nodiscard]] std::optional<std::size_t> find_last_boxed(std::string_view text);

} // namespace pixkit
