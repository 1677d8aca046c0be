// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/image.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pixkit
{

enum class Role
{
    System,
    User,
    Assistant,
    Tool,
};

[[nodiscard]] std::string_view to_string(Role role);

struct TextPart
{
    std::string text;
};

/// Non-owning: the image belongs to the query or the rollout's workspace and
/// must outlive the conversation.
struct ImagePart
{
    std::string label;
    const ImageBuffer* image = nullptr;
};

using ContentPart = std::variant<TextPart, ImagePart>;

struct Message
{
    Role role = Role::User;
    std::vector<ContentPart> parts;

    /// Concatenated text parts.
    [[nodiscard]] std::string text() const;
};

struct Conversation
{
    std::vector<Message> messages;

    /// Deterministic text form; images appear as label, size and a content hash.
    [[nodiscard]] std::string serialize() const;
    /// Characters of text content, the budget RolloutLimits::max_context_chars caps.
    [[nodiscard]] std::size_t text_chars() const;
};

/// 64-bit FNV-1a over dimensions and pixels.
[[nodiscard]] std::uint64_t image_digest(const ImageBuffer& image);

enum class FinishReason
{
    Stop,     ///< model ended its turn or hit a stop sequence
    Length,   ///< output token budget exhausted
};

struct Generation
{
    std::string text;
    FinishReason finish = FinishReason::Stop;
};

struct GenerationRequest
{
    std::uint64_t seed = 0;
    std::size_t rollout_index = 0;
    /// Number of earlier generate calls in this rollout.
    std::size_t turn = 0;
};

/// Produces the next chunk of a rollout: text that ends at a tool call, a final
/// answer, or a backend stop. Implementations must tolerate concurrent calls
/// and throw BackendUnavailable when they cannot answer.
class PolicyBackend
{
  public:
    virtual ~PolicyBackend() = default;
    virtual Generation generate(const Conversation& conversation, const GenerationRequest& request) = 0;
};

} // namespace pixkit
