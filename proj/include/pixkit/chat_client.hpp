// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/conversation.hpp>
#include <pixkit/tool_protocol.hpp>

#include <chrono>
#include <memory>
#include <string>

namespace pixkit
{

/// Chat-completion endpoint settings. base_url includes any path prefix, e.g.
/// "http://localhost:8000/v1"; requests go to base_url + "/chat/completions".
struct ChatConfig
{
    std::string base_url;
    std::string model;
    std::string api_key;
    std::chrono::milliseconds timeout { 60000 };
    int max_retries = 3;
    std::chrono::milliseconds backoff { 500 }; ///< doubled after each retry
    double temperature = 1.0;
    int max_tokens = 1024;

    /// PIXKIT_BASE_URL, PIXKIT_MODEL, PIXKIT_API_KEY (falls back to
    /// OPENAI_API_KEY). Unset variables leave the defaults in place.
    static ChatConfig from_env(ChatConfig defaults);
    static ChatConfig from_env();
};

struct ChatReply
{
    std::string content;
    std::string finish_reason;
};

[[nodiscard]] std::string base64_encode(const std::vector<std::uint8_t>& bytes);
[[nodiscard]] std::string png_data_url(const ImageBuffer& image);

/// OpenAI-style message list. Images become PNG data URLs. Tool turns are sent
/// as user turns wrapped in <tool_response> tags since the calls are plain
/// text, not native function calls.
[[nodiscard]] Json to_chat_messages(const Conversation& conversation);

class ChatClient
{
  public:
    explicit ChatClient(ChatConfig config);
    ~ChatClient();
    ChatClient(const ChatClient&) = delete;
    ChatClient& operator=(const ChatClient&) = delete;

    /// POSTs {"model", "messages", ...extra}. Retries connection failures, 429
    /// and 5xx with exponential backoff, then throws BackendUnavailable.
    ChatReply complete(const Json& messages, const Json& extra = Json::object());

    [[nodiscard]] const ChatConfig& config() const { return _config; }

  private:
    struct Impl;
    ChatConfig _config;
    std::unique_ptr<Impl> _impl;
};

/// Policy backend over a chat-completion endpoint. Generation stops at
/// "</tool_call>", which the endpoint strips and this adapter restores.
class HttpPolicyBackend : public PolicyBackend
{
  public:
    explicit HttpPolicyBackend(ChatConfig config);

    Generation generate(const Conversation& conversation, const GenerationRequest& request) override;

  private:
    ChatClient _client;
};

} // namespace pixkit
