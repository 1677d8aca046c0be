// SPDX-License-Identifier: Apache-2.0
#include <pixkit/chat_client.hpp>
#include <pixkit/error.hpp>

#include <fmt/format.h>
#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace pixkit
{

ChatConfig ChatConfig::from_env()
{
    return from_env(ChatConfig {});
}

ChatConfig ChatConfig::from_env(ChatConfig defaults)
{
    auto env = [](const char* name) -> std::string {
        auto const* v = std::getenv(name);
        return v ? v : "";
    };
    if (auto v = env("PIXKIT_BASE_URL"); !v.empty())
        defaults.base_url = v;
    if (auto v = env("PIXKIT_MODEL"); !v.empty())
        defaults.model = v;
    if (auto v = env("PIXKIT_API_KEY"); !v.empty())
        defaults.api_key = v;
    else if (auto o = env("OPENAI_API_KEY"); !o.empty() && defaults.api_key.empty())
        defaults.api_key = o;
    return defaults;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    auto const n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string png_data_url(const ImageBuffer& image)
{
    return "data:image/png;base64," + base64_encode(encode_png(image));
}

Json to_chat_messages(const Conversation& conversation)
{
    Json out = Json::array();
    for (auto const& m: conversation.messages)
    {
        bool const tool = m.role == Role::Tool;
        Json content = Json::array();
        if (tool)
            content.push_back({ { "type", "text" }, { "text", "<tool_response>\n" } });
        for (auto const& part: m.parts)
        {
            if (auto const* t = std::get_if<TextPart>(&part))
                content.push_back({ { "type", "text" }, { "text", t->text } });
            else if (auto const& img = std::get<ImagePart>(part); img.image)
                content.push_back({ { "type", "image_url" }, { "image_url", { { "url", png_data_url(*img.image) } } } });
        }
        if (tool)
            content.push_back({ { "type", "text" }, { "text", "\n</tool_response>" } });

        Json msg;
        msg["role"] = tool ? "user" : std::string(to_string(m.role));
        // plain string content where possible; some servers reject part lists
        // for system and assistant turns
        bool const textOnly = std::all_of(m.parts.begin(), m.parts.end(), [](const ContentPart& p) { return std::holds_alternative<TextPart>(p); });
        if (textOnly && !tool)
            msg["content"] = m.text();
        else
            msg["content"] = std::move(content);
        out.push_back(std::move(msg));
    }
    return out;
}

struct ChatClient::Impl
{
    std::string origin;
    std::string path;
};

ChatClient::ChatClient(ChatConfig config): _config(std::move(config)), _impl(std::make_unique<Impl>())
{
    if (_config.base_url.empty())
        throw InvalidInput("chat backend base URL is not set (PIXKIT_BASE_URL or --base-url)");
    auto const scheme = _config.base_url.find("://");
    if (scheme == std::string::npos)
        throw InvalidInput("base URL must start with http:// or https://: " + _config.base_url);
    auto const slash = _config.base_url.find('/', scheme + 3);
    _impl->origin = _config.base_url.substr(0, slash);
    auto prefix = slash == std::string::npos ? std::string {} : _config.base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    _impl->path = prefix + "/chat/completions";
}

ChatClient::~ChatClient() = default;

ChatReply ChatClient::complete(const Json& messages, const Json& extra)
{
    Json body = { { "model", _config.model }, { "messages", messages } };
    for (auto const& [k, v]: extra.items())
        body[k] = v;
    auto const payload = body.dump();

    httplib::Headers headers;
    if (!_config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _config.api_key);

    std::string lastError;
    auto delay = _config.backoff;
    for (int attempt = 0; attempt <= _config.max_retries; ++attempt)
    {
        if (attempt > 0)
        {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        // httplib::Client is not safe for concurrent requests; one per call
        httplib::Client cli(_impl->origin);
        auto const secs = _config.timeout.count() / 1000;
        auto const usecs = (_config.timeout.count() % 1000) * 1000;
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);

        auto res = cli.Post(_impl->path, headers, payload, "application/json");
        if (!res)
        {
            lastError = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500)
        {
            lastError = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200));
            continue;
        }
        if (res->status != 200)
            throw BackendUnavailable(fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200)));

        auto parsed = Json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty())
            throw BackendUnavailable("malformed chat completion response");
        auto const& choice = parsed["choices"][0];
        ChatReply reply;
        auto const& content = choice.at("message").value("content", Json());
        reply.content = content.is_string() ? content.get<std::string>() : std::string {};
        reply.finish_reason = choice.value("finish_reason", Json("stop")).is_string() ? choice.value("finish_reason", std::string("stop")) : "stop";
        return reply;
    }
    throw BackendUnavailable(fmt::format("{} after {} attempts", lastError, _config.max_retries + 1));
}

HttpPolicyBackend::HttpPolicyBackend(ChatConfig config): _client(std::move(config)) {}

Generation HttpPolicyBackend::generate(const Conversation& conversation, const GenerationRequest& request)
{
    auto const& cfg = _client.config();
    Json extra = { { "stop", Json::array({ std::string(kToolCallClose) }) },
                   { "temperature", cfg.temperature },
                   { "max_tokens", cfg.max_tokens },
                   { "seed", request.seed & 0x7fffffffffffffffULL } };
    auto reply = _client.complete(to_chat_messages(conversation), extra);

    Generation gen;
    gen.text = std::move(reply.content);
    gen.finish = reply.finish_reason == "length" ? FinishReason::Length : FinishReason::Stop;
    auto const open = gen.text.rfind(kToolCallOpen);
    if (gen.finish == FinishReason::Stop && open != std::string::npos && gen.text.find(kToolCallClose, open) == std::string::npos)
        gen.text += kToolCallClose;
    return gen;
}

} // namespace pixkit
