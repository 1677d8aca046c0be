// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <pixkit/chat_client.hpp>
#include <pixkit/error.hpp>
#include <pixkit/rollout.hpp>

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

using namespace pixkit;

namespace
{

/// Chat-completion stand-in on a loopback port. The handler decides each reply.
class FakeServer
{
  public:
    using Handler = std::function<std::pair<int, Json>(const Json& body, int call)>;

    explicit FakeServer(Handler handler): _handler(std::move(handler))
    {
        _server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            auto const body = Json::parse(req.body);
            int call = 0;
            {
                std::lock_guard lock(_mutex);
                call = _calls++;
                _bodies.push_back(body);
                _auth.push_back(req.get_header_value("Authorization"));
            }
            auto [status, reply] = _handler(body, call);
            res.status = status;
            res.set_content(reply.dump(), "application/json");
        });
        _port = _server.bind_to_any_port("127.0.0.1");
        _thread = std::thread([this] { _server.listen_after_bind(); });
        _server.wait_until_ready();
    }

    ~FakeServer()
    {
        _server.stop();
        _thread.join();
    }

    [[nodiscard]] std::string base_url() const { return "http://127.0.0.1:" + std::to_string(_port) + "/v1"; }
    [[nodiscard]] int calls() const
    {
        std::lock_guard lock(_mutex);
        return _calls;
    }
    [[nodiscard]] Json body(std::size_t i) const
    {
        std::lock_guard lock(_mutex);
        return _bodies.at(i);
    }
    [[nodiscard]] std::string auth(std::size_t i) const
    {
        std::lock_guard lock(_mutex);
        return _auth.at(i);
    }

  private:
    Handler _handler;
    httplib::Server _server;
    std::thread _thread;
    int _port = 0;
    mutable std::mutex _mutex;
    int _calls = 0;
    std::vector<Json> _bodies;
    std::vector<std::string> _auth;
};

Json reply(const std::string& content, const std::string& finish = "stop")
{
    return { { "choices", Json::array({ { { "message", { { "role", "assistant" }, { "content", content } } }, { "finish_reason", finish } } }) } };
}

ChatConfig config_for(const FakeServer& s)
{
    ChatConfig c;
    c.base_url = s.base_url();
    c.model = "test-model";
    c.api_key = "sk-test";
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(5000);
    return c;
}

} // namespace

TEST(Base64, KnownVectors)
{
    auto enc = [](std::string s) { return base64_encode(std::vector<std::uint8_t>(s.begin(), s.end())); };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
}

TEST(ChatClient, SendsModelMessagesAndKey)
{
    FakeServer server([](const Json&, int) { return std::pair { 200, reply("hello") }; });
    ChatClient client(config_for(server));
    auto const r = client.complete(Json::array({ { { "role", "user" }, { "content", "hi" } } }), { { "temperature", 0.2 } });
    EXPECT_EQ(r.content, "hello");
    EXPECT_EQ(r.finish_reason, "stop");
    auto const body = server.body(0);
    EXPECT_EQ(body["model"], "test-model");
    EXPECT_EQ(body["messages"][0]["content"], "hi");
    EXPECT_EQ(body["temperature"], 0.2);
    EXPECT_EQ(server.auth(0), "Bearer sk-test");
}

TEST(ChatClient, RetriesTransientFailures)
{
    FakeServer server([](const Json&, int call) {
        if (call == 0)
            return std::pair { 503, Json { { "error", "busy" } } };
        if (call == 1)
            return std::pair { 429, Json { { "error", "slow down" } } };
        return std::pair { 200, reply("ok") };
    });
    ChatClient client(config_for(server));
    EXPECT_EQ(client.complete(Json::array()).content, "ok");
    EXPECT_EQ(server.calls(), 3);
}

TEST(ChatClient, GivesUpAfterRetryBudget)
{
    FakeServer server([](const Json&, int) { return std::pair { 500, Json::object() }; });
    auto cfg = config_for(server);
    cfg.max_retries = 2;
    ChatClient client(cfg);
    EXPECT_THROW((void)client.complete(Json::array()), BackendUnavailable);
    EXPECT_EQ(server.calls(), 3);
}

TEST(ChatClient, ClientErrorIsNotRetried)
{
    FakeServer server([](const Json&, int) { return std::pair { 400, Json { { "error", "bad" } } }; });
    ChatClient client(config_for(server));
    EXPECT_THROW((void)client.complete(Json::array()), BackendUnavailable);
    EXPECT_EQ(server.calls(), 1);
}

TEST(ChatClient, UnreachableEndpoint)
{
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    ChatConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_retries = 1;
    cfg.backoff = std::chrono::milliseconds(1);
    cfg.timeout = std::chrono::milliseconds(500);
    ChatClient client(cfg);
    EXPECT_THROW((void)client.complete(Json::array()), BackendUnavailable);
}

TEST(ChatClient, ConfigValidation)
{
    EXPECT_THROW(ChatClient(ChatConfig {}), InvalidInput);
    ChatConfig bad;
    bad.base_url = "localhost:8000";
    EXPECT_THROW((ChatClient { bad }), InvalidInput);
}

TEST(ChatConfig, FromEnvironment)
{
    ::setenv("PIXKIT_BASE_URL", "http://example.invalid/v1", 1);
    ::setenv("PIXKIT_MODEL", "m", 1);
    ::unsetenv("PIXKIT_API_KEY");
    ::setenv("OPENAI_API_KEY", "fallback", 1);
    auto const c = ChatConfig::from_env();
    EXPECT_EQ(c.base_url, "http://example.invalid/v1");
    EXPECT_EQ(c.model, "m");
    EXPECT_EQ(c.api_key, "fallback");
    ::setenv("PIXKIT_API_KEY", "primary", 1);
    EXPECT_EQ(ChatConfig::from_env().api_key, "primary");
    for (auto const* v: { "PIXKIT_BASE_URL", "PIXKIT_MODEL", "PIXKIT_API_KEY", "OPENAI_API_KEY" })
        ::unsetenv(v);
}

TEST(ToChatMessages, ToolTurnsAndImages)
{
    Rng rng(1);
    auto const img = pixkit::testing::random_image(rng, 4, 3);
    Conversation conv;
    conv.messages.push_back({ Role::System, { TextPart { "sys" } } });
    conv.messages.push_back({ Role::User, { ImagePart { "image 1", &img }, TextPart { "q" } } });
    conv.messages.push_back({ Role::Assistant, { TextPart { "call" } } });
    conv.messages.push_back({ Role::Tool, { TextPart { "[image 2: 4x3]" }, ImagePart { "image 2", &img } } });
    auto const m = to_chat_messages(conv);
    ASSERT_EQ(m.size(), 4u);
    EXPECT_EQ(m[0]["content"], "sys");
    EXPECT_EQ(m[1]["content"][0]["type"], "image_url");
    EXPECT_TRUE(m[1]["content"][0]["image_url"]["url"].get<std::string>().starts_with("data:image/png;base64,iVBORw0KGgo"));
    EXPECT_EQ(m[2]["role"], "assistant");
    EXPECT_EQ(m[3]["role"], "user");
    EXPECT_EQ(m[3]["content"][0]["text"], "<tool_response>\n");
    EXPECT_EQ(m[3]["content"].back()["text"], "\n</tool_response>");
}

TEST(HttpPolicyBackend, RestoresStrippedStopSequence)
{
    FakeServer server([](const Json&, int) {
        return std::pair { 200, reply(R"(zoom <tool_call>{"name": "crop_image", "arguments": {"bbox_2d": [0,0,4,4], "target_image": 1}})") };
    });
    HttpPolicyBackend backend(config_for(server));
    auto const gen = backend.generate(Conversation {}, { 42, 0, 0 });
    EXPECT_TRUE(gen.text.ends_with("</tool_call>"));
    EXPECT_EQ(server.body(0)["stop"][0], "</tool_call>");
    EXPECT_EQ(server.body(0)["seed"], 42);
}

TEST(HttpPolicyBackend, LengthFinishIsReported)
{
    FakeServer server([](const Json&, int) { return std::pair { 200, reply("<tool_call>{\"na", "length") }; });
    HttpPolicyBackend backend(config_for(server));
    auto const gen = backend.generate(Conversation {}, {});
    EXPECT_EQ(gen.finish, FinishReason::Length);
    EXPECT_FALSE(gen.text.ends_with("</tool_call>"));
}

TEST(HttpPolicyBackend, DrivesRolloutEndToEnd)
{
    FakeServer server([](const Json& body, int) {
        // second turn sees the tool response as a user message
        if (body["messages"].size() <= 2)
            return std::pair { 200, reply(R"(Let me look. <tool_call>{"name": "crop_image", "arguments": {"bbox_2d": [2,2,10,10], "target_image": 1}})") };
        return std::pair { 200, reply("The sign reads A.\n\\boxed{A}") };
    });
    Rng rng(2);
    Query q { "q", "What?", "A", pixkit::testing::random_image(rng, 16, 16) };
    HttpPolicyBackend backend(config_for(server));
    auto const g = run_group(backend, q, 4, {}, 1, 4);
    for (auto const& r: g.rollouts)
    {
        EXPECT_EQ(r.status, RolloutStatus::Answered) << r.error;
        EXPECT_EQ(r.record.n_vo, 1u);
        EXPECT_EQ(r.record.correct, 1);
    }
    EXPECT_EQ(server.calls(), 8);
    int withResponse = 0;
    for (std::size_t i = 0; i < 8; ++i)
    {
        auto const body = server.body(i);
        for (auto const& m: body["messages"])
            if (m["content"].is_array())
                for (auto const& p: m["content"])
                    withResponse += p.value("text", std::string {}) == "<tool_response>\n";
    }
    EXPECT_EQ(withResponse, 4);
}
