// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/rollout.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <atomic>
#include <thread>

namespace pixkit
{

const std::string_view kGuidelineSuffix =
    "\n\nGuidelines: Understand the given visual information and the user query. Determine if it is beneficial to employ the "
    "given visual operations (tools). For a video, we can look closer by `select_frames`. For an image, we can look closer by "
    "`crop_image`. Reason with the visual information step by step, and put your final answer within \\boxed{}.";

const std::string_view kToolSystemPrompt =
    "You can call two visual operations.\n"
    "crop_image(bbox_2d, target_image): returns the region [x1, y1, x2, y2] of an image, in pixel coordinates of that image. "
    "Images are numbered from 1; image 1 is the original and every crop you make is added as the next number.\n"
    "select_frames(target_frames): returns the listed frames of the video, numbered from 0. Select at most 8 frames.\n"
    "To call an operation, write a JSON object with its name and arguments between <tool_call> and </tool_call>, e.g.\n"
    "<tool_call>{\"name\": \"crop_image\", \"arguments\": {\"bbox_2d\": [10,10,50,50], \"target_image\": 1}}</tool_call>\n"
    "Stop after the call; the result is returned in the next message.";

void RolloutLimits::validate() const
{
    if (max_visual_ops == 0 || max_steps == 0 || max_context_chars == 0)
        throw InvalidInput("rollout limits must be positive");
}

std::string_view to_string(RolloutStatus status)
{
    switch (status)
    {
        case RolloutStatus::Answered: return "answered";
        case RolloutStatus::NoAnswer: return "no_answer";
        case RolloutStatus::LimitExceeded: return "limit_exceeded";
        case RolloutStatus::Failed: return "failed";
    }
    return "failed";
}

namespace
{

void append_text(Message& m, std::string_view text)
{
    if (text.empty())
        return;
    if (!m.parts.empty())
        if (auto* last = std::get_if<TextPart>(&m.parts.back()))
        {
            last->text += "\n\n";
            last->text += text;
            return;
        }
    m.parts.push_back(TextPart { std::string(text) });
}

const ImageBuffer* resolve(const Attachment& a, const Query& query, const VisualWorkspace& workspace)
{
    if (a.source == Attachment::Source::WorkspaceImage)
        return a.index >= 1 && a.index <= workspace.size() ? &workspace.image(a.index) : nullptr;
    auto const* clip = std::get_if<VideoClip>(&query.visual);
    return clip && a.index < clip->size() ? &clip->frames[a.index] : nullptr;
}

std::string_view trim(std::string_view s)
{
    auto const b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto const e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string describe(const ExecOk& ok)
{
    if (ok.sources.empty())
        return "[no output]";
    if (ok.sources.front().source == Attachment::Source::WorkspaceImage)
    {
        auto const& img = ok.images.front();
        return fmt::format("[image {}: {}x{}]", ok.sources.front().index, img.width, img.height);
    }
    std::vector<std::size_t> idx;
    for (auto const& s: ok.sources)
        idx.push_back(s.index);
    return fmt::format("[frames {}]", fmt::join(idx, ","));
}

} // namespace

Conversation assemble_prompt(const Query& query, const Trajectory& so_far, const VisualWorkspace& workspace, std::string_view system_prompt)
{
    Conversation conv;
    if (!system_prompt.empty())
        conv.messages.push_back({ Role::System, { TextPart { std::string(system_prompt) } } });

    Message user { Role::User, {} };
    if (auto const* img = std::get_if<ImageBuffer>(&query.visual))
        user.parts.push_back(ImagePart { "image 1", img });
    else
    {
        auto const& clip = std::get<VideoClip>(query.visual);
        for (std::size_t i = 0; i < clip.size(); ++i)
            user.parts.push_back(ImagePart { fmt::format("frame {}", i), &clip.frames[i] });
    }
    user.parts.push_back(TextPart { query.text + std::string(kGuidelineSuffix) });
    conv.messages.push_back(std::move(user));

    OutcomeMarkers const markers;
    std::optional<Message> assistant;
    for (auto const& step: so_far.steps)
    {
        if (auto const* outcome = std::get_if<ExecutionOutcome>(&step.payload))
        {
            if (assistant)
                conv.messages.push_back(std::move(*assistant));
            assistant.reset();
            Message tool { Role::Tool, {} };
            tool.parts.push_back(TextPart { outcome->is_error ? markers.error_prefix + outcome->text : outcome->text });
            for (auto const& a: outcome->attachments)
                if (auto const* img = resolve(a, query, workspace))
                    tool.parts.push_back(ImagePart {
                        a.source == Attachment::Source::WorkspaceImage ? fmt::format("image {}", a.index) : fmt::format("frame {}", a.index),
                        img });
            conv.messages.push_back(std::move(tool));
            continue;
        }
        if (!assistant)
            assistant = Message { Role::Assistant, {} };
        append_text(*assistant, render_step(step, markers));
    }
    if (assistant)
        conv.messages.push_back(std::move(*assistant));
    return conv;
}

RolloutResult run_rollout(PolicyBackend& policy, const Query& query, const RolloutOptions& options, std::uint64_t seed, std::size_t rollout_index)
{
    options.limits.validate();
    auto workspace = std::holds_alternative<ImageBuffer>(query.visual) ? VisualWorkspace(std::get<ImageBuffer>(query.visual))
                                                                       : VisualWorkspace(std::get<VideoClip>(query.visual));
    FaultInjector faults(options.fault_probability, Rng::mix(seed ^ 0xfa17ULL));
    Rng seeds(seed);

    RolloutResult result;
    auto& traj = result.trajectory;
    traj.query_id = query.id;
    result.status = RolloutStatus::LimitExceeded;

    bool done = false;
    for (std::size_t turn = 0; turn < options.limits.max_steps && !done; ++turn)
    {
        auto const conv = assemble_prompt(query, traj, workspace, options.system_prompt);
        if (conv.text_chars() > options.limits.max_context_chars)
            break;
        auto const gen = policy.generate(conv, { seeds.next(), rollout_index, turn });
        std::string_view const chunk = gen.text;

        std::size_t cursor = 0;
        bool sawCall = false;
        for (auto& entry: parse_tool_calls(chunk))
        {
            auto const span = std::visit([](const auto& e) {
                if constexpr (std::is_same_v<std::decay_t<decltype(e)>, ToolCall>)
                    return e.source_span;
                else
                    return e.span;
            }, entry);
            if (traj.n_vo() >= options.limits.max_visual_ops)
            {
                done = true;
                break;
            }
            if (auto const t = trim(chunk.substr(cursor, span.begin - cursor)); !t.empty())
                traj.steps.push_back({ TextThought { std::string(t) } });
            cursor = span.end;
            sawCall = true;

            ToolInvocation inv;
            inv.raw = std::string(chunk.substr(span.begin, span.size()));
            ExecutionOutcome outcome;
            if (auto* call = std::get_if<ToolCall>(&entry))
            {
                inv.call = *call;
                auto const res = execute(workspace, *call, &faults, options.select);
                if (auto const* ok = std::get_if<ExecOk>(&res))
                {
                    outcome.text = describe(*ok);
                    outcome.attachments = ok->sources;
                }
                else
                {
                    outcome.is_error = true;
                    outcome.text = std::get<ExecError>(res).message;
                }
            }
            else
            {
                auto const& bad = std::get<MalformedToolCall>(entry);
                inv.call.name = bad.name_hint;
                inv.malformed = bad.reason;
                outcome.is_error = true;
                outcome.text = "malformed tool call: " + bad.reason;
            }
            traj.steps.push_back({ std::move(inv) });
            traj.steps.push_back({ std::move(outcome) });
        }
        if (done)
            break;

        auto const tail = chunk.substr(cursor);
        if (auto const boxed = find_last_boxed(tail))
        {
            if (auto const t = trim(tail.substr(0, *boxed)); !t.empty())
                traj.steps.push_back({ TextThought { std::string(t) } });
            traj.steps.push_back({ FinalAnswer { *extract_boxed_answer(tail), std::string(trim(tail.substr(*boxed))) } });
            result.status = RolloutStatus::Answered;
            done = true;
        }
        else
        {
            if (auto const t = trim(tail); !t.empty())
                traj.steps.push_back({ TextThought { std::string(t) } });
            if (!sawCall)
            {
                result.status = gen.finish == FinishReason::Length ? RolloutStatus::LimitExceeded : RolloutStatus::NoAnswer;
                done = true;
            }
        }
    }

    auto& rec = result.record;
    rec.query_id = query.id;
    rec.trajectory_id = fmt::format("{}#{}", query.id, rollout_index);
    rec.n_vo = traj.n_vo();
    rec.is_pr = rec.n_vo >= 1;
    auto const* answer = traj.final_answer();
    rec.correct = result.status == RolloutStatus::Answered && answer
                      ? correctness_reward(answer->answer, query.gold, options.matcher)
                      : 0;
    return result;
}

GroupResult run_group(PolicyBackend& policy, const Query& query, std::size_t group_size, const RolloutOptions& options,
                      std::uint64_t seed, std::size_t parallelism)
{
    if (group_size == 0)
        throw InvalidInput("group size must be at least 1");
    GroupResult out;
    out.rollouts.resize(group_size);

    auto one = [&](std::size_t i) {
        try
        {
            out.rollouts[i] = run_rollout(policy, query, options, Rng::derive(seed, i).next(), i);
        }
        catch (const std::exception& e)
        {
            auto& r = out.rollouts[i];
            r = RolloutResult {};
            r.trajectory.query_id = query.id;
            r.status = RolloutStatus::Failed;
            r.error = e.what();
            r.record = { query.id, fmt::format("{}#{}", query.id, i), 0, false, 0 };
        }
    };

    auto const workers = std::clamp<std::size_t>(parallelism, 1, group_size);
    if (workers == 1)
        for (std::size_t i = 0; i < group_size; ++i)
            one(i);
    else
    {
        std::atomic<std::size_t> next { 0 };
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (auto i = next++; i < group_size; i = next++)
                    one(i);
            });
        for (auto& t: pool)
            t.join();
    }

    out.group.query_id = query.id;
    for (auto const& r: out.rollouts)
        out.group.records.push_back(r.record);
    return out;
}

Json to_json(const RolloutResult& result)
{
    Json j = to_json(result.trajectory);
    j["trajectory_id"] = result.record.trajectory_id;
    j["status"] = to_string(result.status);
    j["correct"] = result.record.correct;
    if (!result.error.empty())
        j["error"] = result.error;
    return j;
}

ScriptedBackend::ScriptedBackend(std::vector<Script> scripts, bool repeat_last, std::vector<std::size_t> failing_rollouts):
    _scripts(std::move(scripts)), _repeat_last(repeat_last), _failing(std::move(failing_rollouts))
{
    if (_scripts.empty())
        throw InvalidInput("scripted backend needs at least one script");
}

Generation ScriptedBackend::generate(const Conversation&, const GenerationRequest& request)
{
    if (std::find(_failing.begin(), _failing.end(), request.rollout_index) != _failing.end())
        throw BackendUnavailable(fmt::format("scripted failure for rollout {}", request.rollout_index));
    auto const& script = _scripts[request.rollout_index % _scripts.size()];
    if (request.turn < script.size())
        return { script[request.turn], FinishReason::Stop };
    if (_repeat_last && !script.empty())
        return { script.back(), FinishReason::Stop };
    return { {}, FinishReason::Stop };
}

ScriptedBackend ScriptedBackend::from_json(const Json& j)
{
    std::vector<Script> scripts;
    for (auto const& s: j.at("scripts"))
        scripts.push_back(s.get<Script>());
    std::vector<std::size_t> fail;
    if (j.contains("fail"))
        fail = j.at("fail").get<std::vector<std::size_t>>();
    return ScriptedBackend(std::move(scripts), j.value("repeat_last", false), std::move(fail));
}

} // namespace pixkit
