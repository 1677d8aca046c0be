// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/trajectory.hpp>

#include <algorithm>
#include <cctype>

namespace pixkit
{

namespace
{

std::string_view trim(std::string_view s)
{
    auto const isSpace = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && isSpace(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && isSpace(s.back()))
        s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

struct Marker
{
    ByteSpan span;
    StepPayload payload;
};

bool overlaps(const std::vector<Marker>& markers, std::size_t pos)
{
    return std::any_of(markers.begin(), markers.end(), [&](const Marker& m) { return pos >= m.span.begin && pos < m.span.end; });
}

void collect_tool_calls(std::string_view text, std::vector<Marker>& out)
{
    for (auto& entry: parse_tool_calls(text))
    {
        ToolInvocation inv;
        if (auto* call = std::get_if<ToolCall>(&entry))
        {
            inv.raw = std::string(text.substr(call->source_span.begin, call->source_span.size()));
            auto const span = call->source_span;
            inv.call = std::move(*call);
            out.push_back({ span, std::move(inv) });
        }
        else
        {
            auto& bad = std::get<MalformedToolCall>(entry);
            inv.raw = std::string(text.substr(bad.span.begin, bad.span.size()));
            inv.call.name = bad.name_hint;
            inv.call.source_span = bad.span;
            inv.malformed = bad.reason;
            out.push_back({ bad.span, std::move(inv) });
        }
    }
}

ExecutionOutcome make_outcome(std::string_view body, const OutcomeMarkers& markers)
{
    ExecutionOutcome outcome;
    auto content = trim(body);
    if (!markers.error_prefix.empty() && content.starts_with(markers.error_prefix))
    {
        outcome.is_error = true;
        content.remove_prefix(markers.error_prefix.size());
        content = trim(content);
    }
    outcome.text = std::string(content);
    return outcome;
}

void collect_responses(std::string_view text, const OutcomeMarkers& markers, std::vector<Marker>& out)
{
    if (markers.response_open.empty())
        return;
    std::size_t pos = 0;
    std::vector<Marker> found;
    while ((pos = text.find(markers.response_open, pos)) != std::string_view::npos)
    {
        if (overlaps(out, pos))
        {
            pos += markers.response_open.size();
            continue;
        }
        auto const bodyBegin = pos + markers.response_open.size();
        auto close = text.find(markers.response_close, bodyBegin);
        auto const end = close == std::string_view::npos ? text.size() : close + markers.response_close.size();
        auto const bodyEnd = close == std::string_view::npos ? text.size() : close;
        found.push_back({ { pos, end }, make_outcome(text.substr(bodyBegin, bodyEnd - bodyBegin), markers) });
        pos = end;
    }
    out.insert(out.end(), found.begin(), found.end());
}

void collect_error_lines(std::string_view text, const OutcomeMarkers& markers, std::vector<Marker>& out)
{
    if (markers.error_prefix.empty())
        return;
    std::size_t pos = 0;
    std::vector<Marker> found;
    while ((pos = text.find(markers.error_prefix, pos)) != std::string_view::npos)
    {
        bool const lineStart = pos == 0 || text[pos - 1] == '\n';
        if (!lineStart || overlaps(out, pos))
        {
            pos += markers.error_prefix.size();
            continue;
        }
        auto const eol = text.find('\n', pos);
        auto const end = eol == std::string_view::npos ? text.size() : eol;
        found.push_back({ { pos, end }, make_outcome(text.substr(pos, end - pos), markers) });
        pos = end;
    }
    out.insert(out.end(), found.begin(), found.end());
}

std::string guess_operation(const std::vector<TrajectoryStep>& steps)
{
    for (auto it = steps.rbegin(); it != steps.rend(); ++it)
    {
        auto const* thought = std::get_if<TextThought>(&it->payload);
        if (!thought)
            break;
        auto const text = lower(thought->text);
        if (text.find("frame") != std::string::npos)
            return std::string(kSelectFrames);
        if (text.find("zoom") != std::string::npos || text.find("crop") != std::string::npos)
            return std::string(kCropImage);
    }
    return "unknown";
}

void push_text(std::vector<TrajectoryStep>& steps, std::string_view text)
{
    auto const t = trim(text);
    if (!t.empty())
        steps.push_back({ TextThought { std::string(t) } });
}

} // namespace

std::string_view to_string(StepKind kind)
{
    switch (kind)
    {
        case StepKind::TextThought: return "text";
        case StepKind::ToolInvocation: return "tool_call";
        case StepKind::ExecutionOutcome: return "outcome";
        case StepKind::FinalAnswer: return "answer";
    }
    return "unknown";
}

std::size_t Trajectory::n_vo() const
{
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const TrajectoryStep& s) { return s.kind() == StepKind::ToolInvocation; }));
}

const FinalAnswer* Trajectory::final_answer() const
{
    if (steps.empty())
        return nullptr;
    return std::get_if<FinalAnswer>(&steps.back().payload);
}

void Trajectory::validate() const
{
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        switch (steps[i].kind())
        {
            case StepKind::ExecutionOutcome:
                if (i == 0 || steps[i - 1].kind() != StepKind::ToolInvocation)
                    throw ProtocolViolation("execution outcome at step " + std::to_string(i) + " does not follow a tool invocation");
                break;
            case StepKind::FinalAnswer:
                if (i + 1 != steps.size())
                    throw ProtocolViolation("final answer at step " + std::to_string(i) + " is not the last step");
                break;
            default: break;
        }
    }
}

Trajectory segment_trajectory(std::string_view text, const OutcomeMarkers& markers, std::string query_id)
{
    std::vector<Marker> markersFound;
    collect_tool_calls(text, markersFound);
    collect_responses(text, markers, markersFound);
    collect_error_lines(text, markers, markersFound);
    std::sort(markersFound.begin(), markersFound.end(), [](const Marker& a, const Marker& b) { return a.span.begin < b.span.begin; });

    Trajectory trajectory;
    trajectory.query_id = std::move(query_id);
    auto& steps = trajectory.steps;

    std::size_t cursor = 0;
    for (auto& marker: markersFound)
    {
        push_text(steps, text.substr(cursor, marker.span.begin - cursor));
        cursor = marker.span.end;

        if (std::holds_alternative<ExecutionOutcome>(marker.payload))
        {
            bool const follows = !steps.empty() && steps.back().kind() == StepKind::ToolInvocation;
            if (!follows)
            {
                if (!markers.infer_elided_invocations)
                    throw ProtocolViolation("execution outcome at byte " + std::to_string(marker.span.begin)
                                            + " has no preceding tool invocation");
                ToolInvocation inferred;
                inferred.call.name = guess_operation(steps);
                inferred.inferred = true;
                steps.push_back({ std::move(inferred) });
            }
        }
        steps.push_back({ std::move(marker.payload) });
    }

    auto const tail = text.substr(cursor);
    if (auto const boxed = find_last_boxed(tail))
    {
        push_text(steps, tail.substr(0, *boxed));
        FinalAnswer answer;
        answer.answer = *extract_boxed_answer(tail);
        answer.text = std::string(trim(tail.substr(*boxed)));
        steps.push_back({ std::move(answer) });
    }
    else
        push_text(steps, tail);

    return trajectory;
}

std::string render_step(const TrajectoryStep& step, const OutcomeMarkers& markers)
{
    return std::visit(
        [&](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TextThought>)
                return p.text;
            else if constexpr (std::is_same_v<T, ToolInvocation>)
            {
                if (p.inferred)
                    return {};
                return p.raw.empty() ? render_tool_call(p.call) : p.raw;
            }
            else if constexpr (std::is_same_v<T, ExecutionOutcome>)
            {
                if (p.is_error && p.text.find('\n') == std::string::npos)
                    return markers.error_prefix + p.text;
                return markers.response_open + (p.is_error ? markers.error_prefix : std::string {}) + p.text + markers.response_close;
            }
            else
                return p.text.empty() ? "\\boxed{" + p.answer + "}" : p.text;
        },
        step.payload);
}

RenderedTranscript render_transcript(const Trajectory& trajectory, const OutcomeMarkers& markers)
{
    RenderedTranscript out;
    for (auto const& step: trajectory.steps)
    {
        auto piece = render_step(step, markers);
        if (piece.empty())
        {
            out.step_spans.push_back({ out.text.size(), out.text.size() });
            continue;
        }
        if (!out.text.empty())
            out.text += "\n\n";
        auto const begin = out.text.size();
        out.text += piece;
        out.step_spans.push_back({ begin, out.text.size() });
    }
    return out;
}

Json to_json(const TrajectoryStep& step)
{
    Json j;
    j["kind"] = to_string(step.kind());
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TextThought>)
                j["text"] = p.text;
            else if constexpr (std::is_same_v<T, ToolInvocation>)
            {
                j["name"] = p.call.name;
                j["arguments"] = p.call.arguments;
                j["raw"] = p.raw;
                if (p.malformed)
                    j["malformed"] = *p.malformed;
                if (p.inferred)
                    j["inferred"] = true;
            }
            else if constexpr (std::is_same_v<T, ExecutionOutcome>)
            {
                j["text"] = p.text;
                j["is_error"] = p.is_error;
                if (!p.attachments.empty())
                {
                    auto& arr = j["attachments"] = Json::array();
                    for (auto const& a: p.attachments)
                        arr.push_back({ { "source", a.source == Attachment::Source::WorkspaceImage ? "image" : "frame" },
                                        { "index", a.index } });
                }
            }
            else
            {
                j["answer"] = p.answer;
                j["text"] = p.text;
            }
        },
        step.payload);
    j["masked"] = step.masked;
    return j;
}

Json to_json(const Trajectory& trajectory)
{
    Json j;
    j["query_id"] = trajectory.query_id;
    j["n_vo"] = trajectory.n_vo();
    j["is_pixel_space"] = trajectory.is_pixel_space();
    auto& steps = j["steps"] = Json::array();
    for (auto const& step: trajectory.steps)
        steps.push_back(to_json(step));
    return j;
}

TrajectoryStep step_from_json(const Json& j)
{
    auto const kind = j.at("kind").get<std::string>();
    TrajectoryStep step;
    step.masked = j.value("masked", false);
    if (kind == "text")
        step.payload = TextThought { j.at("text").get<std::string>() };
    else if (kind == "tool_call")
    {
        ToolInvocation inv;
        inv.call.name = j.at("name").get<std::string>();
        inv.call.arguments = j.value("arguments", Json::object());
        inv.raw = j.value("raw", std::string {});
        if (j.contains("malformed"))
            inv.malformed = j.at("malformed").get<std::string>();
        inv.inferred = j.value("inferred", false);
        step.payload = std::move(inv);
    }
    else if (kind == "outcome")
    {
        ExecutionOutcome outcome;
        outcome.text = j.at("text").get<std::string>();
        outcome.is_error = j.value("is_error", false);
        if (auto it = j.find("attachments"); it != j.end())
            for (auto const& a: *it)
                outcome.attachments.push_back({ a.at("source") == "frame" ? Attachment::Source::ClipFrame : Attachment::Source::WorkspaceImage,
                                                a.at("index").get<std::size_t>() });
        step.payload = std::move(outcome);
    }
    else if (kind == "answer")
        step.payload = FinalAnswer { j.at("answer").get<std::string>(), j.value("text", std::string {}) };
    else
        throw InvalidInput("unknown step kind '" + kind + "'");
    return step;
}

Trajectory trajectory_from_json(const Json& j)
{
    Trajectory t;
    t.query_id = j.value("query_id", std::string {});
    for (auto const& s: j.at("steps"))
        t.steps.push_back(step_from_json(s));
    return t;
}

} // namespace pixkit
