// SPDX-License-Identifier: Apache-2.0
#include <pixkit/tool_protocol.hpp>

#include <algorithm>
#include <cctype>

namespace pixkit
{

namespace
{

constexpr std::string_view kBoxedOpen = "\\boxed{";

std::string_view trim(std::string_view s)
{
    auto const isSpace = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && isSpace(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && isSpace(s.back()))
        s.remove_suffix(1);
    return s;
}

// Pull `"name": "..."` out of text that failed to parse, so a truncated call
// still reports which operation was attempted.
std::string scan_name_hint(std::string_view payload)
{
    auto key = payload.find("\"name\"");
    if (key == std::string_view::npos)
        return {};
    auto i = key + 6;
    while (i < payload.size() && std::isspace(static_cast<unsigned char>(payload[i])))
        ++i;
    if (i >= payload.size() || payload[i] != ':')
        return {};
    ++i;
    while (i < payload.size() && std::isspace(static_cast<unsigned char>(payload[i])))
        ++i;
    if (i >= payload.size() || payload[i] != '"')
        return {};
    auto const close = payload.find('"', i + 1);
    if (close == std::string_view::npos)
        return {};
    return std::string(payload.substr(i + 1, close - i - 1));
}

void write_string(const std::string& s, std::string& out)
{
    auto dumped = Json(s).dump(-1, ' ', false, Json::error_handler_t::replace);
    // neither tag may appear inside a payload, or the block would split on re-parse
    std::string_view const view = dumped;
    for (std::size_t i = 0; i < dumped.size(); ++i)
    {
        if (dumped[i] == '<' && view.substr(i).starts_with(kToolCallOpen))
        {
            out += "\\u003c";
            continue;
        }
        out.push_back(dumped[i]);
        if (dumped[i] == '<' && i + 1 < dumped.size() && dumped[i + 1] == '/')
            out.push_back('\\');
    }
}

void write_canonical(const Json& value, std::string& out)
{
    switch (value.type())
    {
        case Json::value_t::object: {
            out.push_back('{');
            bool first = true;
            for (auto const& [key, item]: value.items())
            {
                if (!first)
                    out += ", ";
                first = false;
                write_string(key, out);
                out += ": ";
                write_canonical(item, out);
            }
            out.push_back('}');
            break;
        }
        case Json::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (auto const& item: value)
            {
                if (!first)
                    out.push_back(',');
                first = false;
                write_canonical(item, out);
            }
            out.push_back(']');
            break;
        }
        case Json::value_t::string:
            write_string(value.get_ref<const std::string&>(), out);
            break;
        default:
            out += value.dump(-1, ' ', false, Json::error_handler_t::replace);
            break;
    }
}

// Closing brace for the `\boxed{` at `start`, if the braces balance.
std::optional<std::size_t> boxed_close(std::string_view text, std::size_t start)
{
    int depth = 1;
    for (auto i = start + kBoxedOpen.size(); i < text.size(); ++i)
    {
        if (text[i] == '{')
            ++depth;
        else if (text[i] == '}' && --depth == 0)
            return i;
    }
    return std::nullopt;
}

} // namespace

bool is_known_operation(std::string_view name)
{
    return name == kCropImage || name == kSelectFrames;
}

ToolCallEntry parse_tool_call_payload(std::string_view payload, ByteSpan span)
{
    auto const body = trim(payload);
    auto parsed = Json::parse(body.begin(), body.end(), nullptr, false);
    if (parsed.is_discarded())
        return MalformedToolCall { span, "payload is not valid JSON", scan_name_hint(body) };
    if (!parsed.is_object())
        return MalformedToolCall { span, "payload is not a JSON object", {} };

    auto const name = parsed.find("name");
    if (name == parsed.end() || !name->is_string() || name->get_ref<const std::string&>().empty())
        return MalformedToolCall { span, "missing or empty \"name\"", {} };

    ToolCall call;
    call.name = name->get<std::string>();
    call.source_span = span;

    if (auto const args = parsed.find("arguments"); args != parsed.end())
    {
        if (args->is_object())
            call.arguments = *args;
        else if (args->is_string())
        {
            // some models double-encode the arguments object
            auto inner = Json::parse(args->get_ref<const std::string&>(), nullptr, false);
            if (inner.is_discarded() || !inner.is_object())
                return MalformedToolCall { span, "\"arguments\" must be a JSON object", call.name };
            call.arguments = std::move(inner);
        }
        else if (!args->is_null())
            return MalformedToolCall { span, "\"arguments\" must be a JSON object", call.name };
    }
    return call;
}

std::vector<ToolCallEntry> parse_tool_calls(std::string_view text)
{
    std::vector<ToolCallEntry> entries;
    std::size_t pos = 0;
    while (true)
    {
        auto const open = text.find(kToolCallOpen, pos);
        if (open == std::string_view::npos)
            break;
        auto const contentBegin = open + kToolCallOpen.size();
        auto const close = text.find(kToolCallClose, contentBegin);
        auto const nextOpen = text.find(kToolCallOpen, contentBegin);

        if (close == std::string_view::npos || (nextOpen != std::string_view::npos && nextOpen < close))
        {
            auto const end = nextOpen == std::string_view::npos ? text.size() : nextOpen;
            auto const body = text.substr(contentBegin, end - contentBegin);
            entries.emplace_back(MalformedToolCall { { open, end }, "unterminated <tool_call> block", scan_name_hint(body) });
            pos = end;
            continue;
        }

        ByteSpan const span { open, close + kToolCallClose.size() };
        entries.push_back(parse_tool_call_payload(text.substr(contentBegin, close - contentBegin), span));
        pos = span.end;
    }
    return entries;
}

std::string canonical_json(const Json& value)
{
    std::string out;
    write_canonical(value, out);
    return out;
}

std::string render_tool_call(const ToolCall& call)
{
    std::string out(kToolCallOpen);
    out += "{\"name\": ";
    write_string(call.name, out);
    out += ", \"arguments\": ";
    write_canonical(call.arguments.is_null() ? Json::object() : call.arguments, out);
    out += "}";
    out += kToolCallClose;
    return out;
}

std::optional<std::size_t> find_last_boxed(std::string_view text)
{
    auto pos = text.rfind(kBoxedOpen);
    while (pos != std::string_view::npos)
    {
        if (boxed_close(text, pos))
            return pos;
        if (pos == 0)
            break;
        pos = text.rfind(kBoxedOpen, pos - 1);
    }
    return std::nullopt;
}

std::optional<std::string> extract_boxed_answer(std::string_view text)
{
    auto const start = find_last_boxed(text);
    if (!start)
        return std::nullopt;
    auto const close = *boxed_close(text, *start);
    auto const contentBegin = *start + kBoxedOpen.size();
    return std::string(text.substr(contentBegin, close - contentBegin));
}

} // namespace pixkit
