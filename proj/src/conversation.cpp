// SPDX-License-Identifier: Apache-2.0
#include <pixkit/conversation.hpp>

#include <fmt/format.h>

namespace pixkit
{

std::string_view to_string(Role role)
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "user";
}

std::string Message::text() const
{
    std::string out;
    for (auto const& part: parts)
        if (auto const* t = std::get_if<TextPart>(&part))
            out += t->text;
    return out;
}

std::uint64_t image_digest(const ImageBuffer& image)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](std::uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (int shift = 0; shift < 64; shift += 8)
    {
        feed(static_cast<std::uint8_t>(image.width >> shift));
        feed(static_cast<std::uint8_t>(image.height >> shift));
    }
    for (auto b: image.pixels)
        feed(b);
    return h;
}

std::string Conversation::serialize() const
{
    std::string out;
    for (auto const& m: messages)
    {
        out += fmt::format("<|{}|>\n", to_string(m.role));
        for (auto const& part: m.parts)
        {
            if (auto const* t = std::get_if<TextPart>(&part))
                out += t->text;
            else
            {
                auto const& img = std::get<ImagePart>(part);
                if (img.image)
                    out += fmt::format("[{} {}x{} {:016x}]", img.label, img.image->width, img.image->height, image_digest(*img.image));
                else
                    out += fmt::format("[{} missing]", img.label);
            }
        }
        out += "\n<|end|>\n";
    }
    return out;
}

std::size_t Conversation::text_chars() const
{
    std::size_t n = 0;
    for (auto const& m: messages)
        for (auto const& part: m.parts)
            if (auto const* t = std::get_if<TextPart>(&part))
                n += t->text.size();
    return n;
}

} // namespace pixkit
