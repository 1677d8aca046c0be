// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/visual_ops.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pixkit
{

namespace
{

// Saturates so absurd coordinates stay well-defined; anything this large is
// out of bounds for every image anyway.
std::int64_t to_pixel(double v)
{
    constexpr double kLimit = 0x1p40;
    return static_cast<std::int64_t>(std::clamp(std::trunc(v), -kLimit, kLimit));
}

} // namespace

PixelRect truncate(const BBox& box)
{
    return { to_pixel(box.x1), to_pixel(box.y1), to_pixel(box.x2), to_pixel(box.y2) };
}

std::int64_t intersection_area(const PixelRect& a, const PixelRect& b)
{
    PixelRect const i { std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2), std::min(a.y2, b.y2) };
    return i.area();
}

bool contains(const PixelRect& outer, const PixelRect& inner)
{
    return outer.x1 <= inner.x1 && outer.y1 <= inner.y1 && outer.x2 >= inner.x2 && outer.y2 >= inner.y2;
}

std::string_view to_string(ExecErrorCode code)
{
    switch (code)
    {
        case ExecErrorCode::OutOfBounds: return "OutOfBounds";
        case ExecErrorCode::EmptySelection: return "EmptySelection";
        case ExecErrorCode::TooManyFrames: return "TooManyFrames";
        case ExecErrorCode::BadTargetIndex: return "BadTargetIndex";
        case ExecErrorCode::DegenerateBBox: return "DegenerateBBox";
        case ExecErrorCode::InjectedFault: return "InjectedFault";
        case ExecErrorCode::ArgumentError: return "ArgumentError";
        case ExecErrorCode::UnknownOperation: return "UnknownOperation";
    }
    return "Unknown";
}

VisualWorkspace::VisualWorkspace(ImageBuffer original)
{
    if (!original.valid())
        throw InvalidInput("workspace image must be non-empty with a matching pixel buffer");
    _images.push_back(std::move(original));
}

VisualWorkspace::VisualWorkspace(VideoClip clip)
{
    if (!clip.valid())
        throw InvalidInput("video clip must be non-empty with uniform frame sizes");
    _clip = std::move(clip);
}

std::size_t VisualWorkspace::append(ImageBuffer image)
{
    _images.push_back(std::move(image));
    return _images.size();
}

ExecResult crop_image(VisualWorkspace& workspace, const BBox& bbox, std::int64_t target_image)
{
    if (target_image < 1 || static_cast<std::size_t>(target_image) > workspace.size())
        return ExecError { ExecErrorCode::BadTargetIndex,
                           fmt::format("target_image {} is not available; valid indices are 1..{}", target_image, workspace.size()) };
    if (!std::isfinite(bbox.x1) || !std::isfinite(bbox.y1) || !std::isfinite(bbox.x2) || !std::isfinite(bbox.y2))
        return ExecError { ExecErrorCode::ArgumentError, "bbox_2d coordinates must be finite numbers" };

    // checked on the truncated doubles so huge values cannot overflow
    double const x1 = std::trunc(bbox.x1), y1 = std::trunc(bbox.y1), x2 = std::trunc(bbox.x2), y2 = std::trunc(bbox.y2);
    if (x2 <= x1 || y2 <= y1)
        return ExecError { ExecErrorCode::DegenerateBBox, fmt::format("bbox [{},{},{},{}] has zero area", x1, y1, x2, y2) };

    auto const& src = workspace.image(static_cast<std::size_t>(target_image));
    if (x1 < 0 || y1 < 0 || x2 > double(src.width) || y2 > double(src.height))
        return ExecError { ExecErrorCode::OutOfBounds, fmt::format("bbox [{},{},{},{}] exceeds image {} bounds {}x{}", x1, y1, x2, y2,
                                                                   target_image, src.width, src.height) };
    auto const r = truncate(bbox);

    ImageBuffer out(static_cast<std::size_t>(r.width()), static_cast<std::size_t>(r.height()));
    auto const rowBytes = out.width * 3;
    for (std::size_t j = 0; j < out.height; ++j)
        std::memcpy(out.pixel(0, j), src.pixel(static_cast<std::size_t>(r.x1), static_cast<std::size_t>(r.y1) + j), rowBytes);

    ExecOk ok;
    ok.images.push_back(out);
    ok.sources.push_back({ Attachment::Source::WorkspaceImage, workspace.append(std::move(out)) });
    return ok;
}

ExecResult select_frames(const VideoClip& clip, const std::vector<std::int64_t>& target_frames, const SelectOptions& options)
{
    if (target_frames.empty())
        return ExecError { ExecErrorCode::EmptySelection, options.empty_message };
    if (target_frames.size() > options.max_frames)
        return ExecError { ExecErrorCode::TooManyFrames,
                           fmt::format("selected {} frames; at most {} are allowed", target_frames.size(), options.max_frames) };
    auto const n = static_cast<std::int64_t>(clip.size());
    for (auto const idx: target_frames)
        if (idx < 0 || idx >= n)
            return ExecError { ExecErrorCode::OutOfBounds, fmt::format("frame index {} is outside 0..{}", idx, n - 1) };

    ExecOk ok;
    for (auto const idx: target_frames)
    {
        ok.images.push_back(clip.frames[static_cast<std::size_t>(idx)]);
        ok.sources.push_back({ Attachment::Source::ClipFrame, static_cast<std::size_t>(idx) });
    }
    return ok;
}

namespace
{

std::optional<std::int64_t> as_integer(const Json& v)
{
    if (v.is_number_integer())
        return v.get<std::int64_t>();
    if (v.is_number_float())
    {
        auto const d = v.get<double>();
        if (std::isfinite(d) && d == std::trunc(d) && std::abs(d) < 9.0e15)
            return static_cast<std::int64_t>(d);
    }
    return std::nullopt;
}

ExecError argument_error(std::string message)
{
    return { ExecErrorCode::ArgumentError, std::move(message) };
}

} // namespace

ExecResult execute(VisualWorkspace& workspace, const ToolCall& call, FaultInjector* faults, const SelectOptions& options)
{
    auto const& args = call.arguments;
    if (call.name == kCropImage)
    {
        auto const box = args.find("bbox_2d");
        if (box == args.end())
            return argument_error("crop_image requires \"bbox_2d\"");
        if (!box->is_array() || box->size() != 4
            || !std::all_of(box->begin(), box->end(), [](const Json& v) { return v.is_number(); }))
            return argument_error("\"bbox_2d\" must be a list of 4 numbers");
        auto const target = args.find("target_image");
        if (target == args.end())
            return argument_error("crop_image requires \"target_image\"");
        auto const index = as_integer(*target);
        if (!index)
            return argument_error("\"target_image\" must be an integer");
        if (faults && faults->fire())
            return ExecError { ExecErrorCode::InjectedFault, "injected fault: operation not executed" };
        BBox const b { (*box)[0].get<double>(), (*box)[1].get<double>(), (*box)[2].get<double>(), (*box)[3].get<double>() };
        return crop_image(workspace, b, *index);
    }
    if (call.name == kSelectFrames)
    {
        auto const frames = args.find("target_frames");
        if (frames == args.end())
            return argument_error("select_frames requires \"target_frames\"");
        if (!frames->is_array())
            return argument_error("\"target_frames\" must be a list of integers");
        std::vector<std::int64_t> indices;
        for (auto const& v: *frames)
        {
            auto const i = as_integer(v);
            if (!i)
                return argument_error("\"target_frames\" must be a list of integers");
            indices.push_back(*i);
        }
        if (!workspace.clip())
            return argument_error("select_frames needs a video input");
        if (faults && faults->fire())
            return ExecError { ExecErrorCode::InjectedFault, "injected fault: operation not executed" };
        return select_frames(*workspace.clip(), indices, options);
    }
    return ExecError { ExecErrorCode::UnknownOperation, fmt::format("unknown operation \"{}\"", call.name) };
}

} // namespace pixkit
