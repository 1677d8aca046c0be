// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/image.hpp>
#include <pixkit/random.hpp>
#include <pixkit/tool_protocol.hpp>
#include <pixkit/trajectory.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pixkit
{

/// Crop rectangle in pixel coordinates of the target image. Fractional values
/// are truncated toward zero before use.
struct BBox
{
    double x1 = 0;
    double y1 = 0;
    double x2 = 0;
    double y2 = 0;

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Integer rectangle after truncation, half-open on the right and bottom.
struct PixelRect
{
    std::int64_t x1 = 0;
    std::int64_t y1 = 0;
    std::int64_t x2 = 0;
    std::int64_t y2 = 0;

    [[nodiscard]] std::int64_t width() const { return x2 - x1; }
    [[nodiscard]] std::int64_t height() const { return y2 - y1; }
    [[nodiscard]] std::int64_t area() const { return width() > 0 && height() > 0 ? width() * height() : 0; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

[[nodiscard]] PixelRect truncate(const BBox& box);
[[nodiscard]] std::int64_t intersection_area(const PixelRect& a, const PixelRect& b);
/// inner lies inside outer.
[[nodiscard]] bool contains(const PixelRect& outer, const PixelRect& inner);

enum class ExecErrorCode
{
    OutOfBounds,
    EmptySelection,
    TooManyFrames,
    BadTargetIndex,
    DegenerateBBox,
    InjectedFault,
    ArgumentError,
    UnknownOperation,
};

[[nodiscard]] std::string_view to_string(ExecErrorCode code);

struct ExecError
{
    ExecErrorCode code;
    std::string message;
};

struct ExecOk
{
    std::vector<ImageBuffer> images;
    /// Where each returned image lives: a workspace slot for crops, a clip
    /// frame for selections.
    std::vector<Attachment> sources;
};

using ExecResult = std::variant<ExecOk, ExecError>;

[[nodiscard]] inline bool succeeded(const ExecResult& r) { return std::holds_alternative<ExecOk>(r); }

/// Images an agent can operate on. Slot 1 is the original image; crops are
/// appended and slots are never reused. A video query carries its clip here
/// and starts with no image slots.
class VisualWorkspace
{
  public:
    VisualWorkspace() = default;
    explicit VisualWorkspace(ImageBuffer original);
    explicit VisualWorkspace(VideoClip clip);

    [[nodiscard]] std::size_t size() const { return _images.size(); }
    /// 1-based.
    [[nodiscard]] const ImageBuffer& image(std::size_t index) const { return _images.at(index - 1); }
    [[nodiscard]] const std::vector<ImageBuffer>& images() const { return _images; }
    [[nodiscard]] const std::optional<VideoClip>& clip() const { return _clip; }

    /// Returns the new 1-based slot.
    std::size_t append(ImageBuffer image);

  private:
    std::vector<ImageBuffer> _images;
    std::optional<VideoClip> _clip;
};

struct SelectOptions
{
    std::size_t max_frames = 8;
    /// Mirrors the message the reference implementation surfaces for an empty list.
    std::string empty_message = "max() arg is an empty sequence";
};

/// Fires independently per call with the given probability.
class FaultInjector
{
  public:
    FaultInjector(double probability, std::uint64_t seed): _probability(probability), _rng(seed) {}
    bool fire() { return _probability > 0 && _rng.bernoulli(_probability); }

  private:
    double _probability;
    Rng _rng;
};

/// Appends the crop to the workspace on success.
[[nodiscard]] ExecResult crop_image(VisualWorkspace& workspace, const BBox& bbox, std::int64_t target_image);

/// 0-based frame indices; duplicates are returned duplicated.
[[nodiscard]] ExecResult select_frames(const VideoClip& clip, const std::vector<std::int64_t>& target_frames,
                                       const SelectOptions& options = {});

/// Validates arguments and dispatches by name. Never throws on bad requests.
[[nodiscard]] ExecResult execute(VisualWorkspace& workspace, const ToolCall& call, FaultInjector* faults = nullptr,
                                 const SelectOptions& options = {});

} // namespace pixkit
