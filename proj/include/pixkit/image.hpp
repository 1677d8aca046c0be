// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pixkit
{

/// Row-major RGB8 image.
struct ImageBuffer
{
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    ImageBuffer() = default;
    ImageBuffer(std::size_t w, std::size_t h): width(w), height(h), pixels(w * h * 3, 0) {}
    ImageBuffer(std::size_t w, std::size_t h, std::vector<std::uint8_t> data);

    [[nodiscard]] bool valid() const { return width >= 1 && height >= 1 && pixels.size() == width * height * 3; }
    [[nodiscard]] const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return &pixels[(y * width + x) * 3]; }
    [[nodiscard]] std::uint8_t* pixel(std::size_t x, std::size_t y) { return &pixels[(y * width + x) * 3]; }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

struct VideoClip
{
    std::vector<ImageBuffer> frames;

    [[nodiscard]] std::size_t size() const { return frames.size(); }
    /// Non-empty and every frame shares the first frame's dimensions.
    [[nodiscard]] bool valid() const;
};

[[nodiscard]] ImageBuffer read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageBuffer& image);
[[nodiscard]] std::vector<std::uint8_t> encode_png(const ImageBuffer& image);

/// Headerless RGB8 dump; dimensions come from the caller.
[[nodiscard]] ImageBuffer read_raw_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height);
void write_raw_rgb(const std::filesystem::path& path, const ImageBuffer& image);

/// Loads .png, .ppm (binary P6) by extension.
[[nodiscard]] ImageBuffer read_image(const std::filesystem::path& path);

/// Frames stored as frame_0000.png, frame_0001.png, ... in one directory.
[[nodiscard]] VideoClip read_frames_dir(const std::filesystem::path& dir);
void write_frames_dir(const std::filesystem::path& dir, const VideoClip& clip);
[[nodiscard]] std::string frame_file_name(std::size_t index);

} // namespace pixkit
