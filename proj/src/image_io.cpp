// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/image.hpp>

#include <fmt/format.h>
#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pixkit
{

namespace fs = std::filesystem;

ImageBuffer::ImageBuffer(std::size_t w, std::size_t h, std::vector<std::uint8_t> data):
    width(w), height(h), pixels(std::move(data))
{
    if (pixels.size() != width * height * 3)
        throw InvalidInput(fmt::format("pixel buffer holds {} bytes, {}x{} RGB needs {}", pixels.size(), w, h, w * h * 3));
}

bool VideoClip::valid() const
{
    if (frames.empty() || !frames.front().valid())
        return false;
    return std::all_of(frames.begin(), frames.end(), [&](const ImageBuffer& f) {
        return f.valid() && f.width == frames.front().width && f.height == frames.front().height;
    });
}

namespace
{

std::vector<std::uint8_t> slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return { std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>() };
}

void spill(const fs::path& path, const void* data, std::size_t size)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out)
        throw IoError("short write to " + path.string());
}

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes, const std::string& what)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw IoError(what + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    ImageBuffer out(img.width, img.height);
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr))
    {
        png_image_free(&img);
        throw IoError(what + ": " + img.message);
    }
    return out;
}

// P6 with maxval 255; comments allowed between header tokens.
ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& what)
{
    std::size_t pos = 0;
    auto skip = [&] {
        while (pos < bytes.size())
        {
            if (bytes[pos] == '#')
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            else if (std::isspace(bytes[pos]))
                ++pos;
            else
                break;
        }
    };
    auto number = [&]() -> std::size_t {
        skip();
        std::size_t v = 0;
        bool any = false;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9')
        {
            v = v * 10 + (bytes[pos++] - '0');
            any = true;
        }
        if (!any)
            throw IoError(what + ": malformed PPM header");
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw IoError(what + ": not a binary PPM");
    pos = 2;
    auto const w = number();
    auto const h = number();
    auto const maxval = number();
    if (maxval != 255)
        throw IoError(what + ": only 8-bit PPM is supported");
    ++pos; // single whitespace before raster
    if (w == 0 || h == 0 || bytes.size() < pos + w * h * 3)
        throw IoError(what + ": truncated PPM raster");
    return ImageBuffer(w, h, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + w * h * 3)));
}

} // namespace

ImageBuffer read_png(const fs::path& path)
{
    return decode_png(slurp(path), path.string());
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& image)
{
    if (!image.valid())
        throw InvalidInput("cannot encode an empty image");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr))
        throw IoError(std::string("png encode: ") + img.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr))
        throw IoError(std::string("png encode: ") + img.message);
    out.resize(size);
    return out;
}

void write_png(const fs::path& path, const ImageBuffer& image)
{
    auto const bytes = encode_png(image);
    spill(path, bytes.data(), bytes.size());
}

ImageBuffer read_raw_rgb(const fs::path& path, std::size_t width, std::size_t height)
{
    auto bytes = slurp(path);
    if (bytes.size() != width * height * 3)
        throw IoError(fmt::format("{}: {} bytes, expected {} for {}x{} RGB", path.string(), bytes.size(), width * height * 3, width, height));
    return ImageBuffer(width, height, std::move(bytes));
}

void write_raw_rgb(const fs::path& path, const ImageBuffer& image)
{
    spill(path, image.pixels.data(), image.pixels.size());
}

ImageBuffer read_image(const fs::path& path)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png")
        return read_png(path);
    if (ext == ".ppm")
        return decode_ppm(slurp(path), path.string());
    throw IoError(path.string() + ": unsupported image type (use .png, .ppm, or .rgb with explicit size)");
}

std::string frame_file_name(std::size_t index)
{
    return fmt::format("frame_{:04d}.png", index);
}

VideoClip read_frames_dir(const fs::path& dir)
{
    VideoClip clip;
    for (std::size_t i = 0;; ++i)
    {
        auto const file = dir / frame_file_name(i);
        if (!fs::exists(file))
            break;
        clip.frames.push_back(read_png(file));
    }
    if (clip.frames.empty())
        throw IoError(dir.string() + ": no frame_0000.png found");
    if (!clip.valid())
        throw IoError(dir.string() + ": frames differ in size");
    return clip;
}

void write_frames_dir(const fs::path& dir, const VideoClip& clip)
{
    fs::create_directories(dir);
    for (std::size_t i = 0; i < clip.frames.size(); ++i)
        write_png(dir / frame_file_name(i), clip.frames[i]);
}

} // namespace pixkit
