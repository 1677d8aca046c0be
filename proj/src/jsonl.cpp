// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/jsonl.hpp>

#include <fmt/format.h>

#include <fstream>
#include <iterator>
#include <random>
#include <system_error>

namespace pixkit
{

namespace fs = std::filesystem;

std::vector<Json> read_jsonl(std::istream& in)
{
    std::vector<Json> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n)
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto j = Json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw InvalidInput(fmt::format("line {}: invalid JSON", n));
        out.push_back(std::move(j));
    }
    return out;
}

std::vector<Json> read_jsonl_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try
    {
        return read_jsonl(in);
    }
    catch (const InvalidInput& e)
    {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return { std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>() };
}

void write_file_atomic(const fs::path& path, std::string_view content)
{
    auto const dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    auto const tmp = dir / fmt::format(".{}.tmp{:08x}", path.filename().string(), std::random_device {}());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
        {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
    {
        fs::remove(tmp, ec);
        throw IoError(fmt::format("cannot replace {}: {}", path.string(), ec.message()));
    }
}

} // namespace pixkit
