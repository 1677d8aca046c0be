// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <pixkit/visual_ops.hpp>

#include <gtest/gtest.h>

using namespace pixkit;
using pixkit::testing::random_clip;
using pixkit::testing::random_image;

namespace
{

ExecErrorCode code_of(const ExecResult& r) { return std::get<ExecError>(r).code; }

ToolCall call(std::string name, const char* args) { return { std::move(name), Json::parse(args) }; }

} // namespace

TEST(CropImage, FortyByForty)
{
    Rng rng(1);
    VisualWorkspace ws(random_image(rng, 100, 100));
    auto const r = crop_image(ws, { 10, 10, 50, 50 }, 1);
    ASSERT_TRUE(succeeded(r));
    auto const& ok = std::get<ExecOk>(r);
    EXPECT_EQ(ok.images.at(0).width, 40u);
    EXPECT_EQ(ok.images.at(0).height, 40u);
    EXPECT_EQ(ws.size(), 2u);
    EXPECT_EQ(ok.sources.at(0), (Attachment { Attachment::Source::WorkspaceImage, 2 }));
    EXPECT_EQ(ws.image(2), ok.images[0]);
}

TEST(CropImage, ErrorCodes)
{
    Rng rng(2);
    VisualWorkspace ws(random_image(rng, 100, 100));
    EXPECT_EQ(code_of(crop_image(ws, { 0, 0, 0, 0 }, 1)), ExecErrorCode::DegenerateBBox);
    EXPECT_EQ(code_of(crop_image(ws, { 50, 10, 40, 60 }, 1)), ExecErrorCode::DegenerateBBox);
    EXPECT_EQ(code_of(crop_image(ws, { 10.2, 10, 10.9, 60 }, 1)), ExecErrorCode::DegenerateBBox);
    EXPECT_EQ(code_of(crop_image(ws, { 90, 90, 120, 120 }, 1)), ExecErrorCode::OutOfBounds);
    EXPECT_EQ(code_of(crop_image(ws, { -1, 0, 10, 10 }, 1)), ExecErrorCode::OutOfBounds);
    EXPECT_EQ(code_of(crop_image(ws, { 0, 0, 10, 10 }, 2)), ExecErrorCode::BadTargetIndex);
    EXPECT_EQ(code_of(crop_image(ws, { 0, 0, 10, 10 }, 0)), ExecErrorCode::BadTargetIndex);
    EXPECT_EQ(code_of(crop_image(ws, { 0, 0, std::nan(""), 10 }, 1)), ExecErrorCode::ArgumentError);
    EXPECT_EQ(ws.size(), 1u);
}

TEST(CropImage, FractionalCoordinatesTruncate)
{
    Rng rng(3);
    VisualWorkspace ws(random_image(rng, 20, 20));
    auto const r = crop_image(ws, { 1.9, 2.5, 7.99, 9.1 }, 1);
    ASSERT_TRUE(succeeded(r));
    EXPECT_EQ(std::get<ExecOk>(r).images[0].width, 6u);
    EXPECT_EQ(std::get<ExecOk>(r).images[0].height, 7u);
    EXPECT_EQ(std::get<ExecOk>(r).images[0].pixel(0, 0)[0], ws.image(1).pixel(1, 2)[0]);
}

TEST(CropImage, ReferencePixelOracle)
{
    Rng rng(42);
    for (int n = 0; n < 500; ++n)
    {
        auto const w = 1 + rng.below(64);
        auto const h = 1 + rng.below(64);
        VisualWorkspace ws(random_image(rng, w, h));
        auto const x1 = rng.range(0, static_cast<std::int64_t>(w) - 1);
        auto const y1 = rng.range(0, static_cast<std::int64_t>(h) - 1);
        auto const x2 = rng.range(x1 + 1, static_cast<std::int64_t>(w));
        auto const y2 = rng.range(y1 + 1, static_cast<std::int64_t>(h));
        auto const r = crop_image(ws, { double(x1), double(y1), double(x2), double(y2) }, 1);
        ASSERT_TRUE(succeeded(r));
        auto const& out = std::get<ExecOk>(r).images[0];
        ASSERT_EQ(out.width, std::size_t(x2 - x1));
        ASSERT_EQ(out.height, std::size_t(y2 - y1));
        auto const& src = ws.image(1);
        for (std::size_t j = 0; j < out.height; ++j)
            for (std::size_t i = 0; i < out.width; ++i)
                for (int c = 0; c < 3; ++c)
                    ASSERT_EQ(out.pixels[(j * out.width + i) * 3 + c], src.pixels[((y1 + j) * w + x1 + i) * 3 + c]);
    }
}

TEST(CropImage, BoundsAgreeWithOracle)
{
    Rng rng(7);
    for (int n = 0; n < 2000; ++n)
    {
        auto const w = 1 + rng.below(40);
        auto const h = 1 + rng.below(40);
        VisualWorkspace ws(random_image(rng, w, h));
        BBox b { double(rng.range(-5, 45)), double(rng.range(-5, 45)), double(rng.range(-5, 45)), double(rng.range(-5, 45)) };
        auto const r = crop_image(ws, b, 1);
        bool const degenerate = b.x2 <= b.x1 || b.y2 <= b.y1;
        bool const outside = b.x1 < 0 || b.y1 < 0 || b.x2 > double(w) || b.y2 > double(h);
        if (degenerate)
            EXPECT_EQ(code_of(r), ExecErrorCode::DegenerateBBox);
        else if (outside)
            EXPECT_EQ(code_of(r), ExecErrorCode::OutOfBounds);
        else
        {
            EXPECT_TRUE(succeeded(r));
        }
    }
}

TEST(VisualWorkspace, ExistingImagesNeverChange)
{
    Rng rng(9);
    VisualWorkspace ws(random_image(rng, 32, 32));
    std::vector<ImageBuffer> snapshot { ws.image(1) };
    for (int n = 0; n < 200; ++n)
    {
        auto const target = rng.range(0, static_cast<std::int64_t>(ws.size()) + 1);
        (void)crop_image(ws, { double(rng.range(0, 10)), double(rng.range(0, 10)), double(rng.range(0, 20)), double(rng.range(0, 20)) }, target);
        ASSERT_GE(ws.size(), snapshot.size());
        for (std::size_t i = 0; i < snapshot.size(); ++i)
            ASSERT_EQ(ws.image(i + 1), snapshot[i]);
        if (ws.size() > snapshot.size())
        {
            ASSERT_EQ(ws.size(), snapshot.size() + 1);
            snapshot.push_back(ws.image(ws.size()));
        }
    }
}

TEST(SelectFrames, Projection)
{
    Rng rng(4);
    auto const clip = random_clip(rng, 16);
    auto const r = select_frames(clip, { 2, 5, 9 });
    ASSERT_TRUE(succeeded(r));
    auto const& ok = std::get<ExecOk>(r);
    ASSERT_EQ(ok.images.size(), 3u);
    EXPECT_EQ(ok.images[0], clip.frames[2]);
    EXPECT_EQ(ok.images[1], clip.frames[5]);
    EXPECT_EQ(ok.images[2], clip.frames[9]);
    EXPECT_EQ(ok.sources[2], (Attachment { Attachment::Source::ClipFrame, 9 }));
}

TEST(SelectFrames, DuplicatesKeepOrder)
{
    Rng rng(5);
    auto const clip = random_clip(rng, 4);
    auto const r = select_frames(clip, { 3, 0, 3 });
    auto const& ok = std::get<ExecOk>(r);
    ASSERT_EQ(ok.images.size(), 3u);
    EXPECT_EQ(ok.images[0], clip.frames[3]);
    EXPECT_EQ(ok.images[1], clip.frames[0]);
    EXPECT_EQ(ok.images[2], clip.frames[3]);
}

TEST(SelectFrames, ErrorCodes)
{
    Rng rng(6);
    auto const clip = random_clip(rng, 16);
    EXPECT_EQ(code_of(select_frames(clip, { 0, 1, 2, 3, 4, 5, 6, 7, 8 })), ExecErrorCode::TooManyFrames);
    EXPECT_TRUE(succeeded(select_frames(clip, { 0, 1, 2, 3, 4, 5, 6, 7 })));
    EXPECT_EQ(code_of(select_frames(clip, { 16 })), ExecErrorCode::OutOfBounds);
    EXPECT_EQ(code_of(select_frames(clip, { -1 })), ExecErrorCode::OutOfBounds);
    auto const empty = select_frames(clip, {});
    EXPECT_EQ(code_of(empty), ExecErrorCode::EmptySelection);
    EXPECT_EQ(std::get<ExecError>(empty).message, "max() arg is an empty sequence");

    SelectOptions custom;
    custom.empty_message = "nothing selected";
    EXPECT_EQ(std::get<ExecError>(select_frames(clip, {}, custom)).message, "nothing selected");
}

TEST(SelectFrames, RandomProjectionProperty)
{
    Rng rng(10);
    for (int n = 0; n < 300; ++n)
    {
        auto const clip = random_clip(rng, 1 + rng.below(20), 3, 2);
        std::vector<std::int64_t> idx(1 + rng.below(8));
        for (auto& i: idx)
            i = rng.range(0, static_cast<std::int64_t>(clip.size()) - 1);
        auto const r = select_frames(clip, idx);
        ASSERT_TRUE(succeeded(r));
        for (std::size_t k = 0; k < idx.size(); ++k)
            ASSERT_EQ(std::get<ExecOk>(r).images[k], clip.frames[idx[k]]);
    }
}

TEST(Execute, ArgumentValidation)
{
    Rng rng(11);
    VisualWorkspace ws(random_image(rng, 10, 10));
    EXPECT_EQ(code_of(execute(ws, call("crop_image", R"({"bbox_2d": "0,0,5,5", "target_image": 1})"))), ExecErrorCode::ArgumentError);
    EXPECT_EQ(code_of(execute(ws, call("crop_image", R"({"bbox_2d": [0,0,5], "target_image": 1})"))), ExecErrorCode::ArgumentError);
    EXPECT_EQ(code_of(execute(ws, call("crop_image", R"({"bbox_2d": [0,0,5,5]})"))), ExecErrorCode::ArgumentError);
    EXPECT_EQ(code_of(execute(ws, call("crop_image", R"({"bbox_2d": [0,0,5,5], "target_image": "1"})"))), ExecErrorCode::ArgumentError);
    EXPECT_EQ(code_of(execute(ws, call("crop_image", R"({"bbox_2d": [0,0,5,5], "target_image": 1.5})"))), ExecErrorCode::ArgumentError);
    EXPECT_TRUE(succeeded(execute(ws, call("crop_image", R"({"bbox_2d": [0,0,5,5], "target_image": 1.0})"))));
    EXPECT_EQ(code_of(execute(ws, call("select_frames", R"({"target_frames": [0]})"))), ExecErrorCode::ArgumentError);
    EXPECT_EQ(code_of(execute(ws, call("depth_map", "{}"))), ExecErrorCode::UnknownOperation);
}

TEST(Execute, DispatchIsTransparent)
{
    Rng rng(12);
    auto const clip = random_clip(rng, 16);
    VisualWorkspace ws(clip);
    auto const via = execute(ws, call("select_frames", R"({"target_frames": [2,5,9]})"));
    auto const direct = select_frames(clip, { 2, 5, 9 });
    ASSERT_TRUE(succeeded(via));
    EXPECT_EQ(std::get<ExecOk>(via).images, std::get<ExecOk>(direct).images);
    EXPECT_EQ(std::get<ExecOk>(via).sources, std::get<ExecOk>(direct).sources);
    EXPECT_EQ(code_of(execute(ws, call("select_frames", R"({"target_frames": ["a"]})"))), ExecErrorCode::ArgumentError);
}

TEST(Execute, FaultAlwaysFiresAtOne)
{
    Rng rng(13);
    VisualWorkspace ws(random_image(rng, 10, 10));
    FaultInjector faults(1.0, 5);
    for (int i = 0; i < 50; ++i)
        EXPECT_EQ(code_of(execute(ws, call("crop_image", R"({"bbox_2d": [0,0,5,5], "target_image": 1})"), &faults)),
                  ExecErrorCode::InjectedFault);
    EXPECT_EQ(ws.size(), 1u);

    FaultInjector never(0.0, 5);
    EXPECT_TRUE(succeeded(execute(ws, call("crop_image", R"({"bbox_2d": [0,0,5,5], "target_image": 1})"), &never)));
}

TEST(Execute, TotalOverRandomRequests)
{
    Rng rng(14);
    VisualWorkspace ws(random_image(rng, 16, 16));
    static const char* args[] = { R"({})", R"({"bbox_2d": null})", R"({"bbox_2d": [1e308, -1e308, 0, 1], "target_image": 1})",
                                  R"({"bbox_2d": [0,0,1,1], "target_image": -4})", R"({"target_frames": {}})",
                                  R"({"target_frames": [1e300]})", R"({"bbox_2d": [[1],2,3,4], "target_image": 1})" };
    for (auto const* a: args)
        for (auto const* name: { "crop_image", "select_frames", "" })
        {
            auto const r = execute(ws, call(name, a));
            if (!succeeded(r))
            {
                EXPECT_FALSE(std::get<ExecError>(r).message.empty());
            }
        }
}

TEST(Geometry, IntersectionAndContainment)
{
    PixelRect const a { 0, 0, 10, 10 };
    PixelRect const b { 5, 5, 15, 15 };
    PixelRect const c { 10, 0, 20, 10 };
    EXPECT_EQ(intersection_area(a, b), 25);
    EXPECT_EQ(intersection_area(a, c), 0);
    EXPECT_TRUE(contains(a, { 2, 2, 4, 4 }));
    EXPECT_FALSE(contains(a, b));
    EXPECT_EQ(truncate({ 1.7, 2.2, 3.9, 4.0 }), (PixelRect { 1, 2, 3, 4 }));
    EXPECT_EQ(truncate({ -1.7, 0, 1, 1 }).x1, -1);
}
