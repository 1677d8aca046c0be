// SPDX-License-Identifier: Apache-2.0
#include <pixkit/synth.hpp>

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace pixkit;

namespace
{

SeedExample image_seed(BBox cue = { 40, 40, 60, 60 }, std::size_t w = 100, std::size_t h = 100)
{
    SeedExample s;
    s.query_id = "img-1";
    s.question = "What does the sign say?";
    s.gold = "B";
    s.category = Category::Image;
    s.cue = cue;
    s.width = w;
    s.height = h;
    s.cue_label = "the sign";
    return s;
}

SeedExample video_seed(FrameList cue = { 3, 4 }, std::size_t frames = 16)
{
    SeedExample s;
    s.query_id = "vid-1";
    s.question = "What happens after the spoon falls?";
    s.gold = "C";
    s.category = Category::Video;
    s.cue = std::move(cue);
    s.num_frames = frames;
    return s;
}

std::vector<const ToolInvocation*> invocations(const Trajectory& t)
{
    std::vector<const ToolInvocation*> out;
    for (auto const& s: t.steps)
        if (auto const* inv = std::get_if<ToolInvocation>(&s.payload))
            out.push_back(inv);
    return out;
}

PixelRect rect_of(const ToolInvocation& inv)
{
    auto const& b = inv.call.arguments.at("bbox_2d");
    return { b[0].get<std::int64_t>(), b[1].get<std::int64_t>(), b[2].get<std::int64_t>(), b[3].get<std::int64_t>() };
}

} // namespace

TEST(SinglePass, ImageShapeAndMask)
{
    CannedTextGen gen;
    auto const sp = synth_single_pass(image_seed(), gen);
    auto const& steps = sp.trajectory.steps;
    ASSERT_EQ(steps.size(), 6u);
    std::vector<StepKind> const kinds { StepKind::TextThought, StepKind::TextThought, StepKind::ToolInvocation,
                                        StepKind::ExecutionOutcome, StepKind::TextThought, StepKind::FinalAnswer };
    for (std::size_t i = 0; i < 6; ++i)
    {
        EXPECT_EQ(steps[i].kind(), kinds[i]) << i;
        EXPECT_EQ(steps[i].masked, i == 3) << i;
    }
    EXPECT_EQ(sp.trajectory.n_vo(), 1u);
    auto const& tr = std::get<TextThought>(steps[1].payload).text;
    EXPECT_EQ(tr, "Now I will zoom in to look clearer at the sign.");
    EXPECT_EQ(rect_of(std::get<ToolInvocation>(steps[2].payload)), (PixelRect { 40, 40, 60, 60 }));
    EXPECT_EQ(std::get<ExecutionOutcome>(steps[3].payload).text, "[image 2: 20x20]");
    EXPECT_EQ(sp.trajectory.final_answer()->answer, "B");
    EXPECT_NO_THROW(sp.trajectory.validate());
}

TEST(SinglePass, VideoSelectsCueFrames)
{
    CannedTextGen gen;
    auto const sp = synth_single_pass(video_seed(), gen);
    auto const inv = invocations(sp.trajectory);
    ASSERT_EQ(inv.size(), 1u);
    EXPECT_EQ(inv[0]->call.name, "select_frames");
    EXPECT_EQ(inv[0]->call.arguments.at("target_frames"), Json::array({ 3, 4 }));
    EXPECT_EQ(std::get<ExecutionOutcome>(sp.trajectory.steps[3].payload).text, "[frames 3,4]");
    EXPECT_TRUE(std::get<TextThought>(sp.trajectory.steps[1].payload).text.starts_with("Now I will select some frames"));
}

TEST(SinglePass, ByteStable)
{
    CannedTextGen gen;
    auto const a = emit_record(synth_single_pass(image_seed(), gen));
    auto const b = emit_record(synth_single_pass(image_seed(), gen));
    EXPECT_EQ(a.record.dump(), b.record.dump());
    EXPECT_EQ(a.text, b.text);
}

TEST(SinglePass, InvalidCue)
{
    CannedTextGen gen;
    EXPECT_THROW((void)synth_single_pass(image_seed({ 90, 90, 120, 95 }), gen), CueInvalid);
    EXPECT_THROW((void)synth_single_pass(image_seed({ 50, 50, 50, 60 }), gen), CueInvalid);
    EXPECT_THROW((void)synth_single_pass(video_seed({ 16 }), gen), CueInvalid);
    EXPECT_THROW((void)synth_single_pass(video_seed({}), gen), CueInvalid);
    auto s = image_seed();
    s.cue = FrameList { 1 };
    EXPECT_THROW((void)synth_single_pass(s, gen), CueInvalid);
}

TEST(InsertError, RecropOnceIsDisjoint)
{
    CannedTextGen gen;
    auto const seed = image_seed();
    auto const sp = synth_single_pass(seed, gen);
    for (std::uint64_t i = 0; i < 200; ++i)
    {
        Rng rng(i);
        auto const t = insert_error(sp, seed, TrajectoryKind::RecropOnce, rng);
        EXPECT_EQ(t.trajectory.n_vo(), 2u);
        auto const inv = invocations(t.trajectory);
        EXPECT_EQ(intersection_area(rect_of(*inv[0]), PixelRect { 40, 40, 60, 60 }), 0);
        EXPECT_EQ(rect_of(*inv[1]), (PixelRect { 40, 40, 60, 60 }));
        EXPECT_NO_THROW(t.trajectory.validate());
        EXPECT_EQ(t.trajectory.final_answer()->answer, "B");
    }
}

TEST(InsertError, FurtherZoomContainsCue)
{
    CannedTextGen gen;
    auto const seed = image_seed();
    auto const sp = synth_single_pass(seed, gen);
    PixelRect const cue { 40, 40, 60, 60 };
    for (std::uint64_t i = 0; i < 200; ++i)
    {
        Rng rng(i);
        auto const t = insert_error(sp, seed, TrajectoryKind::FurtherZoom, rng);
        auto const bad = rect_of(*invocations(t.trajectory)[0]);
        EXPECT_TRUE(contains(bad, cue));
        EXPECT_GE(bad.area(), 4 * cue.area());
        EXPECT_NE(bad, cue);
    }
}

TEST(InsertError, ReselectIsDisjoint)
{
    CannedTextGen gen;
    auto const seed = video_seed();
    auto const sp = synth_single_pass(seed, gen);
    for (std::uint64_t i = 0; i < 200; ++i)
    {
        Rng rng(i);
        auto const t = insert_error(sp, seed, TrajectoryKind::Reselect, rng);
        auto const bad = invocations(t.trajectory)[0]->call.arguments.at("target_frames").get<FrameList>();
        ASSERT_FALSE(bad.empty());
        for (auto f: bad)
        {
            EXPECT_GE(f, 0);
            EXPECT_LT(f, 16);
            EXPECT_NE(f, 3);
            EXPECT_NE(f, 4);
        }
        EXPECT_EQ(std::set<std::int64_t>(bad.begin(), bad.end()).size(), bad.size());
    }
}

TEST(InsertError, NoValidDistractor)
{
    CannedTextGen gen;
    Rng rng(1);
    auto const full = image_seed({ 0, 0, 100, 100 });
    EXPECT_THROW((void)insert_error(synth_single_pass(full, gen), full, TrajectoryKind::RecropOnce, rng), NoValidDistractor);
    EXPECT_THROW((void)insert_error(synth_single_pass(full, gen), full, TrajectoryKind::FurtherZoom, rng), NoValidDistractor);
    FrameList all;
    for (int i = 0; i < 8; ++i)
        all.push_back(i);
    auto const v = video_seed(all, 8);
    EXPECT_THROW((void)insert_error(synth_single_pass(v, gen), v, TrajectoryKind::Reselect, rng), NoValidDistractor);
}

TEST(InsertError, KindMustMatchCategory)
{
    CannedTextGen gen;
    Rng rng(1);
    auto const img = image_seed();
    auto const vid = video_seed();
    EXPECT_THROW((void)insert_error(synth_single_pass(img, gen), img, TrajectoryKind::Reselect, rng), InvalidInput);
    EXPECT_THROW((void)insert_error(synth_single_pass(vid, gen), vid, TrajectoryKind::RecropOnce, rng), InvalidInput);
    EXPECT_THROW((void)insert_error(synth_single_pass(img, gen), img, TrajectoryKind::SinglePass, rng), InvalidInput);
}

TEST(InsertError, RecropTwiceMasks)
{
    CannedTextGen gen;
    Rng rng(5);
    auto const seed = image_seed();
    auto const t = insert_error(synth_single_pass(seed, gen), seed, TrajectoryKind::RecropTwice, rng);
    EXPECT_EQ(t.trajectory.n_vo(), 3u);
    auto const rec = emit_record(t);
    EXPECT_EQ(rec.mask_spans.size(), 5u);
    // the correct crop is the third workspace image
    auto const& steps = t.trajectory.steps;
    auto const last = std::find_if(steps.rbegin(), steps.rend(), [](auto const& s) { return s.kind() == StepKind::ExecutionOutcome; });
    EXPECT_EQ(std::get<ExecutionOutcome>(last->payload).text, "[image 4: 20x20]");
}

TEST(Sampling, DefaultProportions)
{
    Rng rng(42);
    constexpr int n = 10000;
    std::map<TrajectoryKind, int> img, vid;
    for (int i = 0; i < n; ++i)
    {
        ++img[sample_kind(Category::Image, rng)];
        ++vid[sample_kind(Category::Video, rng)];
    }
    EXPECT_NEAR(img[TrajectoryKind::SinglePass] / double(n), 0.3, 0.02);
    EXPECT_NEAR(img[TrajectoryKind::RecropOnce] / double(n), 0.2, 0.02);
    EXPECT_NEAR(img[TrajectoryKind::RecropTwice] / double(n), 0.2, 0.02);
    EXPECT_NEAR(img[TrajectoryKind::FurtherZoom] / double(n), 0.3, 0.02);
    EXPECT_EQ(img[TrajectoryKind::Reselect], 0);
    EXPECT_NEAR(vid[TrajectoryKind::SinglePass] / double(n), 0.9, 0.02);
    EXPECT_NEAR(vid[TrajectoryKind::Reselect] / double(n), 0.1, 0.02);
    EXPECT_EQ(vid.size(), 2u);
}

TEST(Sampling, OverrideWeights)
{
    auto const w = KindWeights::parse("single_pass=1,recrop_once=3");
    ASSERT_EQ(w.weights.size(), 2u);
    EXPECT_DOUBLE_EQ(w.weights[1].second, 0.75);
    Rng rng(3);
    int recrop = 0;
    for (int i = 0; i < 4000; ++i)
        recrop += sample_kind(Category::Image, rng, w) == TrajectoryKind::RecropOnce;
    EXPECT_NEAR(recrop / 4000.0, 0.75, 0.03);
    EXPECT_THROW((void)sample_kind(Category::Video, rng, w), InvalidInput);
    EXPECT_THROW(KindWeights::parse("single_pass"), InvalidInput);
    EXPECT_THROW(KindWeights::parse("bogus=1"), InvalidInput);
    EXPECT_THROW(KindWeights::parse("single_pass=-1"), InvalidInput);
    EXPECT_THROW(KindWeights::parse("single_pass=0"), InvalidInput);
}

// Over many random seeds: every outcome is masked, every masked step is an
// outcome or a distractor invocation, and the record survives a round trip.
TEST(Records, MaskCompletenessAndRoundTrip)
{
    CannedTextGen gen;
    Rng rng(99);
    for (int i = 0; i < 10000; ++i)
    {
        SeedExample seed;
        if (rng.bernoulli(0.5))
        {
            auto const w = rng.range(8, 400);
            auto const h = rng.range(8, 400);
            auto const x1 = rng.range(0, w / 2);
            auto const y1 = rng.range(0, h / 2);
            seed = image_seed({ double(x1), double(y1), double(rng.range(x1 + 1, w / 2 + 1)), double(rng.range(y1 + 1, h / 2 + 1)) },
                              std::size_t(w), std::size_t(h));
        }
        else
        {
            FrameList cue;
            auto const n = rng.range(1, 4);
            for (std::int64_t k = 0; k < n; ++k)
                cue.push_back(rng.range(0, 15));
            seed = video_seed(cue);
        }
        seed.query_id = "s" + std::to_string(i);
        auto const kind = sample_kind(seed.category, rng);
        SynthTrajectory t;
        try
        {
            t = synthesize(seed, gen, kind, rng);
        }
        catch (const NoValidDistractor&)
        {
            continue;
        }
        EXPECT_NO_THROW(t.trajectory.validate());
        ASSERT_NE(t.trajectory.final_answer(), nullptr);
        EXPECT_EQ(t.trajectory.final_answer()->answer, seed.gold);
        EXPECT_EQ(t.trajectory.steps.back().kind(), StepKind::FinalAnswer);

        auto const inv = invocations(t.trajectory);
        for (auto const* c: inv)
            EXPECT_EQ(c->call.name, seed.category == Category::Image ? "crop_image" : "select_frames");

        auto const rec = emit_record(t);
        std::size_t expected_masks = 0;
        for (std::size_t k = 0; k < t.trajectory.steps.size(); ++k)
        {
            auto const& s = t.trajectory.steps[k];
            if (s.kind() == StepKind::ExecutionOutcome)
            {
                EXPECT_TRUE(s.masked);
            }
            if (s.kind() == StepKind::TextThought || s.kind() == StepKind::FinalAnswer)
            {
                EXPECT_FALSE(s.masked);
            }
            // only the last invocation is the one the model should learn
            if (s.kind() == StepKind::ToolInvocation)
            {
                EXPECT_EQ(s.masked, &std::get<ToolInvocation>(s.payload) != inv.back());
            }
            expected_masks += s.masked;
        }
        ASSERT_EQ(rec.mask_spans.size(), expected_masks);
        for (auto const& span: rec.mask_spans)
        {
            ASSERT_LE(span.end, rec.text.size());
            auto const chunk = rec.text.substr(span.begin, span.size());
            EXPECT_TRUE(chunk.starts_with("<tool_response>") || chunk.starts_with("<tool_call>")) << chunk;
        }

        auto const back = parse_record(Json::parse(rec.record.dump()));
        EXPECT_EQ(back.kind, t.kind);
        EXPECT_EQ(back.category, t.category);
        EXPECT_EQ(emit_record(back).record, rec.record);
        if (HasFailure())
            FAIL() << "seed " << i << " kind " << to_string(kind);
    }
}

TEST(Records, SeedJson)
{
    auto const j = Json::parse(R"({"query_id": 7, "gold": "A", "bbox": [1, 2, 30, 40], "width": 64, "height": 48, "cue_label": "the clock"})");
    auto const s = seed_from_json(j);
    EXPECT_EQ(s.query_id, "7");
    EXPECT_EQ(s.category, Category::Image);
    EXPECT_EQ(s.width, 64u);
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(seed_from_json(to_json(s)).cue_label, "the clock");
    EXPECT_THROW(seed_from_json(Json::parse(R"({"query_id": "x", "gold": "A"})")), InvalidInput);
    EXPECT_THROW(seed_from_json(Json::parse(R"({"query_id": "x", "gold": "A", "bbox": [1, 2]})")), InvalidInput);
    EXPECT_EQ(parse_kind("further_zoom"), TrajectoryKind::FurtherZoom);
    EXPECT_THROW((void)parse_kind("zoom"), InvalidInput);
}
