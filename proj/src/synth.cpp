// SPDX-License-Identifier: Apache-2.0
#include <pixkit/synth.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

namespace pixkit
{

std::string_view to_string(Category c)
{
    return c == Category::Image ? "image" : "video";
}

std::string_view to_string(TrajectoryKind k)
{
    switch (k)
    {
        case TrajectoryKind::SinglePass: return "single_pass";
        case TrajectoryKind::RecropOnce: return "recrop_once";
        case TrajectoryKind::RecropTwice: return "recrop_twice";
        case TrajectoryKind::FurtherZoom: return "further_zoom";
        case TrajectoryKind::Reselect: return "reselect";
        case TrajectoryKind::TextOnly: return "text_only";
    }
    return "single_pass";
}

Category parse_category(std::string_view s)
{
    if (s == "image")
        return Category::Image;
    if (s == "video")
        return Category::Video;
    throw InvalidInput(fmt::format("unknown category '{}' (image, video)", s));
}

TrajectoryKind parse_kind(std::string_view s)
{
    for (auto k: { TrajectoryKind::SinglePass, TrajectoryKind::RecropOnce, TrajectoryKind::RecropTwice, TrajectoryKind::FurtherZoom,
                   TrajectoryKind::Reselect, TrajectoryKind::TextOnly })
        if (s == to_string(k))
            return k;
    throw InvalidInput(fmt::format("unknown trajectory kind '{}'", s));
}

void SeedExample::validate() const
{
    if (gold.empty())
        throw CueInvalid(query_id + ": gold answer is empty");
    if (category == Category::Image)
    {
        auto const* box = std::get_if<BBox>(&cue);
        if (!box)
            throw CueInvalid(query_id + ": image seed needs a bbox cue");
        if (width == 0 || height == 0)
            throw CueInvalid(query_id + ": image size is unknown");
        auto const r = truncate(*box);
        if (r.area() == 0 || r.x1 < 0 || r.y1 < 0 || r.x2 > static_cast<std::int64_t>(width) || r.y2 > static_cast<std::int64_t>(height))
            throw CueInvalid(fmt::format("{}: bbox [{},{},{},{}] does not fit a {}x{} image", query_id, r.x1, r.y1, r.x2, r.y2, width, height));
    }
    else
    {
        auto const* frames = std::get_if<FrameList>(&cue);
        if (!frames)
            throw CueInvalid(query_id + ": video seed needs a frame-list cue");
        if (frames->empty() || frames->size() > 8)
            throw CueInvalid(fmt::format("{}: cue must list 1..8 frames", query_id));
        for (auto f: *frames)
            if (f < 0 || f >= static_cast<std::int64_t>(num_frames))
                throw CueInvalid(fmt::format("{}: cue frame {} outside 0..{}", query_id, f, num_frames - 1));
    }
}

SeedExample seed_from_json(const Json& j)
{
    SeedExample s;
    s.query_id = j.at("query_id").is_string() ? j.at("query_id").get<std::string>() : j.at("query_id").dump();
    s.question = j.value("question", std::string {});
    s.gold = j.at("gold").get<std::string>();
    s.category = parse_category(j.value("category", std::string("image")));
    if (j.contains("bbox"))
    {
        auto const& b = j.at("bbox");
        if (!b.is_array() || b.size() != 4)
            throw InvalidInput(s.query_id + ": bbox must have 4 numbers");
        s.cue = BBox { b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>() };
    }
    else if (j.contains("frames"))
        s.cue = j.at("frames").get<FrameList>();
    else
        throw InvalidInput(s.query_id + ": seed needs \"bbox\" or \"frames\"");
    s.width = j.value("width", std::size_t { 0 });
    s.height = j.value("height", std::size_t { 0 });
    s.num_frames = j.value("num_frames", std::size_t { 16 });
    s.media_path = j.value("media_path", std::string {});
    s.cue_label = j.value("cue_label", std::string {});
    return s;
}

Json to_json(const SeedExample& s)
{
    Json j;
    j["query_id"] = s.query_id;
    j["question"] = s.question;
    j["gold"] = s.gold;
    j["category"] = to_string(s.category);
    if (auto const* b = std::get_if<BBox>(&s.cue))
    {
        j["bbox"] = { b->x1, b->y1, b->x2, b->y2 };
        j["width"] = s.width;
        j["height"] = s.height;
    }
    else
    {
        j["frames"] = std::get<FrameList>(s.cue);
        j["num_frames"] = s.num_frames;
    }
    if (!s.media_path.empty())
        j["media_path"] = s.media_path;
    if (!s.cue_label.empty())
        j["cue_label"] = s.cue_label;
    return j;
}

std::string CannedTextGen::describe_whole(const SeedExample& seed)
{
    if (seed.category == Category::Video)
        return fmt::format("The video has {} frames. The question asks: {} The overall scene is visible, but the moment that decides the "
                           "answer is brief.",
                           seed.num_frames, seed.question);
    return fmt::format("The image is {}x{} pixels. The question asks: {} The overall layout is visible, but the relevant detail is too "
                       "small to read reliably at this scale.",
                       seed.width, seed.height, seed.question);
}

std::string CannedTextGen::describe_cue(const SeedExample& seed)
{
    if (auto const* frames = std::get_if<FrameList>(&seed.cue))
        return fmt::format("Frames {} show the relevant moment clearly. Based on them, the answer is {}.", fmt::join(*frames, ", "),
                           seed.gold);
    auto const r = truncate(std::get<BBox>(seed.cue));
    return fmt::format("The region [{},{},{},{}] shows the detail clearly. Based on it, the answer is {}.", r.x1, r.y1, r.x2, r.y2,
                       seed.gold);
}

ChatTextGen::ChatTextGen(ChatConfig config): _client(std::move(config)) {}

std::string ChatTextGen::ask(const SeedExample& seed, bool cue_only)
{
    // media is loaded per call; seeds are independent and calls may run concurrently
    std::vector<ImageBuffer> images;
    if (!seed.media_path.empty())
    {
        if (seed.category == Category::Image)
        {
            auto img = read_image(seed.media_path);
            if (cue_only)
            {
                VisualWorkspace ws(std::move(img));
                auto const res = crop_image(ws, std::get<BBox>(seed.cue), 1);
                if (!succeeded(res))
                    throw CueInvalid(seed.query_id + ": " + std::get<ExecError>(res).message);
                images.push_back(std::get<ExecOk>(res).images.front());
            }
            else
                images.push_back(std::move(img));
        }
        else
        {
            auto clip = read_frames_dir(seed.media_path);
            if (cue_only)
                for (auto f: std::get<FrameList>(seed.cue))
                    images.push_back(clip.frames.at(static_cast<std::size_t>(f)));
            else
                images = std::move(clip.frames);
        }
    }

    Json content = Json::array();
    for (auto const& img: images)
        content.push_back({ { "type", "image_url" }, { "image_url", { { "url", png_data_url(img) } } } });
    auto const what = seed.category == Category::Image ? "image" : "video";
    std::string prompt = cue_only
                             ? fmt::format("These are the parts of the {} that matter for the question below. Describe what they show, "
                                           "reason step by step, and finish with the answer {}.\nQuestion: {}",
                                           what, seed.gold, seed.question)
                             : fmt::format("Briefly analyze the whole {} with the question below in mind. Do not answer it yet.\n"
                                           "Question: {}",
                                           what, seed.question);
    content.push_back({ { "type", "text" }, { "text", prompt } });
    Json messages = Json::array({ { { "role", "user" }, { "content", content } } });
    return _client.complete(messages).content;
}

std::string ChatTextGen::describe_whole(const SeedExample& seed)
{
    return ask(seed, false);
}

std::string ChatTextGen::describe_cue(const SeedExample& seed)
{
    return ask(seed, true);
}

std::string transition_sentence(const SeedExample& seed)
{
    if (seed.category == Category::Video)
        return fmt::format("Now I will select some frames to look clearer at {}.", seed.cue_label.empty() ? "the key moment" : seed.cue_label);
    return fmt::format("Now I will zoom in to look clearer at {}.", seed.cue_label.empty() ? "the relevant region" : seed.cue_label);
}

namespace
{

Json bbox_json(const PixelRect& r)
{
    return Json::array({ r.x1, r.y1, r.x2, r.y2 });
}

ToolInvocation crop_call(const PixelRect& r)
{
    ToolInvocation inv;
    inv.call.name = std::string(kCropImage);
    inv.call.arguments = { { "bbox_2d", bbox_json(r) }, { "target_image", 1 } };
    return inv;
}

ToolInvocation frames_call(const FrameList& frames)
{
    ToolInvocation inv;
    inv.call.name = std::string(kSelectFrames);
    inv.call.arguments = { { "target_frames", frames } };
    return inv;
}

ExecutionOutcome crop_outcome(const PixelRect& r, std::size_t slot)
{
    return { fmt::format("[image {}: {}x{}]", slot, r.width(), r.height()), false, { { Attachment::Source::WorkspaceImage, slot } } };
}

ExecutionOutcome frames_outcome(const FrameList& frames)
{
    ExecutionOutcome o;
    o.text = fmt::format("[frames {}]", fmt::join(frames, ","));
    for (auto f: frames)
        o.attachments.push_back({ Attachment::Source::ClipFrame, static_cast<std::size_t>(f) });
    return o;
}

PixelRect random_rect(std::size_t w, std::size_t h, Rng& rng)
{
    auto const x1 = rng.range(0, static_cast<std::int64_t>(w) - 1);
    auto const y1 = rng.range(0, static_cast<std::int64_t>(h) - 1);
    return { x1, y1, rng.range(x1 + 1, static_cast<std::int64_t>(w)), rng.range(y1 + 1, static_cast<std::int64_t>(h)) };
}

PixelRect disjoint_rect(const SeedExample& seed, const PixelRect& cue, Rng& rng, const SynthOptions& options)
{
    for (std::size_t i = 0; i < options.max_attempts; ++i)
    {
        auto const r = random_rect(seed.width, seed.height, rng);
        if (intersection_area(r, cue) == 0)
            return r;
    }
    throw NoValidDistractor(fmt::format("{}: no crop disjoint from the cue after {} attempts", seed.query_id, options.max_attempts));
}

PixelRect oversized_rect(const SeedExample& seed, const PixelRect& cue, Rng& rng, const SynthOptions& options)
{
    auto const need = options.oversize_factor * static_cast<double>(cue.area());
    for (std::size_t i = 0; i < options.max_attempts; ++i)
    {
        PixelRect const r { rng.range(0, cue.x1), rng.range(0, cue.y1), rng.range(cue.x2, static_cast<std::int64_t>(seed.width)),
                            rng.range(cue.y2, static_cast<std::int64_t>(seed.height)) };
        if (r != cue && static_cast<double>(r.area()) >= need)
            return r;
    }
    throw NoValidDistractor(fmt::format("{}: no crop {}x the cue area fits after {} attempts", seed.query_id, options.oversize_factor,
                                        options.max_attempts));
}

FrameList disjoint_frames(const SeedExample& seed, const FrameList& cue, Rng& rng)
{
    std::set<std::int64_t> const used(cue.begin(), cue.end());
    FrameList pool;
    for (std::int64_t f = 0; f < static_cast<std::int64_t>(seed.num_frames); ++f)
        if (!used.count(f))
            pool.push_back(f);
    if (pool.empty())
        throw NoValidDistractor(seed.query_id + ": the cue covers every frame");
    auto const k = std::clamp<std::size_t>(cue.size(), 1, std::min<std::size_t>(pool.size(), 8));
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i)
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    FrameList out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

TrajectoryStep masked(StepPayload p)
{
    return { std::move(p), true };
}

} // namespace

SynthTrajectory synth_single_pass(const SeedExample& seed, TextGen& gen)
{
    seed.validate();
    SynthTrajectory out;
    out.kind = TrajectoryKind::SinglePass;
    out.category = seed.category;
    auto& t = out.trajectory;
    t.query_id = seed.query_id;
    t.steps.push_back({ TextThought { gen.describe_whole(seed) } });
    t.steps.push_back({ TextThought { transition_sentence(seed) } });
    if (seed.category == Category::Image)
    {
        auto const r = truncate(std::get<BBox>(seed.cue));
        t.steps.push_back({ crop_call(r) });
        t.steps.push_back(masked(crop_outcome(r, 2)));
    }
    else
    {
        auto const& frames = std::get<FrameList>(seed.cue);
        t.steps.push_back({ frames_call(frames) });
        t.steps.push_back(masked(frames_outcome(frames)));
    }
    t.steps.push_back({ TextThought { gen.describe_cue(seed) } });
    t.steps.push_back({ FinalAnswer { seed.gold, "\\boxed{" + seed.gold + "}" } });
    return out;
}

SynthTrajectory insert_error(const SynthTrajectory& single_pass, const SeedExample& seed, TrajectoryKind kind, Rng& rng,
                             const SynthOptions& options)
{
    if (single_pass.kind != TrajectoryKind::SinglePass)
        throw InvalidInput("errors can only be inserted into a single-pass trajectory");
    bool const video = seed.category == Category::Video;
    if (kind == TrajectoryKind::SinglePass || kind == TrajectoryKind::TextOnly)
        throw InvalidInput(fmt::format("'{}' is not an error-insertion kind", to_string(kind)));
    if (video != (kind == TrajectoryKind::Reselect))
        throw InvalidInput(fmt::format("'{}' does not apply to {} seeds", to_string(kind), to_string(seed.category)));

    // locate the correct invocation: the one single_pass emitted
    auto const& src = single_pass.trajectory.steps;
    auto const at = std::find_if(src.begin(), src.end(), [](const TrajectoryStep& s) { return s.kind() == StepKind::ToolInvocation; });
    if (at == src.end() || std::next(at) == src.end())
        throw InvalidInput("single-pass trajectory has no tool invocation");

    std::vector<TrajectoryStep> inserted;
    std::size_t slot = 2;
    if (kind == TrajectoryKind::Reselect)
    {
        auto const bad = disjoint_frames(seed, std::get<FrameList>(seed.cue), rng);
        inserted.push_back(masked(frames_call(bad)));
        inserted.push_back(masked(frames_outcome(bad)));
        inserted.push_back({ TextThought { "These frames do not show the moment the question is about. Let me select other frames." } });
    }
    else
    {
        auto const cue = truncate(std::get<BBox>(seed.cue));
        auto const count = kind == TrajectoryKind::RecropTwice ? 2 : 1;
        for (int i = 0; i < count; ++i)
        {
            auto const bad = kind == TrajectoryKind::FurtherZoom ? oversized_rect(seed, cue, rng, options) : disjoint_rect(seed, cue, rng, options);
            inserted.push_back(masked(crop_call(bad)));
            inserted.push_back(masked(crop_outcome(bad, slot++)));
            inserted.push_back({ TextThought { kind == TrajectoryKind::FurtherZoom
                                                   ? "The region is too large to make out the detail. Let me zoom in further."
                                                   : "This region does not contain what the question asks about. Let me crop another region." } });
        }
    }

    SynthTrajectory out = single_pass;
    out.kind = kind;
    auto& steps = out.trajectory.steps;
    auto const pos = static_cast<std::ptrdiff_t>(at - src.begin());
    steps.insert(steps.begin() + pos, inserted.begin(), inserted.end());
    // the correct crop now lands in a later workspace slot
    if (!video)
    {
        auto& outcome = std::get<ExecutionOutcome>(steps[static_cast<std::size_t>(pos) + inserted.size() + 1].payload);
        outcome = crop_outcome(truncate(std::get<BBox>(seed.cue)), slot);
        steps[static_cast<std::size_t>(pos) + inserted.size() + 1].masked = true;
    }
    return out;
}

SynthTrajectory synth_text_only(const SeedExample& seed, TextGen& gen)
{
    SynthTrajectory out;
    out.kind = TrajectoryKind::TextOnly;
    out.category = seed.category;
    out.trajectory.query_id = seed.query_id;
    out.trajectory.steps.push_back({ TextThought { gen.describe_whole(seed) } });
    out.trajectory.steps.push_back({ FinalAnswer { seed.gold, "\\boxed{" + seed.gold + "}" } });
    return out;
}

SynthTrajectory synthesize(const SeedExample& seed, TextGen& gen, TrajectoryKind kind, Rng& rng, const SynthOptions& options)
{
    if (kind == TrajectoryKind::TextOnly)
        return synth_text_only(seed, gen);
    auto base = synth_single_pass(seed, gen);
    if (kind == TrajectoryKind::SinglePass)
        return base;
    return insert_error(base, seed, kind, rng, options);
}

KindWeights KindWeights::defaults(Category category)
{
    if (category == Category::Video)
        return { { { TrajectoryKind::SinglePass, 0.9 }, { TrajectoryKind::Reselect, 0.1 } } };
    return { { { TrajectoryKind::SinglePass, 0.3 },
               { TrajectoryKind::RecropOnce, 0.2 },
               { TrajectoryKind::RecropTwice, 0.2 },
               { TrajectoryKind::FurtherZoom, 0.3 } } };
}

KindWeights KindWeights::parse(std::string_view spec)
{
    KindWeights out;
    double total = 0;
    while (!spec.empty())
    {
        auto const comma = spec.find(',');
        auto item = spec.substr(0, comma);
        spec = comma == std::string_view::npos ? std::string_view {} : spec.substr(comma + 1);
        auto const eq = item.find('=');
        if (eq == std::string_view::npos)
            throw InvalidInput(fmt::format("proportion '{}' must look like kind=weight", item));
        auto const kind = parse_kind(item.substr(0, eq));
        double w = 0;
        try
        {
            w = std::stod(std::string(item.substr(eq + 1)));
        }
        catch (const std::exception&)
        {
            throw InvalidInput(fmt::format("bad weight in '{}'", item));
        }
        if (!(w >= 0))
            throw InvalidInput(fmt::format("weight in '{}' must be non-negative", item));
        out.weights.emplace_back(kind, w);
        total += w;
    }
    if (!(total > 0))
        throw InvalidInput("proportions must have a positive total");
    for (auto& [k, w]: out.weights)
        w /= total;
    return out;
}

TrajectoryKind sample_kind(Category category, Rng& rng, const std::optional<KindWeights>& override_weights)
{
    auto const weights = override_weights ? *override_weights : KindWeights::defaults(category);
    for (auto const& [k, w]: weights.weights)
        if (w > 0 && (category == Category::Video) != (k == TrajectoryKind::Reselect) && k != TrajectoryKind::SinglePass && k != TrajectoryKind::TextOnly)
            throw InvalidInput(fmt::format("'{}' is not valid for {} seeds", to_string(k), to_string(category)));
    double total = 0;
    for (auto const& [k, w]: weights.weights)
        total += w;
    auto u = rng.uniform() * total;
    for (auto const& [k, w]: weights.weights)
    {
        if (u < w)
            return k;
        u -= w;
    }
    // rounding left u at the top edge
    for (auto it = weights.weights.rbegin(); it != weights.weights.rend(); ++it)
        if (it->second > 0)
            return it->first;
    return TrajectoryKind::SinglePass;
}

SynthRecord emit_record(const SynthTrajectory& traj)
{
    SynthRecord out;
    auto const rendered = render_transcript(traj.trajectory);
    out.text = rendered.text;
    Json steps = Json::array();
    Json masks = Json::array();
    for (std::size_t i = 0; i < traj.trajectory.steps.size(); ++i)
    {
        auto const& step = traj.trajectory.steps[i];
        auto j = to_json(step);
        auto const span = rendered.step_spans[i];
        j["span"] = { span.begin, span.end };
        if (step.kind() == StepKind::ToolInvocation)
            j["rendered"] = out.text.substr(span.begin, span.size());
        if (step.masked)
        {
            out.mask_spans.push_back(span);
            masks.push_back({ span.begin, span.end });
        }
        steps.push_back(std::move(j));
    }
    out.record = { { "query_id", traj.trajectory.query_id },
                   { "category", to_string(traj.category) },
                   { "kind", to_string(traj.kind) },
                   { "n_vo", traj.trajectory.n_vo() },
                   { "text", out.text },
                   { "steps", std::move(steps) },
                   { "mask_spans", std::move(masks) } };
    return out;
}

SynthTrajectory parse_record(const Json& record)
{
    SynthTrajectory out;
    out.category = parse_category(record.at("category").get<std::string>());
    out.kind = parse_kind(record.at("kind").get<std::string>());
    out.trajectory.query_id = record.at("query_id").get<std::string>();
    for (auto const& s: record.at("steps"))
        out.trajectory.steps.push_back(step_from_json(s));
    return out;
}

} // namespace pixkit
