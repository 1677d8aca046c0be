// SPDX-License-Identifier: Apache-2.0
#include <pixkit/chat_client.hpp>
#include <pixkit/error.hpp>
#include <pixkit/grpo.hpp>
#include <pixkit/jsonl.hpp>
#include <pixkit/reward.hpp>
#include <pixkit/rollout.hpp>
#include <pixkit/synth.hpp>
#include <pixkit/trap_sim.hpp>
#include <pixkit/visual_ops.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using namespace pixkit;

namespace
{

constexpr int kExitInput = 1;
constexpr int kExitBackend = 2;

void emit(const std::string& out_path, const std::string& content)
{
    if (out_path.empty() || out_path == "-")
        std::cout << content << std::flush;
    else
        write_file_atomic(out_path, content);
}

std::string read_input(const std::string& path)
{
    if (path == "-")
    {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    return read_text_file(path);
}

// ---- exec-op

struct ExecOpArgs
{
    std::string image, raw, frames, call, call_file, out_dir;
    std::size_t width = 0, height = 0;
    double fault_prob = 0;
    std::uint64_t seed = 0;
};

int run_exec_op(const ExecOpArgs& a)
{
    std::unique_ptr<VisualWorkspace> ws;
    if (!a.image.empty())
        ws = std::make_unique<VisualWorkspace>(read_image(a.image));
    else if (!a.raw.empty())
        ws = std::make_unique<VisualWorkspace>(read_raw_rgb(a.raw, a.width, a.height));
    else
        ws = std::make_unique<VisualWorkspace>(read_frames_dir(a.frames));

    auto text = a.call_file.empty() ? a.call : read_input(a.call_file);
    auto const calls = parse_tool_calls(text);
    ToolCallEntry entry = calls.empty() ? parse_tool_call_payload(text) : calls.front();
    if (auto const* bad = std::get_if<MalformedToolCall>(&entry))
        throw InvalidInput("malformed tool call: " + bad->reason);
    auto const& call = std::get<ToolCall>(entry);

    FaultInjector faults(a.fault_prob, a.seed);
    auto const result = execute(*ws, call, &faults);
    Json out;
    if (auto const* err = std::get_if<ExecError>(&result))
    {
        out = { { "ok", false }, { "code", to_string(err->code) }, { "message", err->message } };
        std::cout << out.dump() << '\n';
        return kExitInput;
    }
    auto const& ok = std::get<ExecOk>(result);
    out["ok"] = true;
    auto& outputs = out["outputs"] = Json::array();
    if (!a.out_dir.empty())
        fs::create_directories(a.out_dir);
    for (std::size_t i = 0; i < ok.images.size(); ++i)
    {
        auto const& src = ok.sources[i];
        Json o = { { "width", ok.images[i].width },
                   { "height", ok.images[i].height },
                   { "source", src.source == Attachment::Source::WorkspaceImage ? "image" : "frame" },
                   { "index", src.index } };
        if (!a.out_dir.empty())
        {
            auto const file = fs::path(a.out_dir) / fmt::format("output_{:02d}.png", i);
            write_png(file, ok.images[i]);
            o["file"] = file.string();
        }
        outputs.push_back(std::move(o));
    }
    std::cout << out.dump() << '\n';
    return 0;
}

// ---- parse

struct ParseArgs
{
    std::vector<std::string> inputs;
    std::string out, error_prefix = "Execution error:";
    bool infer = false;
};

int run_parse(const ParseArgs& a)
{
    OutcomeMarkers markers;
    markers.error_prefix = a.error_prefix;
    markers.infer_elided_invocations = a.infer;
    std::string out;
    for (auto const& path: a.inputs)
    {
        auto const text = read_input(path);
        auto const id = path == "-" ? std::string("stdin") : fs::path(path).stem().string();
        try
        {
            out += to_json(segment_trajectory(text, markers, id)).dump() + "\n";
        }
        catch (const ProtocolViolation& e)
        {
            throw InvalidInput(fmt::format("{}: {}", path, e.what()));
        }
    }
    emit(a.out, out);
    return 0;
}

// ---- reward

struct RewardArgs
{
    std::string input, out;
    RewardConfig cfg;
    double lambda1 = -1, lambda2 = -1;
};

int run_reward(const RewardArgs& a)
{
    a.cfg.validate();
    LagrangianConfig const lcfg { a.lambda1 < 0 ? a.cfg.alpha : a.lambda1, a.lambda2 < 0 ? a.cfg.beta : a.lambda2 };
    lcfg.validate();

    std::istringstream in(read_input(a.input));
    auto const groups = read_rollout_groups(in);
    std::string csv = "query_id,trajectory_id,correct,is_pr,n_vo,rapr,bonus,penalty,reward,lagrangian_reward\n";
    for (auto const& g: groups)
    {
        auto const rate = rapr(g);
        auto const terms = modified_reward_terms(a.cfg, g);
        auto const lag = standard_lagrangian_reward(lcfg, a.cfg, g);
        for (std::size_t i = 0; i < g.records.size(); ++i)
        {
            auto const& r = g.records[i];
            csv += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.query_id, r.trajectory_id, r.correct, r.is_pr ? 1 : 0,
                               r.n_vo, rate, terms[i].curiosity, terms[i].penalty, terms[i].total, lag[i]);
        }
    }
    emit(a.out, csv);
    return 0;
}

// ---- advantages

struct AdvantagesArgs
{
    std::string input, out, mode = "mean_only";
    RewardConfig cfg;
    EpisodeConfig episode;
    std::size_t queries_per_step = 0;
    double eps = kUniformEps;
    bool no_ssr = false;
    std::uint64_t seed = 0;
};

int run_advantages(const AdvantagesArgs& a)
{
    a.cfg.validate();
    a.episode.validate();
    auto const mode = parse_advantage_mode(a.mode);
    std::istringstream in(read_input(a.input));
    auto const lines = read_jsonl(in);

    // group lines by query_id in order of first appearance
    std::vector<std::string> order;
    std::map<std::string, std::vector<Json>> byQuery;
    for (auto const& j: lines)
    {
        auto const id = j.at("query_id").is_string() ? j.at("query_id").get<std::string>() : j.at("query_id").dump();
        if (!byQuery.count(id))
            order.push_back(id);
        byQuery[id].push_back(j);
    }

    std::vector<AdvantageGroup> groups;
    for (auto const& id: order)
    {
        auto const& rows = byQuery[id];
        std::vector<double> rewards;
        std::vector<std::string> ids;
        if (rows.front().contains("reward"))
            for (auto const& r: rows)
            {
                rewards.push_back(r.at("reward").get<double>());
                ids.push_back(r.at("trajectory_id").is_string() ? r.at("trajectory_id").get<std::string>() : r.at("trajectory_id").dump());
            }
        else
        {
            RolloutGroup g { id, {} };
            for (auto const& r: rows)
                g.records.push_back(record_from_json(r));
            rewards = modified_reward(a.cfg, g);
            for (auto const& r: g.records)
                ids.push_back(r.trajectory_id);
        }
        groups.push_back(group_advantages(rewards, mode, a.eps, id, ids));
    }

    auto const perStep = a.queries_per_step ? a.queries_per_step : std::max<std::size_t>(1, a.episode.train_batch / a.episode.group_size);
    ReplayCoordinator coord(a.episode, { !a.no_ssr }, a.seed);
    std::string out;
    for (std::size_t begin = 0, step = 0; begin < groups.size(); begin += perStep, ++step)
    {
        std::vector<AdvantageGroup> fresh(groups.begin() + static_cast<std::ptrdiff_t>(begin),
                                          groups.begin() + static_cast<std::ptrdiff_t>(std::min(groups.size(), begin + perStep)));
        auto const episode = coord.buffer().episode_id;
        auto const res = coord.step(fresh);
        Json line = { { "step", step },
                      { "episode", episode },
                      { "uniformity", res.uniformity },
                      { "fresh_count", res.batch.fresh_count },
                      { "replay_count", res.batch.replay_count },
                      { "size", res.batch.samples.size() },
                      { "underfull", res.batch.underfull },
                      { "synced", res.syncs > 0 } };
        auto& samples = line["samples"] = Json::array();
        for (auto const& s: res.batch.samples)
            samples.push_back(to_json(s));
        out += line.dump() + "\n";
    }
    emit(a.out, out);
    return 0;
}

// ---- simulate

struct SimulateArgs
{
    SimConfig cfg;
    std::string out, preset = "warm_start", mode = "mean_only";
    bool no_curiosity = false;
    double step_size = -1;
};

int run_simulate(SimulateArgs a)
{
    if (a.preset == "warm_start")
        a.cfg.init = SimPolicy::warm_start();
    else if (a.preset == "no_correction")
        a.cfg.init = SimPolicy::no_correction();
    else
        throw InvalidInput("unknown preset '" + a.preset + "' (warm_start, no_correction)");
    if (a.step_size > 0)
        a.cfg.init.step_size = a.step_size;
    a.cfg.with_curiosity = !a.no_curiosity;
    a.cfg.mode = parse_advantage_mode(a.mode);
    std::ostringstream csv;
    run_training(a.cfg).write_csv(csv);
    emit(a.out, csv.str());
    return 0;
}

// ---- synth

struct SynthArgs
{
    std::string input, out, category, proportions, backend = "canned", base_url, model;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    SynthOptions options;
};

int run_synth(const SynthArgs& a)
{
    std::vector<SeedExample> seeds;
    for (auto const& j: read_jsonl_file(a.input))
    {
        auto s = seed_from_json(j);
        if (!a.category.empty() && s.category != parse_category(a.category))
            continue;
        if (s.category == Category::Image && (s.width == 0 || s.height == 0) && !s.media_path.empty())
        {
            auto const img = read_image(s.media_path);
            s.width = img.width;
            s.height = img.height;
        }
        s.validate();
        seeds.push_back(std::move(s));
    }
    if (seeds.empty())
        throw InvalidInput("no seeds to synthesize from");

    std::optional<KindWeights> weights;
    if (!a.proportions.empty())
        weights = KindWeights::parse(a.proportions);

    std::unique_ptr<TextGen> gen;
    if (a.backend == "canned")
        gen = std::make_unique<CannedTextGen>();
    else if (a.backend == "chat")
    {
        ChatConfig cfg;
        cfg.base_url = a.base_url;
        cfg.model = a.model;
        gen = std::make_unique<ChatTextGen>(ChatConfig::from_env(cfg));
    }
    else
        throw InvalidInput("unknown text backend '" + a.backend + "' (canned, chat)");

    Rng rng(a.seed);
    auto const count = a.count ? a.count : seeds.size();
    std::string out;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < count; ++i)
    {
        auto const& seed = seeds[i % seeds.size()];
        auto const kind = sample_kind(seed.category, rng, weights);
        try
        {
            out += emit_record(synthesize(seed, *gen, kind, rng, a.options)).record.dump() + "\n";
        }
        catch (const NoValidDistractor& e)
        {
            ++skipped;
            std::cerr << "skipped: " << e.what() << '\n';
        }
    }
    emit(a.out, out);
    if (skipped)
        std::cerr << fmt::format("{} of {} records skipped\n", skipped, count);
    return 0;
}

// ---- rollout

struct RolloutArgs
{
    std::string queries, out, scripted, base_url, model, api_key, matcher = "auto";
    std::size_t group_size = 8, parallel = 4;
    std::uint64_t seed = 0;
    RolloutLimits limits;
    int timeout_ms = 60000, retries = 3, max_tokens = 1024;
    double temperature = 1.0, fault_prob = 0;
};

Query load_query(const Json& j, const fs::path& base)
{
    Query q;
    q.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    q.text = j.at("text").get<std::string>();
    q.gold = j.at("gold").get<std::string>();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    if (j.contains("image"))
        q.visual = read_image(resolve(j.at("image").get<std::string>()));
    else if (j.contains("raw"))
        q.visual = read_raw_rgb(resolve(j.at("raw").get<std::string>()), j.at("width").get<std::size_t>(), j.at("height").get<std::size_t>());
    else if (j.contains("frames"))
        q.visual = read_frames_dir(resolve(j.at("frames").get<std::string>()));
    else
        throw InvalidInput(q.id + ": query needs \"image\", \"raw\" or \"frames\"");
    return q;
}

int run_rollout_cmd(const RolloutArgs& a)
{
    a.limits.validate();
    std::unique_ptr<PolicyBackend> backend;
    if (!a.scripted.empty())
        backend = std::make_unique<ScriptedBackend>(ScriptedBackend::from_json(Json::parse(read_text_file(a.scripted))));
    else
    {
        ChatConfig cfg;
        cfg.base_url = a.base_url;
        cfg.model = a.model;
        cfg.api_key = a.api_key;
        cfg = ChatConfig::from_env(cfg);
        if (!a.base_url.empty())
            cfg.base_url = a.base_url;
        if (!a.model.empty())
            cfg.model = a.model;
        if (!a.api_key.empty())
            cfg.api_key = a.api_key;
        cfg.timeout = std::chrono::milliseconds(a.timeout_ms);
        cfg.max_retries = a.retries;
        cfg.temperature = a.temperature;
        cfg.max_tokens = a.max_tokens;
        backend = std::make_unique<HttpPolicyBackend>(cfg);
    }

    RolloutOptions options;
    options.limits = a.limits;
    options.matcher = parse_matcher(a.matcher);
    options.fault_probability = a.fault_prob;

    auto const base = fs::path(a.queries).parent_path();
    std::string out;
    std::size_t failed = 0;
    std::uint64_t qi = 0;
    for (auto const& j: read_jsonl_file(a.queries))
    {
        auto const q = load_query(j, base);
        auto const res = run_group(*backend, q, a.group_size, options, Rng::derive(a.seed, qi++).next(), a.parallel);
        Json line = { { "query_id", q.id }, { "rapr", rapr(res.group) } };
        auto& records = line["records"] = Json::array();
        for (auto const& r: res.group.records)
            records.push_back(to_json(r));
        auto& rollouts = line["rollouts"] = Json::array();
        for (auto const& r: res.rollouts)
        {
            rollouts.push_back(to_json(r));
            if (r.status == RolloutStatus::Failed)
            {
                ++failed;
                std::cerr << fmt::format("{}: {}\n", r.record.trajectory_id, r.error);
            }
        }
        out += line.dump() + "\n";
    }
    emit(a.out, out);
    return failed ? kExitBackend : 0;
}

void add_reward_flags(CLI::App* cmd, RewardConfig& cfg)
{
    cmd->add_option("--alpha", cfg.alpha, "curiosity multiplier")->capture_default_str();
    cmd->add_option("--beta", cfg.beta, "cost per operation beyond the budget")->capture_default_str();
    cmd->add_option("--h", cfg.h_threshold, "target rate of pixel-space reasoning")->capture_default_str();
    cmd->add_option("--n", cfg.n_max, "operation budget per response")->capture_default_str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Runtime and analysis toolkit for pixel-space reasoning agents" };
    // "-h" is left free for the RaPR threshold flag "--h"
    app.set_help_flag("--help", "print this help message and exit");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "expand help for all subcommands");

    ExecOpArgs execA;
    auto* exec = app.add_subcommand("exec-op", "apply one tool call to an image or frames directory");
    auto* srcGroup = exec->add_option_group("source")->require_option(1);
    srcGroup->add_option("--image", execA.image, "PNG or PPM image")->check(CLI::ExistingFile);
    srcGroup->add_option("--raw", execA.raw, "headerless RGB8 file (needs --width/--height)")->check(CLI::ExistingFile);
    srcGroup->add_option("--frames", execA.frames, "directory of frame_%04d.png")->check(CLI::ExistingDirectory);
    exec->add_option("--width", execA.width);
    exec->add_option("--height", execA.height);
    auto* callGroup = exec->add_option_group("call")->require_option(1);
    callGroup->add_option("--call", execA.call, "tool call, with or without <tool_call> tags");
    callGroup->add_option("--call-file", execA.call_file, "file holding the tool call ('-' for stdin)");
    exec->add_option("--out-dir", execA.out_dir, "write resulting images here as PNG");
    exec->add_option("--fault-prob", execA.fault_prob, "probability of an injected fault")->check(CLI::Range(0.0, 1.0));
    exec->add_option("--seed", execA.seed);

    ParseArgs parseA;
    auto* parse = app.add_subcommand("parse", "segment flat transcripts into trajectory JSONL");
    parse->add_option("inputs", parseA.inputs, "transcript files ('-' for stdin)")->required();
    parse->add_option("-o,--out", parseA.out, "output file (default stdout)");
    parse->add_option("--error-prefix", parseA.error_prefix, "line prefix marking an error outcome")->capture_default_str();
    parse->add_flag("--infer-elided", parseA.infer, "insert an inferred invocation before an outcome that lacks one");

    RewardArgs rewardA;
    auto* reward = app.add_subcommand("reward", "rollout JSONL to per-record shaped rewards (CSV)");
    reward->add_option("input", rewardA.input, "rollout records JSONL ('-' for stdin)")->required();
    reward->add_option("-o,--out", rewardA.out, "output file (default stdout)");
    add_reward_flags(reward, rewardA.cfg);
    reward->add_option("--lambda1", rewardA.lambda1, "standard-Lagrangian RaPR multiplier (default: alpha)");
    reward->add_option("--lambda2", rewardA.lambda2, "standard-Lagrangian operation multiplier (default: beta)");

    AdvantagesArgs advA;
    auto* adv = app.add_subcommand("advantages", "reward or rollout JSONL to GRPO batches with selective replay");
    adv->add_option("input", advA.input, "lines with query_id, trajectory_id and reward, or rollout records")->required();
    adv->add_option("-o,--out", advA.out, "output file (default stdout)");
    adv->add_option("--mode", advA.mode, "mean_only or mean_std")->capture_default_str();
    adv->add_option("--eps", advA.eps, "uniformity tolerance")->capture_default_str();
    adv->add_flag("--no-ssr", advA.no_ssr, "disable replay");
    adv->add_option("--train-batch", advA.episode.train_batch)->capture_default_str();
    adv->add_option("--queries-per-episode", advA.episode.queries_per_episode)->capture_default_str();
    adv->add_option("--group-size", advA.episode.group_size)->capture_default_str();
    adv->add_option("--queries-per-step", advA.queries_per_step, "groups per batch (default train_batch / group_size)");
    adv->add_option("--seed", advA.seed);
    add_reward_flags(adv, advA.cfg);

    SimulateArgs simA;
    auto* sim = app.add_subcommand("simulate", "run the two-mode policy simulator and write metrics CSV");
    sim->add_option("-o,--out", simA.out, "output file (default stdout)");
    sim->add_option("--seed", simA.cfg.seed)->capture_default_str();
    sim->add_option("--steps", simA.cfg.steps)->capture_default_str();
    sim->add_option("--group-size", simA.cfg.group_size)->capture_default_str();
    sim->add_option("--queries-per-step", simA.cfg.queries_per_step)->capture_default_str();
    sim->add_option("--needs-pixel", simA.cfg.needs_pixel_fraction, "fraction of queries that need visual operations")->capture_default_str();
    sim->add_option("--practice-gain", simA.cfg.practice.practice_gain)->capture_default_str();
    sim->add_option("--error-decay", simA.cfg.practice.error_decay)->capture_default_str();
    sim->add_option("--step-size", simA.step_size, "policy learning rate (default from preset)");
    sim->add_option("--preset", simA.preset, "warm_start or no_correction")->capture_default_str();
    sim->add_option("--mode", simA.mode, "mean_only or mean_std")->capture_default_str();
    sim->add_flag("--no-curiosity", simA.no_curiosity, "drop the curiosity bonus");
    add_reward_flags(sim, simA.cfg.reward);

    SynthArgs synA;
    auto* syn = app.add_subcommand("synth", "synthesize trajectories with loss masks from seed JSONL");
    syn->add_option("input", synA.input, "seed JSONL")->required()->check(CLI::ExistingFile);
    syn->add_option("-o,--out", synA.out, "output file (default stdout)");
    syn->add_option("--category", synA.category, "keep only image or video seeds");
    syn->add_option("--count", synA.count, "records to emit, cycling over seeds (default: one per seed)");
    syn->add_option("--seed", synA.seed);
    syn->add_option("--proportions", synA.proportions, "kind=weight list, e.g. single_pass=0.5,recrop_once=0.5");
    syn->add_option("--oversize", synA.options.oversize_factor, "minimum oversized-crop area in cue areas")->capture_default_str();
    syn->add_option("--text-backend", synA.backend, "canned or chat")->capture_default_str();
    syn->add_option("--base-url", synA.base_url);
    syn->add_option("--model", synA.model);

    RolloutArgs rollA;
    auto* roll = app.add_subcommand("rollout", "run rollout groups against a policy backend");
    roll->add_option("queries", rollA.queries, "query JSONL (id, text, gold, image|raw|frames)")->required()->check(CLI::ExistingFile);
    roll->add_option("-o,--out", rollA.out, "output file (default stdout)");
    roll->add_option("-g,--group-size", rollA.group_size)->capture_default_str();
    roll->add_option("-j,--parallel", rollA.parallel, "rollouts in flight per group")->capture_default_str();
    roll->add_option("--seed", rollA.seed);
    roll->add_option("--max-ops", rollA.limits.max_visual_ops)->capture_default_str();
    roll->add_option("--max-steps", rollA.limits.max_steps)->capture_default_str();
    roll->add_option("--max-context", rollA.limits.max_context_chars)->capture_default_str();
    roll->add_option("--matcher", rollA.matcher, "exact, normalized, choice_letter or auto")->capture_default_str();
    roll->add_option("--fault-prob", rollA.fault_prob)->check(CLI::Range(0.0, 1.0));
    auto* scripted = roll->add_option("--scripted", rollA.scripted, "replay chunks from a JSON script instead of HTTP")->check(CLI::ExistingFile);
    roll->add_option("--base-url", rollA.base_url, "chat-completion base URL (env PIXKIT_BASE_URL)")->excludes(scripted);
    roll->add_option("--model", rollA.model, "model name (env PIXKIT_MODEL)")->excludes(scripted);
    roll->add_option("--api-key", rollA.api_key, "bearer token (env PIXKIT_API_KEY or OPENAI_API_KEY)")->excludes(scripted);
    roll->add_option("--timeout-ms", rollA.timeout_ms)->capture_default_str();
    roll->add_option("--retries", rollA.retries)->capture_default_str();
    roll->add_option("--temperature", rollA.temperature)->capture_default_str();
    roll->add_option("--max-tokens", rollA.max_tokens)->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        auto const code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try
    {
        if (*exec)
            return run_exec_op(execA);
        if (*parse)
            return run_parse(parseA);
        if (*reward)
            return run_reward(rewardA);
        if (*adv)
            return run_advantages(advA);
        if (*sim)
            return run_simulate(simA);
        if (*syn)
            return run_synth(synA);
        if (*roll)
            return run_rollout_cmd(rollA);
    }
    catch (const BackendUnavailable& e)
    {
        std::cerr << "backend error: " << e.what() << '\n';
        return kExitBackend;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
