// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/grpo.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace pixkit
{

AdvantageMode parse_advantage_mode(std::string_view name)
{
    if (name == "mean_only")
        return AdvantageMode::MeanOnly;
    if (name == "mean_std")
        return AdvantageMode::MeanStd;
    throw InvalidInput(fmt::format("unknown advantage mode '{}' (mean_only, mean_std)", name));
}

AdvantageGroup group_advantages(const std::vector<double>& rewards, AdvantageMode mode, double eps, std::string query_id,
                                std::vector<std::string> trajectory_ids)
{
    if (rewards.size() < 2)
        throw GroupTooSmall(rewards.size());
    if (trajectory_ids.empty())
        for (std::size_t i = 0; i < rewards.size(); ++i)
            trajectory_ids.push_back(std::to_string(i));
    if (trajectory_ids.size() != rewards.size())
        throw InvalidInput("trajectory id count does not match reward count");

    AdvantageGroup g;
    g.query_id = std::move(query_id);
    g.trajectory_ids = std::move(trajectory_ids);
    g.rewards = rewards;
    g.advantages.assign(rewards.size(), 0.0);

    auto const [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    g.uniform = *hi - *lo < eps;
    if (g.uniform)
        return g;

    auto const n = static_cast<double>(rewards.size());
    auto const mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double scale = 1.0;
    if (mode == AdvantageMode::MeanStd)
    {
        double ss = 0;
        for (auto r: rewards)
            ss += (r - mean) * (r - mean);
        scale = 1.0 / (std::sqrt(ss / n) + eps);
    }
    for (std::size_t i = 0; i < rewards.size(); ++i)
        g.advantages[i] = (rewards[i] - mean) * scale;
    return g;
}

double detect_uniformity_ratio(const std::vector<AdvantageGroup>& groups)
{
    if (groups.empty())
        return 0.0;
    auto const k = std::count_if(groups.begin(), groups.end(), [](const AdvantageGroup& g) { return g.uniform; });
    return static_cast<double>(k) / static_cast<double>(groups.size());
}

void EpisodeConfig::validate() const
{
    if (queries_per_episode == 0 || group_size == 0 || train_batch == 0)
        throw InvalidInput("episode config values must be positive");
}

namespace
{

// Weighted sampling without replacement (Efraimidis-Spirakis): keep the k
// largest log(u)/w keys. Zero-weight entries rank after every positive one.
std::vector<std::size_t> weighted_draw(const std::vector<Sample>& entries, std::size_t k, Rng& rng)
{
    bool const equal = std::all_of(entries.begin(), entries.end(), [&](const Sample& s) {
        return std::abs(s.advantage) == std::abs(entries.front().advantage);
    });
    std::vector<std::tuple<int, double, std::size_t>> keys;
    keys.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
        // 1 - uniform() lies in (0, 1], so the log is finite
        auto const logU = std::log(1.0 - rng.uniform());
        auto const w = equal ? 1.0 : std::abs(entries[i].advantage);
        if (w > 0)
            keys.emplace_back(1, logU / w, i);
        else
            keys.emplace_back(0, logU, i);
    }
    k = std::min(k, keys.size());
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                      [](const auto& a, const auto& b) { return a > b; });
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < k; ++i)
        picked.push_back(std::get<2>(keys[i]));
    return picked;
}

} // namespace

TrainingBatch ssr_fill_batch(const std::vector<AdvantageGroup>& fresh, ReplayBuffer& buffer, const EpisodeConfig& cfg,
                             const SsrSelector& selector, Rng& rng)
{
    TrainingBatch batch;
    std::vector<Sample> fresh_samples;
    for (auto const& g: fresh)
    {
        if (g.uniform)
            continue;
        for (std::size_t i = 0; i < g.rewards.size(); ++i)
            fresh_samples.push_back({ g.query_id, g.trajectory_ids.at(i), g.rewards[i], g.advantages.at(i), buffer.episode_id, SampleOrigin::Fresh });
    }
    batch.samples = fresh_samples;
    batch.fresh_count = fresh_samples.size();

    if (selector.enabled && batch.fresh_count < cfg.train_batch)
    {
        auto const shortfall = cfg.train_batch - batch.fresh_count;
        for (auto const idx: weighted_draw(buffer.entries, shortfall, rng))
        {
            auto s = buffer.entries[idx];
            s.origin = SampleOrigin::Replay;
            batch.samples.push_back(std::move(s));
        }
        batch.replay_count = batch.samples.size() - batch.fresh_count;
        batch.underfull = batch.samples.size() < cfg.train_batch;
    }
    else
        batch.underfull = batch.samples.size() < cfg.train_batch;

    if (selector.enabled)
        buffer.entries.insert(buffer.entries.end(), fresh_samples.begin(), fresh_samples.end());
    return batch;
}

EpisodeSignal episode_tick(std::uint64_t counter, const EpisodeConfig& cfg)
{
    return counter > 0 && counter % cfg.queries_per_episode == 0 ? EpisodeSignal::SyncPolicyAndClear : EpisodeSignal::Continue;
}

ReplayCoordinator::ReplayCoordinator(EpisodeConfig cfg, SsrSelector selector, std::uint64_t seed):
    _cfg(cfg), _selector(selector), _rng(seed)
{
    _cfg.validate();
}

ReplayCoordinator::StepResult ReplayCoordinator::step(const std::vector<AdvantageGroup>& fresh)
{
    StepResult result;
    result.batch = ssr_fill_batch(fresh, _buffer, _cfg, _selector, _rng);
    result.uniformity = detect_uniformity_ratio(fresh);
    for (std::size_t i = 0; i < fresh.size(); ++i)
    {
        if (episode_tick(++_consumed, _cfg) == EpisodeSignal::SyncPolicyAndClear)
        {
            _buffer.entries.clear();
            ++_buffer.episode_id;
            ++result.syncs;
        }
    }
    return result;
}

Json to_json(const Sample& sample)
{
    return Json { { "query_id", sample.query_id },
                  { "trajectory_id", sample.trajectory_id },
                  { "reward", sample.reward },
                  { "advantage", sample.advantage },
                  { "episode_id", sample.episode_id },
                  { "origin", sample.origin == SampleOrigin::Fresh ? "fresh" : "replay" } };
}

Json to_json(const AdvantageGroup& group)
{
    return Json { { "query_id", group.query_id },
                  { "trajectory_ids", group.trajectory_ids },
                  { "rewards", group.rewards },
                  { "advantages", group.advantages },
                  { "uniform", group.uniform } };
}

} // namespace pixkit
