// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/random.hpp>
#include <pixkit/tool_protocol.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pixkit
{

enum class AdvantageMode
{
    MeanOnly, ///< r_i - mean
    MeanStd,  ///< (r_i - mean) / (std + eps), population std
};

[[nodiscard]] AdvantageMode parse_advantage_mode(std::string_view name);

struct AdvantageGroup
{
    std::string query_id;
    std::vector<std::string> trajectory_ids;
    std::vector<double> rewards;
    std::vector<double> advantages;
    /// All rewards within eps of each other; advantages are then all zero.
    bool uniform = false;
};

inline constexpr double kUniformEps = 1e-8;

/// Throws GroupTooSmall for fewer than 2 rewards. Trajectory ids default to
/// the positional index.
[[nodiscard]] AdvantageGroup group_advantages(const std::vector<double>& rewards, AdvantageMode mode = AdvantageMode::MeanOnly,
                                              double eps = kUniformEps, std::string query_id = {},
                                              std::vector<std::string> trajectory_ids = {});

/// Fraction of groups flagged uniform; 0 for an empty list.
[[nodiscard]] double detect_uniformity_ratio(const std::vector<AdvantageGroup>& groups);

enum class SampleOrigin
{
    Fresh,
    Replay,
};

/// One query-response pair with its advantage.
struct Sample
{
    std::string query_id;
    std::string trajectory_id;
    double reward = 0;
    double advantage = 0;
    std::uint64_t episode_id = 0;
    SampleOrigin origin = SampleOrigin::Fresh;
};

struct ReplayBuffer
{
    std::uint64_t episode_id = 0;
    std::vector<Sample> entries;
};

struct EpisodeConfig
{
    std::size_t queries_per_episode = 512;
    std::size_t group_size = 8;
    std::size_t train_batch = 256;

    void validate() const;
};

/// Replay selection: draw without replacement with probability proportional
/// to |advantage|, uniformly when all magnitudes are equal.
struct SsrSelector
{
    bool enabled = true;
};

struct TrainingBatch
{
    std::vector<Sample> samples;
    std::size_t fresh_count = 0;
    std::size_t replay_count = 0;
    /// Fewer than train_batch samples because the buffer ran short.
    bool underfull = false;
};

/// All non-uniform fresh samples, topped up from the buffer to train_batch when
/// SSR is enabled. The buffer is then extended with this step's non-uniform
/// samples; replayed entries stay in the buffer until the episode ends.
[[nodiscard]] TrainingBatch ssr_fill_batch(const std::vector<AdvantageGroup>& fresh, ReplayBuffer& buffer, const EpisodeConfig& cfg,
                                           const SsrSelector& selector, Rng& rng);

enum class EpisodeSignal
{
    Continue,
    SyncPolicyAndClear,
};

/// counter is the number of queries consumed so far.
[[nodiscard]] EpisodeSignal episode_tick(std::uint64_t counter, const EpisodeConfig& cfg);

/// Single-coordinator driver tying batches to the episode lifecycle. Each
/// fresh group counts as one consumed query.
class ReplayCoordinator
{
  public:
    ReplayCoordinator(EpisodeConfig cfg, SsrSelector selector, std::uint64_t seed);

    struct StepResult
    {
        TrainingBatch batch;
        double uniformity = 0;
        /// Episode boundaries crossed while consuming this step's queries.
        std::size_t syncs = 0;
    };

    StepResult step(const std::vector<AdvantageGroup>& fresh);

    [[nodiscard]] const ReplayBuffer& buffer() const { return _buffer; }
    [[nodiscard]] std::uint64_t consumed() const { return _consumed; }

  private:
    EpisodeConfig _cfg;
    SsrSelector _selector;
    Rng _rng;
    ReplayBuffer _buffer;
    std::uint64_t _consumed = 0;
};

[[nodiscard]] Json to_json(const Sample& sample);
[[nodiscard]] Json to_json(const AdvantageGroup& group);

} // namespace pixkit
