// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/chat_client.hpp>
#include <pixkit/error.hpp>
#include <pixkit/random.hpp>
#include <pixkit/trajectory.hpp>
#include <pixkit/visual_ops.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pixkit
{

class CueInvalid : public Error
{
  public:
    using Error::Error;
};

class NoValidDistractor : public Error
{
  public:
    using Error::Error;
};

enum class Category
{
    Image,
    Video,
};

enum class TrajectoryKind
{
    SinglePass,
    RecropOnce,
    RecropTwice,
    FurtherZoom,
    Reselect,
    /// Pure-text record passed through unchanged; never sampled.
    TextOnly,
};

[[nodiscard]] std::string_view to_string(Category c);
[[nodiscard]] std::string_view to_string(TrajectoryKind k);
[[nodiscard]] Category parse_category(std::string_view s);
[[nodiscard]] TrajectoryKind parse_kind(std::string_view s);

using FrameList = std::vector<std::int64_t>;
using Cue = std::variant<BBox, FrameList>;

/// One seed for synthesis. Image seeds carry a bbox cue and the image size;
/// video seeds carry cue frame indices and the clip length.
struct SeedExample
{
    std::string query_id;
    std::string question;
    std::string gold;
    Category category = Category::Image;
    Cue cue;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t num_frames = 16;
    /// Image file or frames directory; only chat-backed generators read it.
    std::string media_path;
    /// What the transition sentence says the model looks at.
    std::string cue_label;

    /// Throws CueInvalid when the cue does not fit the media.
    void validate() const;
};

[[nodiscard]] SeedExample seed_from_json(const Json& j);
[[nodiscard]] Json to_json(const SeedExample& seed);

class TextGen
{
  public:
    virtual ~TextGen() = default;
    virtual std::string describe_whole(const SeedExample& seed) = 0;
    virtual std::string describe_cue(const SeedExample& seed) = 0;
};

/// Deterministic templates built from the seed fields.
class CannedTextGen : public TextGen
{
  public:
    std::string describe_whole(const SeedExample& seed) override;
    std::string describe_cue(const SeedExample& seed) override;
};

/// Asks a chat-completion model, attaching the media from seed.media_path.
class ChatTextGen : public TextGen
{
  public:
    explicit ChatTextGen(ChatConfig config);
    std::string describe_whole(const SeedExample& seed) override;
    std::string describe_cue(const SeedExample& seed) override;

  private:
    std::string ask(const SeedExample& seed, bool cue_only);
    ChatClient _client;
};

struct SynthTrajectory
{
    Trajectory trajectory;
    TrajectoryKind kind = TrajectoryKind::SinglePass;
    Category category = Category::Image;
};

struct SynthOptions
{
    /// Minimum oversized-crop area as a multiple of the cue area.
    double oversize_factor = 4.0;
    std::size_t max_attempts = 1000;
};

[[nodiscard]] std::string transition_sentence(const SeedExample& seed);

/// [whole analysis, transition, invocation, outcome (masked), cue analysis, answer].
[[nodiscard]] SynthTrajectory synth_single_pass(const SeedExample& seed, TextGen& gen);

/// Inserts masked distractor operations, each with its masked outcome and a
/// reflection sentence, ahead of the correct operation.
[[nodiscard]] SynthTrajectory insert_error(const SynthTrajectory& single_pass, const SeedExample& seed, TrajectoryKind kind, Rng& rng,
                                           const SynthOptions& options = {});

/// Pure-text demonstration: [analysis, answer].
[[nodiscard]] SynthTrajectory synth_text_only(const SeedExample& seed, TextGen& gen);

[[nodiscard]] SynthTrajectory synthesize(const SeedExample& seed, TextGen& gen, TrajectoryKind kind, Rng& rng,
                                         const SynthOptions& options = {});

struct KindWeights
{
    std::vector<std::pair<TrajectoryKind, double>> weights;

    static KindWeights defaults(Category category);
    /// "single_pass=0.5,recrop_once=0.5"; weights are normalized.
    static KindWeights parse(std::string_view spec);
};

[[nodiscard]] TrajectoryKind sample_kind(Category category, Rng& rng, const std::optional<KindWeights>& override_weights = std::nullopt);

struct SynthRecord
{
    Json record;
    std::string text;
    /// Byte ranges of masked steps within `text`.
    std::vector<ByteSpan> mask_spans;
};

[[nodiscard]] SynthRecord emit_record(const SynthTrajectory& traj);
[[nodiscard]] SynthTrajectory parse_record(const Json& record);

} // namespace pixkit
