// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/reward.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace pixkit
{

void RewardConfig::validate() const
{
    if (!(alpha >= 0) || !(beta >= 0))
        throw InvalidInput(fmt::format("alpha and beta must be non-negative (got {}, {})", alpha, beta));
    if (!(h_threshold >= 0 && h_threshold <= 1))
        throw InvalidInput(fmt::format("h_threshold must lie in [0,1] (got {})", h_threshold));
    if (!(n_max >= 0))
        throw InvalidInput(fmt::format("n_max must be non-negative (got {})", n_max));
}

void LagrangianConfig::validate() const
{
    if (!(lambda1 >= 0) || !(lambda2 >= 0))
        throw InvalidInput(fmt::format("lambda1 and lambda2 must be non-negative (got {}, {})", lambda1, lambda2));
}

void RolloutRecord::validate() const
{
    if (correct != 0 && correct != 1)
        throw InvalidInput(fmt::format("record {}: correct must be 0 or 1", trajectory_id));
    if (is_pr != (n_vo >= 1))
        throw InvalidInput(fmt::format("record {}: is_pr={} disagrees with n_vo={}", trajectory_id, is_pr, n_vo));
}

namespace
{

std::string normalize(std::string_view s)
{
    std::string out;
    bool space = false;
    for (unsigned char c: s)
    {
        if (std::isspace(c))
        {
            space = !out.empty();
            continue;
        }
        if (space)
            out.push_back(' ');
        space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// "B", "(B)", "B.", "B) blue", "b: ..." -> 'B'
std::optional<char> choice_letter(std::string_view s)
{
    auto t = normalize(s);
    std::size_t i = 0;
    if (i < t.size() && (t[i] == '(' || t[i] == '['))
        ++i;
    if (i >= t.size() || !std::isalpha(static_cast<unsigned char>(t[i])))
        return std::nullopt;
    char const letter = static_cast<char>(std::toupper(static_cast<unsigned char>(t[i])));
    ++i;
    if (i == t.size() || t[i] == ')' || t[i] == ']' || t[i] == '.' || t[i] == ':' || t[i] == ' ' || t[i] == ',')
        return letter;
    return std::nullopt;
}

bool single_letter(std::string_view gold)
{
    auto const t = normalize(gold);
    return t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0]));
}

} // namespace

AnswerMatcher parse_matcher(std::string_view name)
{
    if (name == "exact")
        return AnswerMatcher::Exact;
    if (name == "normalized")
        return AnswerMatcher::Normalized;
    if (name == "choice_letter")
        return AnswerMatcher::ChoiceLetter;
    if (name == "auto")
        return AnswerMatcher::Auto;
    throw InvalidInput(fmt::format("unknown matcher '{}' (exact, normalized, choice_letter, auto)", name));
}

int correctness_reward(const std::optional<std::string>& answer, std::string_view gold, AnswerMatcher matcher)
{
    if (gold.empty())
        throw InvalidInput("gold answer must be non-empty");
    if (!answer)
        return 0;
    if (matcher == AnswerMatcher::Auto)
        matcher = single_letter(gold) ? AnswerMatcher::ChoiceLetter : AnswerMatcher::Normalized;
    switch (matcher)
    {
        case AnswerMatcher::Exact: return *answer == gold ? 1 : 0;
        case AnswerMatcher::Normalized: return normalize(*answer) == normalize(gold) ? 1 : 0;
        case AnswerMatcher::ChoiceLetter: {
            auto const a = choice_letter(*answer);
            auto const g = choice_letter(gold);
            return a && g && *a == *g ? 1 : 0;
        }
        case AnswerMatcher::Auto: break;
    }
    return 0;
}

double rapr(const RolloutGroup& group)
{
    if (group.records.empty())
        throw EmptyGroup();
    auto const k = std::count_if(group.records.begin(), group.records.end(), [](const RolloutRecord& r) { return r.is_pr; });
    return static_cast<double>(k) / static_cast<double>(group.records.size());
}

double curiosity_bonus(const RewardConfig& cfg, double rapr_value, bool is_pr)
{
    if (!is_pr)
        return 0.0;
    return cfg.alpha * std::max(cfg.h_threshold - rapr_value, 0.0);
}

double efficiency_penalty(const RewardConfig& cfg, std::size_t n_vo)
{
    return cfg.beta * std::min(cfg.n_max - static_cast<double>(n_vo), 0.0);
}

std::vector<RewardTerms> modified_reward_terms(const RewardConfig& cfg, const RolloutGroup& group)
{
    auto const rate = rapr(group);
    std::vector<RewardTerms> out;
    out.reserve(group.records.size());
    for (auto const& r: group.records)
    {
        RewardTerms t;
        t.correctness = r.correct;
        t.curiosity = curiosity_bonus(cfg, rate, r.is_pr);
        t.penalty = efficiency_penalty(cfg, r.n_vo);
        t.total = t.correctness + t.curiosity + t.penalty;
        out.push_back(t);
    }
    return out;
}

std::vector<double> modified_reward(const RewardConfig& cfg, const RolloutGroup& group)
{
    std::vector<double> out;
    for (auto const& t: modified_reward_terms(cfg, group))
        out.push_back(t.total);
    return out;
}

std::vector<LagrangianTerms> standard_lagrangian_terms(const LagrangianConfig& lcfg, const RewardConfig& cfg, const RolloutGroup& group)
{
    auto const rate = rapr(group);
    std::vector<LagrangianTerms> out;
    out.reserve(group.records.size());
    for (auto const& r: group.records)
    {
        LagrangianTerms t;
        t.correctness = r.correct;
        t.rapr_term = -lcfg.lambda1 * (cfg.h_threshold - rate);
        t.ops_term = -lcfg.lambda2 * (static_cast<double>(r.n_vo) - cfg.n_max);
        t.total = t.correctness + t.rapr_term + t.ops_term;
        out.push_back(t);
    }
    return out;
}

std::vector<double> standard_lagrangian_reward(const LagrangianConfig& lcfg, const RewardConfig& cfg, const RolloutGroup& group)
{
    std::vector<double> out;
    for (auto const& t: standard_lagrangian_terms(lcfg, cfg, group))
        out.push_back(t.total);
    return out;
}

Json to_json(const RolloutRecord& record)
{
    return Json { { "query_id", record.query_id },
                  { "trajectory_id", record.trajectory_id },
                  { "correct", record.correct },
                  { "is_pr", record.is_pr },
                  { "n_vo", record.n_vo } };
}

RolloutRecord record_from_json(const Json& j)
{
    RolloutRecord r;
    auto const id = [](const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    r.query_id = id(j.at("query_id"));
    r.trajectory_id = id(j.at("trajectory_id"));
    auto const& c = j.at("correct");
    r.correct = c.is_boolean() ? (c.get<bool>() ? 1 : 0) : c.get<int>();
    r.n_vo = j.at("n_vo").get<std::size_t>();
    r.is_pr = j.contains("is_pr") ? j.at("is_pr").get<bool>() : r.n_vo >= 1;
    r.validate();
    return r;
}

std::vector<RolloutGroup> read_rollout_groups(std::istream& in)
{
    std::vector<RolloutGroup> groups;
    std::map<std::string, std::size_t> slot;
    std::string line;
    for (std::size_t lineNo = 1; std::getline(in, line); ++lineNo)
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        RolloutRecord record;
        try
        {
            record = record_from_json(Json::parse(line));
        }
        catch (const Json::exception& e)
        {
            throw InvalidInput(fmt::format("line {}: {}", lineNo, e.what()));
        }
        catch (const InvalidInput& e)
        {
            throw InvalidInput(fmt::format("line {}: {}", lineNo, e.what()));
        }
        auto [it, inserted] = slot.try_emplace(record.query_id, groups.size());
        if (inserted)
            groups.push_back({ record.query_id, {} });
        groups[it->second].records.push_back(std::move(record));
    }
    return groups;
}

void write_rollout_groups(std::ostream& out, const std::vector<RolloutGroup>& groups)
{
    for (auto const& g: groups)
        for (auto const& r: g.records)
            out << to_json(r).dump() << '\n';
}

} // namespace pixkit
