// SPDX-License-Identifier: Apache-2.0
#include <pixkit/error.hpp>
#include <pixkit/trap_sim.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace pixkit
{

namespace
{

double logistic(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

std::size_t idx(QueryClass c)
{
    return static_cast<std::size_t>(c);
}

} // namespace

double SimPolicy::pr_probability() const
{
    return logistic(pr_logit);
}

double SimPolicy::text_return(double f) const
{
    return f * skill_text[0] + (1 - f) * skill_text[1];
}

double SimPolicy::pixel_return(double f) const
{
    auto mode = [&](std::size_t c) {
        return (1 - op_error_rate) * skill_pixel[c] + op_error_rate * std::min(1.0, skill_text[c] * recovery);
    };
    return f * mode(0) + (1 - f) * mode(1);
}

SimPolicy SimPolicy::warm_start()
{
    SimPolicy p;
    p.pr_logit = std::log(0.55 / 0.45);
    p.skill_text = { 0.35, 0.85 };
    p.skill_pixel = { 0.25, 0.36 };
    p.skill_pixel_cap = { 0.9, 0.85 };
    p.op_error_rate = 0.4;
    p.op_error_floor = 0.05;
    p.recovery = 0.3;
    p.step_size = 0.0025;
    return p;
}

SimPolicy SimPolicy::no_correction()
{
    auto p = warm_start();
    p.op_error_rate = 1.0;
    p.op_error_floor = 1.0;
    p.recovery = 1.0;
    return p;
}

SimGroup sim_rollout_group(const SimPolicy& policy, QueryClass query, std::size_t group_size, Rng& rng, std::uint64_t query_index)
{
    SimGroup g;
    g.query = query;
    g.group.query_id = fmt::format("q{}", query_index);
    auto const p = policy.pr_probability();
    auto const c = idx(query);
    for (std::size_t i = 0; i < group_size; ++i)
    {
        SimRollout r;
        r.pixel = rng.bernoulli(p);
        r.op_failed = rng.bernoulli(policy.op_error_rate);
        auto const u = rng.uniform();
        double success = policy.skill_text[c];
        if (r.pixel)
            success = r.op_failed ? std::min(1.0, policy.skill_text[c] * policy.recovery) : policy.skill_pixel[c];
        if (!r.pixel)
            r.op_failed = false;
        r.correct = u < success ? 1 : 0;
        g.rollouts.push_back(r);
        g.group.records.push_back({ g.group.query_id, fmt::format("{}#{}", g.group.query_id, i), r.correct, r.pixel, r.pixel ? 1u : 0u });
    }
    return g;
}

SimPolicy policy_gradient_step(SimPolicy policy, const std::vector<SimGroup>& groups, const std::vector<AdvantageGroup>& advantages,
                               const PracticeModel& practice)
{
    if (groups.size() != advantages.size())
        throw InvalidInput("one advantage group is needed per rollout group");
    auto const p = policy.pr_probability();
    double grad = 0;
    std::uint64_t attempted = 0;
    std::uint64_t succeeded = 0;
    for (std::size_t g = 0; g < groups.size(); ++g)
    {
        auto const& rollouts = groups[g].rollouts;
        if (advantages[g].advantages.size() != rollouts.size())
            throw InvalidInput("advantage count does not match rollout count");
        for (std::size_t i = 0; i < rollouts.size(); ++i)
        {
            grad += advantages[g].advantages[i] * ((rollouts[i].pixel ? 1.0 : 0.0) - p);
            if (rollouts[i].pixel)
            {
                ++attempted;
                if (!rollouts[i].op_failed)
                    ++succeeded;
            }
        }
    }
    policy.pr_logit += policy.step_size * grad;
    policy.practice += attempted;
    for (std::size_t c = 0; c < 2; ++c)
        policy.skill_pixel[c] = std::min(policy.skill_pixel_cap[c], policy.skill_pixel[c] + practice.practice_gain * static_cast<double>(succeeded));
    policy.op_error_rate = std::max(policy.op_error_floor, policy.op_error_rate - practice.error_decay * static_cast<double>(attempted));
    return policy;
}

void SimConfig::validate() const
{
    if (steps < 1)
        throw InvalidInput("simulation needs at least one step");
    if (group_size < 2)
        throw InvalidInput("group size must be at least 2");
    if (queries_per_step < 1)
        throw InvalidInput("queries per step must be positive");
    if (!(needs_pixel_fraction >= 0 && needs_pixel_fraction <= 1))
        throw InvalidInput("needs_pixel fraction must lie in [0,1]");
    if (practice.practice_gain < 0 || practice.error_decay < 0)
        throw InvalidInput("practice rates must be non-negative");
    reward.validate();
}

double MetricsTrace::mean(double MetricsRow::*column, std::size_t begin, std::size_t end) const
{
    end = std::min(end, rows.size());
    if (begin >= end)
        return 0.0;
    double s = 0;
    for (auto i = begin; i < end; ++i)
        s += rows[i].*column;
    return s / static_cast<double>(end - begin);
}

double MetricsTrace::peak(double MetricsRow::*column) const
{
    double best = 0;
    for (auto const& r: rows)
        best = std::max(best, r.*column);
    return best;
}

void MetricsTrace::write_csv(std::ostream& out) const
{
    out << "step,rapr,op_error,return_text,return_pixel,bonus_mean\n";
    for (auto const& r: rows)
        out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.step, r.rapr, r.op_error, r.return_text, r.return_pixel, r.bonus_mean);
}

MetricsTrace run_training(const SimConfig& cfg)
{
    cfg.validate();
    auto reward = cfg.reward;
    if (!cfg.with_curiosity)
        reward.alpha = 0;

    Rng rng(cfg.seed);
    auto policy = cfg.init;
    MetricsTrace trace;
    trace.rows.reserve(cfg.steps);
    std::uint64_t queryIndex = 0;

    for (std::size_t step = 0; step < cfg.steps; ++step)
    {
        MetricsRow row;
        row.step = step;
        row.return_text = policy.text_return(cfg.needs_pixel_fraction);
        row.return_pixel = policy.pixel_return(cfg.needs_pixel_fraction);

        std::vector<SimGroup> groups;
        std::vector<AdvantageGroup> advantages;
        std::size_t pixel = 0;
        std::size_t failed = 0;
        std::size_t total = 0;
        double bonus = 0;
        for (std::size_t q = 0; q < cfg.queries_per_step; ++q)
        {
            auto const cls = rng.bernoulli(cfg.needs_pixel_fraction) ? QueryClass::NeedsPixel : QueryClass::TextSolvable;
            auto g = sim_rollout_group(policy, cls, cfg.group_size, rng, queryIndex++);
            std::vector<double> rewards;
            for (auto const& t: modified_reward_terms(reward, g.group))
            {
                rewards.push_back(t.total);
                bonus += t.curiosity;
            }
            for (auto const& r: g.rollouts)
            {
                pixel += r.pixel ? 1 : 0;
                failed += r.op_failed ? 1 : 0;
            }
            total += g.rollouts.size();
            advantages.push_back(group_advantages(rewards, cfg.mode));
            groups.push_back(std::move(g));
        }
        row.rapr = static_cast<double>(pixel) / static_cast<double>(total);
        row.op_error = pixel > 0 ? static_cast<double>(failed) / static_cast<double>(pixel) : policy.op_error_rate;
        row.bonus_mean = bonus / static_cast<double>(total);
        trace.rows.push_back(row);

        policy = policy_gradient_step(policy, groups, advantages, cfg.practice);
    }
    return trace;
}

} // namespace pixkit
