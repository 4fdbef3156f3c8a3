#include "httpfuzz/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace httpfuzz {

std::string to_string(SchedulerMode m) {
    switch (m) {
        case SchedulerMode::Stsa: return "stsa";
        case SchedulerMode::PlainThompson: return "thompson";
        case SchedulerMode::RoundRobin: return "roundrobin";
    }
    return "?";
}

SchedulerMode scheduler_mode_from_string(std::string_view s) {
    if (s == "stsa") return SchedulerMode::Stsa;
    if (s == "thompson") return SchedulerMode::PlainThompson;
    if (s == "roundrobin") return SchedulerMode::RoundRobin;
    throw std::invalid_argument("bad scheduler mode: " + std::string(s));
}

double explore_balancing(long alpha, long beta, long total_trials, long n) {
    return std::log(static_cast<double>(total_trials) / static_cast<double>(n) + 1.0) /
           std::log(static_cast<double>(alpha + beta) + 1.0);
}

double mutation_potential(long v_i, long v_sum) {
    if (v_sum <= 0) return 0.0;
    return std::log(static_cast<double>(v_i) + 1.0) / std::log(static_cast<double>(v_sum) + 1.0);
}

double stsa_score(double theta, double m_factor, double e_factor) {
    return theta * (1.0 + m_factor) * (1.0 + e_factor);
}

double sample_beta(double alpha, double beta, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
    double x = ga(rng), y = gb(rng);
    return x / (x + y);
}

std::vector<TemplateStats> snapshot_stats(const TemplatePool& pool) {
    std::vector<TemplateStats> rows;
    rows.reserve(pool.size());
    for (const auto& tpl : pool.templates())
        rows.push_back({tpl.id, tpl.alpha, tpl.beta, tpl.mutation_space_size(),
                        tpl.invocation_count});
    return rows;
}

std::vector<std::string> Scheduler::round(const std::vector<TemplateStats>& rows,
                                          std::mt19937_64& rng,
                                          std::vector<ScoredTemplate>* scores_out) {
    if (rows.empty()) return {};
    const long n = static_cast<long>(rows.size());
    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))));

    if (mode_ == SchedulerMode::RoundRobin) {
        std::vector<std::string> selected;
        for (std::size_t i = 0; i < k; ++i)
            selected.push_back(rows[(rr_cursor_ + i) % rows.size()].id);
        rr_cursor_ = (rr_cursor_ + k) % rows.size();
        return selected;
    }

    long total_trials = 0, v_sum = 0;
    for (const auto& r : rows) {
        total_trials += r.invocations;
        v_sum += r.v;
    }

    std::vector<ScoredTemplate> scored;
    scored.reserve(rows.size());
    for (const auto& r : rows) {
        ScoredTemplate s;
        s.id = r.id;
        s.theta = deterministic_
                      ? static_cast<double>(r.alpha) / static_cast<double>(r.alpha + r.beta)
                      : sample_beta(static_cast<double>(r.alpha), static_cast<double>(r.beta), rng);
        if (mode_ == SchedulerMode::Stsa) {
            s.e_factor = explore_balancing(r.alpha, r.beta, total_trials, n);
            s.m_factor = mutation_potential(r.v, v_sum);
        }
        s.score = stsa_score(s.theta, s.m_factor, s.e_factor);
        scored.push_back(std::move(s));
    }
    if (scores_out) *scores_out = scored;

    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scored[a].score != scored[b].score) return scored[a].score > scored[b].score;
        if (rows[a].invocations != rows[b].invocations)
            return rows[a].invocations < rows[b].invocations;
        return rows[a].id < rows[b].id;
    });

    std::vector<std::string> selected;
    for (std::size_t i = 0; i < k; ++i) selected.push_back(rows[order[i]].id);
    return selected;
}

}  // namespace httpfuzz
