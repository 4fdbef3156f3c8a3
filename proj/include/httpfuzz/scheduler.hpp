#pragma once

#include <random>
#include <string>
#include <vector>

#include "httpfuzz/template_store.hpp"

namespace httpfuzz {

enum class SchedulerMode { Stsa, PlainThompson, RoundRobin };

std::string to_string(SchedulerMode m);
SchedulerMode scheduler_mode_from_string(std::string_view s);

/// One template's bandit row: posterior counts (priors included), mutation
/// space size and invocation count.
struct TemplateStats {
    std::string id;
    long alpha = kPriorAlpha;
    long beta = kPriorBeta;
    long v = 0;
    long invocations = 0;
};

struct ScoredTemplate {
    std::string id;
    double theta = 0.0;
    double e_factor = 0.0;
    double m_factor = 0.0;
    double score = 0.0;
};

/// Exploration balance: log(total_trials/N + 1) / log(alpha + beta + 1),
/// natural logarithm. alpha/beta include the Beta(1,1) prior.
double explore_balancing(long alpha, long beta, long total_trials, long n);

/// Mutation potential: log(v_i + 1) / log(v_sum + 1); 0 when the pool has no
/// candidate values at all.
double mutation_potential(long v_i, long v_sum);

/// theta * (1 + M) * (1 + E).
double stsa_score(double theta, double m_factor, double e_factor);

double sample_beta(double alpha, double beta, std::mt19937_64& rng);

std::vector<TemplateStats> snapshot_stats(const TemplatePool& pool);

/// Selects the top ceil(0.1*N) templates (min 1) per round. Deterministic
/// mode replaces the Beta draw with the posterior mean, for testing.
class Scheduler {
public:
    explicit Scheduler(SchedulerMode mode, bool deterministic = false)
        : mode_(mode), deterministic_(deterministic) {}

    SchedulerMode mode() const { return mode_; }

    std::vector<std::string> round(const std::vector<TemplateStats>& rows, std::mt19937_64& rng,
                                   std::vector<ScoredTemplate>* scores_out = nullptr);

private:
    SchedulerMode mode_;
    bool deterministic_;
    std::size_t rr_cursor_ = 0;
};

}  // namespace httpfuzz
