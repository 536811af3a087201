#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "gsrm/error.hpp"
#include "gsrm/ratings.hpp"
#include "gsrm/stats.hpp"

namespace gsrm {

struct TtcConfig {
    int k_samples = 16;
    double temperature = 1.0;
    double top_p = 0.6;
    // Majority vote for mispronunciation instead of the numeric mean, for
    // consumers that need a categorical answer. Ties resolve to the smaller
    // category.
    bool mispronunciation_majority_vote = false;

    void validate() const {
        if (k_samples < 1) fail("TtcConfig: k_samples must be >= 1");
    }
};

struct RewardConfig {
    // Five 5-point rubric sub-metrics plus language_complexity.
    // Mispronunciation is deliberately not in the default list: it is scored
    // on a 3-point scale while the reward averages 5-point Likert scores.
    std::vector<std::string> included_metrics = {
        "expressive_intensity", "expressive_correctness", "intonation",
        "nsvs_and_fillers",     "pacing",                 "language_complexity"};
    std::vector<double> weights; // empty => uniform
    int n_judge_runs = 20;

    std::vector<double> resolved_weights() const {
        if (included_metrics.empty()) fail("RewardConfig: no included metrics");
        std::vector<double> w = weights;
        if (w.empty())
            w.assign(included_metrics.size(), 1.0 / double(included_metrics.size()));
        if (w.size() != included_metrics.size())
            fail("RewardConfig: weight count does not match metric count");
        double sum = 0.0;
        for (double v : w) sum += v;
        if (std::abs(sum - 1.0) > 1e-9) fail("RewardConfig: weights must sum to 1");
        return w;
    }
};

// Test-time scaling: arithmetic mean per field across the samples where the
// field is present. Pairwise summation keeps "K identical samples" exact for
// power-of-two K.
inline RatingSet aggregate_ttc(const std::vector<RatingSet>& samples, const TtcConfig& cfg = {}) {
    cfg.validate();
    if (samples.empty()) fail("aggregate_ttc: empty sample list");
    std::map<std::string, std::vector<double>> per_field;
    for (const RatingSet& s : samples)
        for (const auto& [k, v] : s.values) per_field[k].push_back(v);

    RatingSet out;
    for (auto& [k, vals] : per_field) {
        if (cfg.mispronunciation_majority_vote && k == "mispronunciation") {
            std::map<long, int> votes;
            for (double v : vals) ++votes[std::lround(v)];
            long best = 0;
            int best_n = -1;
            for (const auto& [cat, n] : votes)
                if (n > best_n) {
                    best = cat;
                    best_n = n;
                }
            out.set(k, double(best));
        } else {
            // Sort before summing so the result cannot depend on sample
            // arrival order; the clamp keeps the mathematical min/max bound
            // true in floating point as well.
            std::sort(vals.begin(), vals.end());
            out.set(k, std::clamp(stats::mean(vals), vals.front(), vals.back()));
        }
    }
    return out;
}

struct RewardResult {
    double reward = 0.0;
    std::map<std::string, double> per_metric_means;
    std::vector<std::string> warnings;
};

// reward = mean over judgments of sum_m weight_m * score_m. Every judgment
// must carry every included metric; fewer than n_judge_runs judgments only
// warns, so one short batch cannot sink a whole RL step.
inline RewardResult aggregate_reward(const std::vector<RatingSet>& response_judgments,
                                     const RewardConfig& cfg = {}) {
    if (response_judgments.empty()) fail("aggregate_reward: no judgments");
    const std::vector<double> w = cfg.resolved_weights();

    RewardResult out;
    if (int(response_judgments.size()) < cfg.n_judge_runs)
        out.warnings.push_back("aggregate_reward: " + std::to_string(response_judgments.size()) +
                               " judgments, expected " + std::to_string(cfg.n_judge_runs));

    std::vector<double> per_judgment;
    std::map<std::string, std::vector<double>> per_metric;
    for (std::size_t ji = 0; ji < response_judgments.size(); ++ji) {
        const RatingSet& j = response_judgments[ji];
        double acc = 0.0;
        for (std::size_t mi = 0; mi < cfg.included_metrics.size(); ++mi) {
            const std::string& m = cfg.included_metrics[mi];
            const auto v = j.get(m);
            if (!v)
                fail("aggregate_reward: metric '" + m + "' missing from judgment " +
                     std::to_string(ji));
            acc += w[mi] * *v;
            per_metric[m].push_back(*v);
        }
        per_judgment.push_back(acc);
    }
    out.reward = stats::mean(per_judgment);
    for (const auto& [m, vals] : per_metric) out.per_metric_means[m] = stats::mean(vals);
    return out;
}

} // namespace gsrm
