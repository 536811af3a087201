#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gsrm/error.hpp"
#include "gsrm/judge.hpp"
#include "gsrm/ratings.hpp"
#include "gsrm/rng.hpp"
#include "gsrm/stats.hpp"

namespace gsrm {

struct AnnotatedSample {
    std::string sample_id;
    std::vector<std::pair<std::string, RatingSet>> annotators; // (annotator_id, ratings)
    std::vector<RatingSet> model_predictions;                  // optional K samples
};

struct EvalReport {
    double pearson = 0.0;
    double spearman = 0.0;
    double mse = 0.0;
    std::size_t n_samples = 0;
    std::string config_echo; // serialized resolved config, for the audit trail
};

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail("pearson: length mismatch");
    if (x.size() < 2) fail("pearson: need at least 2 points");
    const double mx = stats::mean(x), my = stats::mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        fail("pearson: correlation undefined for a constant vector");
    return sxy / std::sqrt(sxx * syy);
}

// Average ranks, ties share the mean rank (1-based).
inline std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double mean_rank = (double(i + 1) + double(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail("spearman: length mismatch");
    return pearson(average_ranks(x), average_ranks(y));
}

inline double mse(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) fail("mse: length mismatch");
    if (pred.empty()) fail("mse: empty input");
    std::vector<double> sq(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sq[i] = d * d;
    }
    return stats::pairwise_sum(sq) / double(sq.size());
}

enum class AggregateMode { Mean, RoundedMean };

inline double round_half_away_from_zero(double v) {
    return v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
}

// Per-field mean across annotators; rounded_mean rounds half away from zero
// (the "average then round to the nearest integer" protocol).
inline RatingSet aggregate_annotators(const AnnotatedSample& sample, AggregateMode mode) {
    if (sample.annotators.empty()) fail("aggregate_annotators: no annotators");
    std::map<std::string, std::vector<double>> per_field;
    for (const auto& [id, r] : sample.annotators)
        for (const auto& [k, v] : r.values) per_field[k].push_back(v);
    RatingSet out;
    for (const auto& [k, vals] : per_field) {
        const double m = stats::mean(vals);
        out.set(k, mode == AggregateMode::RoundedMean ? round_half_away_from_zero(m) : m);
    }
    return out;
}

struct InterRaterResult {
    double pearson_mean = 0.0;
    std::vector<double> per_trial;
    std::size_t n_used = 0;
    std::size_t n_excluded = 0; // samples with < 2 annotators
    bool low_n = false;         // flagged when n_used < 10
};

// Split-half protocol: per trial, shuffle each sample's annotators with a
// seeded PRNG, split into the first ceil(n/2) and the remainder, average
// overall_score within each half, then correlate the halves across samples.
// The estimate is the mean over trials. Deterministic given (seed, trials).
inline InterRaterResult inter_rater_consistency(const std::vector<AnnotatedSample>& samples,
                                                std::uint64_t seed, int trials = 1) {
    if (trials < 1) fail("inter_rater_consistency: trials must be >= 1");
    std::vector<const AnnotatedSample*> usable;
    std::size_t excluded = 0;
    for (const AnnotatedSample& s : samples) {
        if (s.annotators.size() >= 2)
            usable.push_back(&s);
        else
            ++excluded;
    }
    if (usable.size() < 2) fail("inter_rater_consistency: fewer than 2 usable samples");

    InterRaterResult out;
    out.n_used = usable.size();
    out.n_excluded = excluded;
    out.low_n = usable.size() < 10;

    for (int t = 0; t < trials; ++t) {
        Rng rng(Rng::mix(seed, std::uint64_t(t)));
        std::vector<double> half1, half2;
        half1.reserve(usable.size());
        half2.reserve(usable.size());
        for (const AnnotatedSample* s : usable) {
            std::vector<double> overall;
            overall.reserve(s->annotators.size());
            for (const auto& [id, r] : s->annotators) overall.push_back(r.at("overall_score"));
            rng.shuffle(overall);
            const std::size_t n1 = (overall.size() + 1) / 2;
            const std::vector<double> a(overall.begin(), overall.begin() + std::ptrdiff_t(n1));
            const std::vector<double> b(overall.begin() + std::ptrdiff_t(n1), overall.end());
            half1.push_back(stats::mean(a));
            half2.push_back(stats::mean(b));
        }
        out.per_trial.push_back(pearson(half1, half2));
    }
    out.pearson_mean = stats::mean(out.per_trial);
    return out;
}

// Model-human consistency on overall_score: test-time-scaled model scores
// against per-sample human means, compared with the three metrics.
inline EvalReport model_human_report(const std::vector<AnnotatedSample>& samples,
                                     const std::map<std::string, std::vector<RatingSet>>& predictions,
                                     const TtcConfig& ttc_cfg = {}) {
    std::vector<double> model, human;
    std::vector<std::string> missing;
    for (const AnnotatedSample& s : samples) {
        const auto it = predictions.find(s.sample_id);
        if (it == predictions.end()) {
            missing.push_back(s.sample_id);
            continue;
        }
        const RatingSet agg = aggregate_ttc(it->second, ttc_cfg);
        model.push_back(agg.at("overall_score"));
        human.push_back(aggregate_annotators(s, AggregateMode::Mean).at("overall_score"));
    }
    std::vector<std::string> orphans;
    for (const auto& [id, preds] : predictions) {
        bool found = false;
        for (const AnnotatedSample& s : samples) found = found || s.sample_id == id;
        if (!found) orphans.push_back(id);
    }
    if (!missing.empty() || !orphans.empty()) {
        std::string msg = "model_human_report: id mismatch;";
        if (!missing.empty()) {
            msg += " samples without predictions:";
            for (const std::string& id : missing) msg += " " + id;
            msg += ";";
        }
        if (!orphans.empty()) {
            msg += " predictions without samples:";
            for (const std::string& id : orphans) msg += " " + id;
        }
        fail(msg);
    }
    EvalReport report;
    report.n_samples = model.size();
    report.pearson = pearson(model, human);
    report.spearman = spearman(model, human);
    report.mse = mse(model, human);
    return report;
}

} // namespace gsrm
