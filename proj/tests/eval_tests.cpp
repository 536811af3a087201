#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gsrm/eval.hpp"
#include "gsrm/rng.hpp"

namespace {

gsrm::RatingSet overall(double v) {
    gsrm::RatingSet r;
    r.set("overall_score", v);
    return r;
}

gsrm::AnnotatedSample sample_with(const std::string& id, std::initializer_list<double> overalls) {
    gsrm::AnnotatedSample s;
    s.sample_id = id;
    int i = 0;
    for (double v : overalls) s.annotators.emplace_back("ann" + std::to_string(i++), overall(v));
    return s;
}

} // namespace

TEST_CASE("annotator aggregation: mean and rounded mean", "[eval]") {
    gsrm::AnnotatedSample s = sample_with("s", {3.0, 4.0});
    s.annotators[0].second.set("pacing", 2.0); // field carried by one annotator only

    REQUIRE(gsrm::aggregate_annotators(s, gsrm::AggregateMode::Mean).at("overall_score") == 3.5);
    REQUIRE(gsrm::aggregate_annotators(s, gsrm::AggregateMode::RoundedMean).at("overall_score") ==
            4.0);
    REQUIRE(gsrm::aggregate_annotators(s, gsrm::AggregateMode::Mean).at("pacing") == 2.0);

    const gsrm::AnnotatedSample t = sample_with("t", {2.0, 3.0, 3.0});
    REQUIRE(gsrm::aggregate_annotators(t, gsrm::AggregateMode::RoundedMean).at("overall_score") ==
            3.0);

    gsrm::AnnotatedSample empty;
    empty.sample_id = "none";
    REQUIRE_THROWS_AS(gsrm::aggregate_annotators(empty, gsrm::AggregateMode::Mean), gsrm::Error);
}

TEST_CASE("rounding is half away from zero", "[eval]") {
    REQUIRE(gsrm::round_half_away_from_zero(2.5) == 3.0);
    REQUIRE(gsrm::round_half_away_from_zero(3.5) == 4.0);
    REQUIRE(gsrm::round_half_away_from_zero(-2.5) == -3.0);
    REQUIRE(gsrm::round_half_away_from_zero(0.5) == 1.0);
    REQUIRE(gsrm::round_half_away_from_zero(-0.5) == -1.0);
    REQUIRE(gsrm::round_half_away_from_zero(2.4) == 2.0);
    REQUIRE(gsrm::round_half_away_from_zero(2.6) == 3.0);
    REQUIRE(gsrm::round_half_away_from_zero(0.0) == 0.0);
}

TEST_CASE("identical annotators yield split-half consistency of exactly one", "[eval]") {
    std::vector<gsrm::AnnotatedSample> samples;
    int i = 0;
    for (double q : {2.0, 3.0, 4.0, 5.0})
        samples.push_back(sample_with("s" + std::to_string(i++), {q, q, q}));

    const gsrm::InterRaterResult res = gsrm::inter_rater_consistency(samples, 42, 8);
    REQUIRE(res.pearson_mean == 1.0);
    for (double p : res.per_trial) REQUIRE(p == 1.0);
    REQUIRE(res.n_used == 4);
    REQUIRE(res.n_excluded == 0);
    REQUIRE(res.low_n); // 4 < 10
}

TEST_CASE("split-half estimate matches an independent Monte-Carlo oracle", "[eval]") {
    // Synthetic corpus: per-sample true quality plus annotator noise.
    gsrm::Rng gen(2025);
    const int n_samples = 50, n_annotators = 4;
    std::vector<gsrm::AnnotatedSample> samples;
    std::vector<std::vector<double>> ratings(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const double q = 1.0 + 4.0 * double(i) / double(n_samples - 1);
        std::vector<double> rs;
        for (int a = 0; a < n_annotators; ++a) rs.push_back(q + gen.gaussian(0.0, 0.7));
        ratings[i] = rs;
        gsrm::AnnotatedSample s;
        s.sample_id = "s" + std::to_string(i);
        for (int a = 0; a < n_annotators; ++a)
            s.annotators.emplace_back("ann" + std::to_string(a), overall(rs[a]));
        samples.push_back(std::move(s));
    }

    const gsrm::InterRaterResult res = gsrm::inter_rater_consistency(samples, 123, 100);
    REQUIRE(res.per_trial.size() == 100);
    REQUIRE_FALSE(res.low_n);

    // Oracle: same protocol, independent code and RNG, many more trials.
    const auto mean_of = [](const std::vector<double>& v) {
        long double acc = 0.0L;
        for (double x : v) acc += x;
        return double(acc / (long double)(v.size()));
    };
    const auto pearson_of = [&](const std::vector<double>& x, const std::vector<double>& y) {
        const double mx = mean_of(x), my = mean_of(y);
        long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        return double(sxy / std::sqrt(double(sxx) * double(syy)));
    };
    std::mt19937_64 orng(777);
    long double acc = 0.0L;
    const int oracle_trials = 2000;
    for (int t = 0; t < oracle_trials; ++t) {
        std::vector<double> h1, h2;
        for (const auto& rs : ratings) {
            std::vector<double> shuffled = rs;
            std::shuffle(shuffled.begin(), shuffled.end(), orng);
            const std::size_t n1 = (shuffled.size() + 1) / 2;
            h1.push_back(mean_of({shuffled.begin(), shuffled.begin() + std::ptrdiff_t(n1)}));
            h2.push_back(mean_of({shuffled.begin() + std::ptrdiff_t(n1), shuffled.end()}));
        }
        acc += pearson_of(h1, h2);
    }
    const double oracle = double(acc / oracle_trials);

    REQUIRE(res.pearson_mean == Catch::Approx(oracle).margin(0.05));
    REQUIRE(res.pearson_mean > 0.5); // noisy but clearly consistent corpus
}

TEST_CASE("split-half protocol details", "[eval]") {
    std::vector<gsrm::AnnotatedSample> samples = {
        sample_with("a", {1.0, 2.0, 3.0}),
        sample_with("b", {4.0, 5.0, 4.0}),
        sample_with("c", {2.0, 2.0, 4.0}),
        sample_with("lonely", {3.0}), // < 2 annotators: excluded
    };

    const gsrm::InterRaterResult r1 = gsrm::inter_rater_consistency(samples, 9, 5);
    REQUIRE(r1.n_used == 3);
    REQUIRE(r1.n_excluded == 1);
    REQUIRE(r1.low_n);

    SECTION("deterministic for a fixed seed, seed-sensitive otherwise") {
        const gsrm::InterRaterResult r2 = gsrm::inter_rater_consistency(samples, 9, 5);
        REQUIRE(r1.per_trial == r2.per_trial);
        const gsrm::InterRaterResult r3 = gsrm::inter_rater_consistency(samples, 10, 5);
        REQUIRE(r1.per_trial != r3.per_trial);
    }
    SECTION("validation") {
        REQUIRE_THROWS_AS(gsrm::inter_rater_consistency(samples, 9, 0), gsrm::Error);
        const std::vector<gsrm::AnnotatedSample> thin = {samples[0], samples[3]};
        REQUIRE_THROWS_AS(gsrm::inter_rater_consistency(thin, 9, 1), gsrm::Error);
    }
}

TEST_CASE("model-human report on a hand-built corpus", "[eval]") {
    std::vector<gsrm::AnnotatedSample> samples = {
        sample_with("s1", {2.0, 3.0}), // human mean 2.5, not rounded
        sample_with("s2", {3.0}),
        sample_with("s3", {4.0}),
        sample_with("s4", {5.0}),
    };
    std::map<std::string, std::vector<gsrm::RatingSet>> predictions = {
        {"s1", {overall(2.0), overall(2.0)}},
        {"s2", {overall(4.0), overall(2.0)}},
        {"s3", {overall(3.0), overall(4.0)}},
        {"s4", {overall(5.0), overall(4.0)}},
    };

    const gsrm::EvalReport report = gsrm::model_human_report(samples, predictions);
    const std::vector<double> model = {2.0, 3.0, 3.5, 4.5};
    const std::vector<double> human = {2.5, 3.0, 4.0, 5.0};
    REQUIRE(report.n_samples == 4);
    REQUIRE(report.mse == 0.1875);
    REQUIRE(report.pearson == gsrm::pearson(model, human));
    REQUIRE(report.spearman == gsrm::spearman(model, human));
    REQUIRE(report.pearson > 0.9);

    SECTION("sample without predictions is an error naming the id") {
        auto broken = predictions;
        broken.erase("s3");
        REQUIRE_THROWS_WITH(gsrm::model_human_report(samples, broken),
                            Catch::Matchers::ContainsSubstring("s3"));
    }
    SECTION("prediction without a sample is an error naming the id") {
        auto broken = predictions;
        broken["ghost"] = {overall(3.0)};
        REQUIRE_THROWS_WITH(gsrm::model_human_report(samples, broken),
                            Catch::Matchers::ContainsSubstring("ghost"));
    }
}
