#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gsrm/rlhf.hpp"
#include "gsrm/rng.hpp"

TEST_CASE("group advantages: hand case and zero-sum invariant", "[rlhf]") {
    const std::vector<double> adv = gsrm::group_advantages({1.0, 2.0, 3.0, 4.0});
    REQUIRE(adv == std::vector<double>{-1.5, -0.5, 0.5, 1.5});

    gsrm::Rng rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> rewards;
        for (int i = 0; i < 4; ++i) rewards.push_back(rng.uniform(-5.0, 5.0));
        const std::vector<double> a = gsrm::group_advantages(rewards);
        double sum = 0.0;
        for (double v : a) sum += v;
        REQUIRE(std::abs(sum) <= 1e-12);
    }
}

TEST_CASE("group advantages: std normalization and larger groups", "[rlhf]") {
    gsrm::GrpoConfig cfg;
    cfg.normalize_by_std = true;

    const std::vector<double> rewards = {1.0, 2.0, 3.0, 4.0};
    const double sd = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 4.0);
    const std::vector<double> adv = gsrm::group_advantages(rewards, cfg);
    for (std::size_t i = 0; i < 4; ++i)
        REQUIRE(adv[i] == Catch::Approx((rewards[i] - 2.5) / (sd + cfg.std_epsilon))
                              .margin(1e-15));

    // Degenerate group: all advantages are exactly zero even when normalizing.
    REQUIRE(gsrm::group_advantages({3.0, 3.0, 3.0, 3.0}, cfg) ==
            std::vector<double>{0.0, 0.0, 0.0, 0.0});

    gsrm::GrpoConfig wide;
    wide.group_size = 8;
    const std::vector<double> eight = {1, 2, 3, 4, 5, 6, 7, 8};
    double sum = 0.0;
    for (double v : gsrm::group_advantages(eight, wide)) sum += v;
    REQUIRE(std::abs(sum) <= 1e-12);

    SECTION("size mismatches are rejected") {
        REQUIRE_THROWS_AS(gsrm::group_advantages({1.0, 2.0}), gsrm::Error);
        gsrm::GrpoConfig bad;
        bad.group_size = 1;
        REQUIRE_THROWS_AS(gsrm::group_advantages({1.0}, bad), gsrm::Error);
    }
}

TEST_CASE("shaped rewards", "[rlhf]") {
    SECTION("negative-L2 distance") {
        REQUIRE(gsrm::shaped_reward_l2(3.0, 5.0) == -2.0);
        REQUIRE(gsrm::shaped_reward_l2(5.0, 3.0) == -2.0);
        REQUIRE(gsrm::shaped_reward_l2(4.0, 4.0) == 0.0);
        REQUIRE(gsrm::shaped_reward_l2(4.9, 5.0) > gsrm::shaped_reward_l2(4.0, 5.0));
    }
    SECTION("RBF hits exp(-1/2) at one sigma") {
        for (double sigma : {1.0, 0.5, 2.5}) {
            gsrm::RewardShapingConfig cfg;
            cfg.mode = gsrm::RewardShapingConfig::Mode::Rbf;
            cfg.sigma = sigma;
            REQUIRE(gsrm::shaped_reward_rbf(sigma, 0.0, cfg) ==
                    Catch::Approx(std::exp(-0.5)).margin(1e-12));
            REQUIRE(gsrm::shaped_reward_rbf(0.0, 0.0, cfg) == 1.0);
        }
        gsrm::RewardShapingConfig half;
        half.sigma = 0.5;
        REQUIRE(gsrm::shaped_reward_rbf(3.5, 3.0, half) ==
                Catch::Approx(std::exp(-0.5)).margin(1e-12));
        // Symmetric, bounded, decreasing in |diff|.
        REQUIRE(gsrm::shaped_reward_rbf(2.0, 5.0) == gsrm::shaped_reward_rbf(5.0, 2.0));
        REQUIRE(gsrm::shaped_reward_rbf(2.0, 5.0) < gsrm::shaped_reward_rbf(3.0, 5.0));
    }
    SECTION("sigma must be positive") {
        gsrm::RewardShapingConfig bad;
        bad.sigma = 0.0;
        REQUIRE_THROWS_AS(gsrm::shaped_reward_rbf(1.0, 2.0, bad), gsrm::Error);
    }
}

namespace {

gsrm::MockGenerator make_generator(std::uint64_t seed, double drift) {
    gsrm::MockGenerator gen;
    gen.quality_mean = {{"pacing", 2.0}};
    gen.quality_noise_std = {{"pacing", 0.5}};
    gen.drift_per_step = drift;
    gen.seed = seed;
    return gen;
}

double l2_judge_value(const gsrm::RatingSet& r) {
    return gsrm::shaped_reward_l2(r.at("pacing"), 5.0);
}

} // namespace

TEST_CASE("positive drift improves the simulated reward", "[rlhf]") {
    int improved = 0;
    const int n_seeds = 20, steps = 150;
    for (int seed = 1; seed <= n_seeds; ++seed) {
        const gsrm::SimTrajectory traj =
            gsrm::run_sim_loop(make_generator(std::uint64_t(seed), 0.2), l2_judge_value, {}, steps);
        REQUIRE(traj.mean_rewards.size() == std::size_t(steps));
        const auto& mr = traj.mean_rewards;
        const double first = gsrm::stats::mean({mr.begin(), mr.begin() + 50});
        const double last = gsrm::stats::mean({mr.end() - 50, mr.end()});
        if (last > first) ++improved;
    }
    REQUIRE(improved >= 19); // >= 95% of seeds
}

TEST_CASE("simulation is seed-deterministic and honors zero drift", "[rlhf]") {
    const gsrm::SimTrajectory a =
        gsrm::run_sim_loop(make_generator(7, 0.2), l2_judge_value, {}, 40);
    const gsrm::SimTrajectory b =
        gsrm::run_sim_loop(make_generator(7, 0.2), l2_judge_value, {}, 40);
    REQUIRE(a.mean_rewards == b.mean_rewards);
    REQUIRE(a.steps.back().latents == b.steps.back().latents);

    const gsrm::SimTrajectory c =
        gsrm::run_sim_loop(make_generator(8, 0.2), l2_judge_value, {}, 40);
    REQUIRE(a.mean_rewards != c.mean_rewards);

    const gsrm::SimTrajectory frozen =
        gsrm::run_sim_loop(make_generator(7, 0.0), l2_judge_value, {}, 40);
    for (const gsrm::SimStep& s : frozen.steps) {
        REQUIRE(s.latents.at("pacing") == 2.0);
        // Zero-sum advantages bracket zero at every step.
        REQUIRE(s.max_advantage >= 0.0);
        REQUIRE(s.min_advantage <= 0.0);
    }
}

TEST_CASE("simulation validation", "[rlhf]") {
    REQUIRE_THROWS_AS(gsrm::run_sim_loop(make_generator(1, 0.1), l2_judge_value, {}, 0),
                      gsrm::Error);
    REQUIRE_THROWS_AS(gsrm::run_sim_loop(make_generator(1, 0.1), nullptr, {}, 10), gsrm::Error);

    gsrm::MockGenerator out_of_range = make_generator(1, 0.1);
    out_of_range.quality_mean["pacing"] = 7.0;
    REQUIRE_THROWS_AS(gsrm::run_sim_loop(out_of_range, l2_judge_value, {}, 10), gsrm::Error);

    gsrm::MockGenerator no_noise = make_generator(1, 0.1);
    no_noise.quality_noise_std.clear();
    REQUIRE_THROWS_AS(gsrm::run_sim_loop(no_noise, l2_judge_value, {}, 10), gsrm::Error);

    const auto throwing_judge = [](const gsrm::RatingSet&) -> double {
        gsrm::fail("metric missing");
        return 0.0;
    };
    REQUIRE_THROWS_WITH(gsrm::run_sim_loop(make_generator(1, 0.1), throwing_judge, {}, 10),
                        Catch::Matchers::ContainsSubstring("judge failed at step 0"));
}
