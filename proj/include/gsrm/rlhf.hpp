#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gsrm/error.hpp"
#include "gsrm/ratings.hpp"
#include "gsrm/rng.hpp"
#include "gsrm/stats.hpp"

namespace gsrm {

struct GrpoConfig {
    int group_size = 4;
    bool normalize_by_std = false; // opt-in; the default advantage is mean-only
    double std_epsilon = 1e-8;

    void validate() const {
        if (group_size < 2) fail("GrpoConfig: group_size must be >= 2");
    }
};

struct RewardShapingConfig {
    enum class Mode { L2, Rbf };
    Mode mode = Mode::L2;
    double sigma = 1.0;

    void validate() const {
        if (!(sigma > 0.0)) fail("RewardShapingConfig: sigma must be positive");
    }
};

// a_i = r_i - mean(r); optionally divided by (population std + epsilon).
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            const GrpoConfig& cfg = {}) {
    cfg.validate();
    if (int(rewards.size()) != cfg.group_size)
        fail("group_advantages: got " + std::to_string(rewards.size()) + " rewards for group_size " +
             std::to_string(cfg.group_size));
    const double m = stats::mean(rewards);
    std::vector<double> adv(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - m;
    if (cfg.normalize_by_std) {
        const double sd = stats::population_std(rewards);
        for (double& a : adv) a /= sd + cfg.std_epsilon;
    }
    return adv;
}

inline double shaped_reward_l2(double predicted, double target) {
    return -std::abs(predicted - target);
}

inline double shaped_reward_rbf(double predicted, double target,
                                const RewardShapingConfig& cfg = {}) {
    cfg.validate();
    const double d = predicted - target;
    return std::exp(-(d * d) / (2.0 * cfg.sigma * cfg.sigma));
}

// Desk-scale generator analogue: per-metric latent quality plus seeded noise.
// The drift knob is a REINFORCE-style learning-rate stand-in, not a claim of
// equivalence with the neural policy update.
struct MockGenerator {
    std::map<std::string, double> quality_mean;      // latent score per metric
    std::map<std::string, double> quality_noise_std; // per metric
    double drift_per_step = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (quality_mean.empty()) fail("MockGenerator: no metrics configured");
        for (const auto& [k, v] : quality_mean) {
            const auto [lo, hi] = rating_range(k);
            if (!(v >= lo && v <= hi))
                fail("MockGenerator: latent " + k + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
            if (!quality_noise_std.count(k))
                fail("MockGenerator: missing noise std for " + k);
        }
    }
};

struct SimStep {
    int step = 0;
    double mean_reward = 0.0;
    double max_advantage = 0.0;
    double min_advantage = 0.0;
    std::map<std::string, double> latents; // generator state after the update
};

struct SimTrajectory {
    std::vector<SimStep> steps;
    std::vector<double> mean_rewards; // convenience copy, one per step
};

// One verifier-in-the-loop episode: sample a group, judge it, compute group
// advantages, and nudge each latent by drift * mean_i(a_i * (x_i - latent)).
// Everything is driven by the generator's seed, so the trajectory is
// bit-reproducible.
inline SimTrajectory run_sim_loop(MockGenerator gen,
                                  const std::function<double(const RatingSet&)>& judge,
                                  const GrpoConfig& grpo, int steps) {
    gen.validate();
    grpo.validate();
    if (steps < 1) fail("run_sim_loop: steps must be >= 1");
    if (!judge) fail("run_sim_loop: no judge");

    Rng rng(gen.seed);
    SimTrajectory traj;
    traj.steps.reserve(std::size_t(steps));
    for (int step = 0; step < steps; ++step) {
        std::vector<RatingSet> responses(std::size_t(grpo.group_size));
        for (int i = 0; i < grpo.group_size; ++i)
            for (const auto& [metric, latent] : gen.quality_mean) {
                const auto [lo, hi] = rating_range(metric);
                const double v = rng.gaussian(latent, gen.quality_noise_std.at(metric));
                responses[std::size_t(i)].set(metric, std::clamp(v, lo, hi));
            }

        std::vector<double> rewards(std::size_t(grpo.group_size));
        for (int i = 0; i < grpo.group_size; ++i) {
            try {
                rewards[std::size_t(i)] = judge(responses[std::size_t(i)]);
            } catch (const Error& e) {
                fail("run_sim_loop: judge failed at step " + std::to_string(step) + ": " +
                     e.what());
            }
        }
        const std::vector<double> adv = group_advantages(rewards, grpo);

        for (auto& [metric, latent] : gen.quality_mean) {
            double acc = 0.0;
            for (int i = 0; i < grpo.group_size; ++i)
                acc += adv[std::size_t(i)] *
                       (responses[std::size_t(i)].at(metric) - latent);
            const auto [lo, hi] = rating_range(metric);
            latent = std::clamp(latent + gen.drift_per_step * acc / double(grpo.group_size),
                                lo, hi);
        }

        SimStep s;
        s.step = step;
        s.mean_reward = stats::mean(rewards);
        s.max_advantage = *std::max_element(adv.begin(), adv.end());
        s.min_advantage = *std::min_element(adv.begin(), adv.end());
        s.latents = gen.quality_mean;
        traj.mean_rewards.push_back(s.mean_reward);
        traj.steps.push_back(std::move(s));
    }
    return traj;
}

} // namespace gsrm
