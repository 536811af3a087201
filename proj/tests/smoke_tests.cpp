#include <catch2/catch_amalgamated.hpp>

#include "gsrm/commands.hpp"
#include "test_support.hpp"

TEST_CASE("library headers are self-consistent", "[smoke]") {
    gsrm::RunConfig cfg;
    REQUIRE(cfg.ttc.k_samples == 16);
    REQUIRE(cfg.reward.n_judge_runs == 20);
    REQUIRE(cfg.grpo.group_size == 4);
}
