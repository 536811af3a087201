#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gsrm/eval.hpp"
#include "gsrm/rng.hpp"
#include "gsrm/stats.hpp"
#include "test_support.hpp"

namespace {

// Definitional oracles in extended precision, written independently of the
// library implementations.
long double brute_mean(const std::vector<double>& x) {
    long double s = 0.0L;
    for (double v : x) s += v;
    return s / (long double)(x.size());
}

long double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const long double mx = brute_mean(x), my = brute_mean(y);
    long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += ((long double)x[i] - mx) * ((long double)y[i] - my);
        sxx += ((long double)x[i] - mx) * ((long double)x[i] - mx);
        syy += ((long double)y[i] - my) * ((long double)y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> brute_ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t below = 0, equal = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (x[j] < x[i]) ++below;
            if (x[j] == x[i]) ++equal;
        }
        // Mean of ranks below+1 .. below+equal.
        r[i] = double(below) + double(equal + 1) / 2.0;
    }
    return r;
}

long double brute_mse(const std::vector<double>& a, const std::vector<double>& b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += ((long double)a[i] - (long double)b[i]) * ((long double)a[i] - (long double)b[i]);
    return s / (long double)(a.size());
}

} // namespace

TEST_CASE("splitmix64 reference values", "[rng]") {
    // First three outputs for seed 0 of the published splitmix64 reference.
    gsrm::Rng r(0);
    REQUIRE(r.next_u64() == 0xe220a8397b1dcdafull);
    REQUIRE(r.next_u64() == 0x6e789e6aa1b965f4ull);
    REQUIRE(r.next_u64() == 0x06c45d188009454full);
}

TEST_CASE("rng statistical sanity", "[rng]") {
    gsrm::Rng r(42);
    SECTION("next_double in [0,1) with plausible mean") {
        double acc = 0.0;
        for (int i = 0; i < 20000; ++i) {
            const double v = r.next_double();
            REQUIRE(v >= 0.0);
            REQUIRE(v < 1.0);
            acc += v;
        }
        REQUIRE(std::abs(acc / 20000 - 0.5) < 0.01);
    }
    SECTION("gaussian moments") {
        double s = 0.0, s2 = 0.0;
        const int n = 50000;
        for (int i = 0; i < n; ++i) {
            const double v = r.gaussian();
            s += v;
            s2 += v * v;
        }
        REQUIRE(std::abs(s / n) < 0.02);
        REQUIRE(std::abs(s2 / n - 1.0) < 0.03);
    }
    SECTION("next_below bounds and coverage") {
        std::set<std::uint64_t> seen;
        for (int i = 0; i < 1000; ++i) {
            const std::uint64_t v = r.next_below(7);
            REQUIRE(v < 7);
            seen.insert(v);
        }
        REQUIRE(seen.size() == 7);
    }
    SECTION("shuffle is a permutation and seed-stable") {
        std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
        gsrm::Rng a(9), b(9);
        auto va = v, vb = v;
        a.shuffle(va);
        b.shuffle(vb);
        REQUIRE(va == vb);
        auto sorted = va;
        std::sort(sorted.begin(), sorted.end());
        REQUIRE(sorted == v);
    }
    SECTION("mix and hash_bytes derive distinct stable streams") {
        REQUIRE(gsrm::Rng::mix(1, 0) != gsrm::Rng::mix(1, 1));
        REQUIRE(gsrm::Rng::mix(1, 0) == gsrm::Rng::mix(1, 0));
        REQUIRE(gsrm::Rng::hash_bytes("abc") != gsrm::Rng::hash_bytes("abd"));
        REQUIRE(gsrm::Rng::hash_bytes("abc", 1) != gsrm::Rng::hash_bytes("abc", 2));
    }
}

TEST_CASE("pairwise_sum matches extended-precision sum", "[stats]") {
    gsrm::Rng r(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x;
        const int n = 1 + int(r.next_below(300));
        for (int i = 0; i < n; ++i) x.push_back(r.uniform(-1e6, 1e6));
        long double s = 0.0L;
        for (double v : x) s += v;
        REQUIRE(gsrm::stats::pairwise_sum(x) == Catch::Approx(double(s)).margin(1e-6));
    }
    SECTION("identical addends sum exactly") {
        // K identical values must average back to the value bit-for-bit.
        const double v = 3.7;
        std::vector<double> x(16, v);
        REQUIRE(gsrm::stats::pairwise_sum(x) / 16.0 == v);
    }
}

TEST_CASE("quantile_type7 hand values", "[stats]") {
    // R: quantile(c(1,2,3,4), type=7, probs=...)
    std::vector<double> x{1, 2, 3, 4};
    REQUIRE(gsrm::stats::quantile_type7(x, 0.0) == 1.0);
    REQUIRE(gsrm::stats::quantile_type7(x, 1.0) == 4.0);
    REQUIRE(gsrm::stats::quantile_type7(x, 0.5) == Catch::Approx(2.5).margin(1e-12));
    REQUIRE(gsrm::stats::quantile_type7(x, 0.25) == Catch::Approx(1.75).margin(1e-12));
    REQUIRE(gsrm::stats::quantile_type7(x, 0.1) == Catch::Approx(1.3).margin(1e-12));
    std::vector<double> one{5.0};
    REQUIRE(gsrm::stats::quantile_type7(one, 0.33) == 5.0);
    // Order must not matter.
    std::vector<double> shuffled{4, 1, 3, 2};
    REQUIRE(gsrm::stats::quantile_type7(shuffled, 0.25) == Catch::Approx(1.75).margin(1e-12));
}

TEST_CASE("ols_slope on exact lines", "[stats]") {
    std::vector<double> t{0.0, 0.1, 0.2, 0.3};
    std::vector<double> y;
    for (double ti : t) y.push_back(3.0 - 12.5 * ti);
    REQUIRE(gsrm::stats::ols_slope(t, y) == Catch::Approx(-12.5).margin(1e-12));
    std::vector<double> flat{2.0, 2.0, 2.0};
    std::vector<double> t3{0.0, 1.0, 2.0};
    REQUIRE(gsrm::stats::ols_slope(t3, flat) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("correlation statistics match brute-force oracles", "[stats][eval]") {
    gsrm::Rng r(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + r.next_below(49);
        std::vector<double> x, y;
        for (std::size_t i = 0; i < n; ++i) {
            // Round half the trials to integers to force heavy rank ties.
            if (trial % 2 == 0) {
                x.push_back(double(int(r.next_below(5))));
                y.push_back(double(int(r.next_below(5))));
            } else {
                x.push_back(r.uniform(-10, 10));
                y.push_back(r.uniform(-10, 10));
            }
        }
        // Constant vectors are rejected by pearson; give them a nudge.
        const auto constant = [](const std::vector<double>& v) {
            for (double u : v)
                if (u != v[0]) return false;
            return true;
        };
        if (constant(x)) x[0] += 1.0;
        if (constant(y)) y[0] += 1.0;

        REQUIRE(gsrm::pearson(x, y) ==
                Catch::Approx(double(brute_pearson(x, y))).margin(1e-12));
        REQUIRE(gsrm::mse(x, y) == Catch::Approx(double(brute_mse(x, y))).margin(1e-12));

        const std::vector<double> rx = brute_ranks(x), ry = brute_ranks(y);
        if (!constant(rx) && !constant(ry))
            REQUIRE(gsrm::spearman(x, y) ==
                    Catch::Approx(double(brute_pearson(rx, ry))).margin(1e-12));
    }
}

TEST_CASE("correlation hand values", "[stats][eval]") {
    // Normal-equation oracle: centered dx.dy = 4, |dx||dy| = 5 -> 0.8. The
    // inputs are their own ranks, so spearman agrees.
    std::vector<double> x{1, 2, 3, 4};
    std::vector<double> y{1, 3, 2, 4};
    REQUIRE(gsrm::pearson(x, y) == 0.8);
    REQUIRE(gsrm::spearman(x, y) == 0.8);
    // (1 + 4) / 2.
    REQUIRE(gsrm::mse({1, 3}, {2, 5}) == 2.5);
}

TEST_CASE("average_ranks tie handling", "[stats][eval]") {
    std::vector<double> x{10, 20, 20, 30};
    const std::vector<double> r = gsrm::average_ranks(x);
    REQUIRE(r == std::vector<double>{1.0, 2.5, 2.5, 4.0});
    std::vector<double> all_same{7, 7, 7};
    REQUIRE(gsrm::average_ranks(all_same) == std::vector<double>{2.0, 2.0, 2.0});
}
