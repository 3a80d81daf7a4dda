#include "doctest.h"

#include "../oracles.hpp"
#include "proxyfair/random.hpp"
#include "proxyfair/sampler.hpp"

#include <set>

using namespace proxyfair;

namespace {

ClusterAssignment make_assignment(const std::vector<std::size_t>& sizes, std::size_t noise = 0) {
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
            labels.push_back(static_cast<int>(c));
        }
    }
    for (std::size_t i = 0; i < noise; ++i) {
        ids.push_back("n" + std::to_string(i));
        labels.push_back(kNoise);
    }
    return ClusterAssignment(ids, labels);
}

} // namespace

TEST_SUITE("group-sampler") {

TEST_CASE("target total rounds half up") {
    CHECK(target_total(0.3, 1000) == 300);
    CHECK(target_total(0.3, 205) == 62);
    CHECK(target_total(0.5, 5) == 3);
    CHECK(target_total(0.5, 3) == 2);
    CHECK(target_total(0.3, 10000) == 3000);
    CHECK(target_total(1.0, 7) == 7);
}

TEST_CASE("ten equal clusters take thirty each") {
    const auto a = make_assignment(std::vector<std::size_t>(10, 100));
    const auto s = cluster_balanced_sample(a, {0.3, 1, false});
    CHECK(s.selected_ids.size() == 300);
    for (const auto& [c, take] : s.per_cluster_take) CHECK(take == 30);
    CHECK_FALSE(s.shortfall);
}

TEST_CASE("sizes 5,100,100 take 5,29,28") {
    const auto q = allocate_quotas({{0, 5}, {1, 100}, {2, 100}}, 62);
    REQUIRE(q.size() == 3);
    CHECK(q[0].take == 5);
    CHECK(q[1].take == 29);
    CHECK(q[2].take == 28);
    const auto a = make_assignment({5, 100, 100});
    const auto s = cluster_balanced_sample(a, {0.3, 9, false});
    CHECK(s.target_total == 62);
    CHECK(s.selected_ids.size() == 62);
    CHECK(s.per_cluster_take.at(0) == 5);
    CHECK(s.per_cluster_take.at(1) == 29);
    CHECK(s.per_cluster_take.at(2) == 28);
}

TEST_CASE("fraction one without noise selects everything") {
    const auto a = make_assignment({3, 8, 1, 20});
    const auto s = cluster_balanced_sample(a, {1.0, 4, false});
    CHECK(s.selected_ids == a.ids());
    CHECK(s.per_cluster_take.at(1) == 8);
    CHECK(s.per_cluster_take.at(3) == 20);
}

TEST_CASE("quotas match the round-robin simulator") {
    Rng rng(5);
    for (int t = 0; t < 300; ++t) {
        const auto k = 1 + uniform_below(rng, 25);
        std::vector<std::pair<int, std::size_t>> sizes;
        std::size_t total = 0;
        for (std::size_t c = 0; c < k; ++c) {
            sizes.emplace_back(static_cast<int>(c), 1 + uniform_below(rng, 200));
            total += sizes.back().second;
        }
        const double fraction = 0.01 + 0.99 * uniform01(rng);
        const auto target = target_total(fraction, total + uniform_below(rng, 100));
        const auto sim = oracle::round_robin_quotas(sizes, target);
        for (const auto& q : allocate_quotas(sizes, target)) CHECK(q.take == sim.at(q.cluster));
    }
}

TEST_CASE("selection invariants and substream determinism") {
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::size_t> sizes(1 + uniform_below(rng, 12));
        for (auto& s : sizes) s = 1 + uniform_below(rng, 80);
        const auto a = make_assignment(sizes, uniform_below(rng, 30));
        const SamplingPlan plan{0.05 + 0.95 * uniform01(rng), rng(), uniform01(rng) < 0.3};
        const auto s = cluster_balanced_sample(a, plan);
        const std::set<std::string> unique(s.selected_ids.begin(), s.selected_ids.end());
        CHECK(unique.size() == s.selected_ids.size());
        std::size_t sum = 0, capacity = 0;
        for (const auto& [c, take] : s.per_cluster_take) {
            sum += take;
            CHECK(take <= (c == kNoise ? a.noise_count() : a.members(c).size()));
        }
        for (std::size_t c = 0; c < sizes.size(); ++c) capacity += sizes[c];
        if (plan.include_noise) capacity += a.noise_count();
        CHECK(sum == s.selected_ids.size());
        CHECK(sum == std::min(s.target_total, capacity));
        CHECK(s.shortfall == (s.target_total > capacity));
        for (std::size_t i = 0; i < s.selected_ids.size(); ++i) {
            const auto& id = s.selected_ids[i];
            CHECK((s.selected_clusters[i] == kNoise) == (id[0] == 'n'));
        }
        const auto again = cluster_balanced_sample(a, plan);
        CHECK(again.selected_ids == s.selected_ids);
    }
}

TEST_CASE("equal-quota property when capacity allows") {
    Rng rng(7);
    int checked = 0;
    for (int t = 0; t < 500; ++t) {
        const auto k = 1 + uniform_below(rng, 20);
        std::vector<std::pair<int, std::size_t>> sizes;
        std::size_t total = 0;
        for (std::size_t c = 0; c < k; ++c) {
            sizes.emplace_back(static_cast<int>(c), 1 + uniform_below(rng, 300));
            total += sizes.back().second;
        }
        const auto target = target_total(uniform01(rng), total);
        const std::size_t quota = (target + k - 1) / k;
        const bool room = std::all_of(sizes.begin(), sizes.end(), [&](const auto& s) { return s.second >= quota; });
        if (!room) continue;
        ++checked;
        const auto q = allocate_quotas(sizes, target);
        const auto [lo, hi] = std::minmax_element(q.begin(), q.end(), [](const auto& a, const auto& b) { return a.take < b.take; });
        CHECK(hi->take - lo->take <= 1);
    }
    CHECK(checked > 50);
}

TEST_CASE("shortfall selects every clustered sample") {
    const auto a = make_assignment({4, 4}, 100);
    const auto s = cluster_balanced_sample(a, {0.5, 1, false});
    CHECK(s.target_total == 54);
    CHECK(s.shortfall);
    CHECK(s.selected_ids.size() == 8);
}

TEST_CASE("no clusters is an error") {
    const auto a = make_assignment({}, 10);
    CHECK_THROWS_AS(cluster_balanced_sample(a, {0.3, 1, false}), ParameterError);
    CHECK_NOTHROW(cluster_balanced_sample(a, {0.3, 1, true}));
    CHECK_THROWS_AS(cluster_balanced_sample(make_assignment({5}), {0.0, 1, false}), ParameterError);
    CHECK_THROWS_AS(cluster_balanced_sample(make_assignment({5}), {1.5, 1, false}), ParameterError);
}

TEST_CASE("random sampling") {
    std::vector<std::string> ids;
    for (int i = 0; i < 10000; ++i) ids.push_back("r" + std::to_string(i));
    const auto s = random_sample(ids, {0.3, 42, false});
    CHECK(s.selected_ids.size() == 3000);
    CHECK(random_sample(ids, {0.3, 42, false}).selected_ids == s.selected_ids);
    CHECK(random_sample(ids, {0.3, 43, false}).selected_ids != s.selected_ids);
    CHECK(random_sample(ids, {1.0, 42, false}).selected_ids == ids);
    const std::set<std::string> unique(s.selected_ids.begin(), s.selected_ids.end());
    CHECK(unique.size() == 3000);
}

TEST_CASE("balanced subset tracks the share of female-led clusters") {
    // 4 pure female clusters of 50, 16 pure male clusters of 300
    std::vector<std::size_t> sizes(4, 50);
    sizes.resize(20, 300);
    const auto a = make_assignment(sizes);
    double mean_share = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = cluster_balanced_sample(a, {0.3, seed, false});
        std::size_t female = 0;
        for (int c : s.selected_clusters) female += c < 4;
        mean_share += static_cast<double>(female) / static_cast<double>(s.selected_ids.size()) / 20;
    }
    // quotas: ceil(1500/20)=75 > 50, so the four small clusters give 200 of 1500
    CHECK(mean_share == doctest::Approx(200.0 / 1500.0));
}

}
