#include "doctest.h"

#include "../oracles.hpp"
#include "proxyfair/dbscan.hpp"
#include "proxyfair/random.hpp"

#include <numeric>

using namespace proxyfair;

namespace {

std::vector<Point2> uniform_points(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Point2> pts(n);
    for (auto& p : pts) p = {uniform01(rng), uniform01(rng)};
    return pts;
}

ReducedCoordinates as_coords(const std::vector<Point2>& pts) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < pts.size(); ++i) ids.push_back("c" + std::to_string(i));
    return ReducedCoordinates(ids, pts);
}

std::vector<Point2> blobs(std::size_t k, std::size_t per, double spread, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Point2> pts;
    for (std::size_t c = 0; c < k; ++c) {
        const double cx = 10.0 * static_cast<double>(c % 5), cy = 10.0 * static_cast<double>(c / 5);
        for (std::size_t i = 0; i < per; ++i) {
            pts.push_back({cx + spread * standard_normal(rng), cy + spread * standard_normal(rng)});
        }
    }
    return pts;
}

} // namespace

TEST_SUITE("density-cluster") {

TEST_CASE("empty input gives no clusters") {
    const auto labels = dbscan_labels({}, {0.5, 3});
    CHECK(labels.empty());
}

TEST_CASE("min_samples points within eps form one cluster") {
    const std::vector<Point2> pts{{0, 0}, {0.1, 0}, {0, 0.1}, {0.05, 0.05}};
    const auto labels = dbscan_labels(pts, {0.2, 4});
    CHECK(labels == std::vector<int>{0, 0, 0, 0});
    // distance exactly eps is inside
    const std::vector<Point2> edge{{0, 0}, {1, 0}};
    CHECK(dbscan_labels(edge, {1.0, 2}) == std::vector<int>{0, 0});
    CHECK(dbscan_labels(edge, {0.999, 2}) == std::vector<int>{-1, -1});
}

TEST_CASE("500 uniform points match the quadratic oracle") {
    const auto pts = uniform_points(500, 11);
    const auto got = dbscan_labels(pts, {0.05, 5});
    const auto want = oracle::dbscan(pts, 0.05, 5);
    CHECK(got == want);
}

TEST_CASE("random instances match the oracle including border ownership") {
    Rng rng(12);
    for (int t = 0; t < 40; ++t) {
        const auto n = 1 + uniform_below(rng, 300);
        const auto pts = uniform_points(n, 100 + t);
        const double eps = 0.01 + 0.15 * uniform01(rng);
        const auto ms = 1 + uniform_below(rng, 10);
        CHECK(dbscan_labels(pts, {eps, ms}) == oracle::dbscan(pts, eps, ms));
        CHECK(core_points(pts, {eps, ms}) == oracle::core(pts, eps, ms));
    }
}

TEST_CASE("labels are numbered by first core point in input order") {
    const std::vector<Point2> pts{{10, 10}, {0, 0}, {0, 0.1}, {10, 10.1}, {50, 50}};
    const auto labels = dbscan_labels(pts, {0.5, 2});
    CHECK(labels == std::vector<int>{0, 1, 1, 0, -1});
}

TEST_CASE("shared border point goes to the first cluster to claim it") {
    // cores at both ends, a border point in between within eps of both
    const std::vector<Point2> pts{{0, 0}, {-0.5, 0}, {-0.5, 0.1}, {1.8, 0}, {2.3, 0}, {2.3, 0.1}, {0.9, 0}};
    const auto labels = dbscan_labels(pts, {0.95, 4});
    CHECK(labels[6] == labels[0]);
    CHECK(labels[3] != labels[0]);
}

TEST_CASE("shuffling preserves the core partition and noise set") {
    Rng rng(13);
    for (int t = 0; t < 20; ++t) {
        const auto pts = uniform_points(250, 200 + t);
        const ClusterParams params{0.04 + 0.06 * uniform01(rng), 2 + uniform_below(rng, 6)};
        const auto base = dbscan_labels(pts, params);
        const auto cores = core_points(pts, params);

        std::vector<std::size_t> perm(pts.size());
        std::iota(perm.begin(), perm.end(), 0);
        partial_shuffle(std::span(perm), perm.size(), rng);
        std::vector<Point2> shuffled(pts.size());
        for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = pts[perm[i]];
        const auto s = dbscan_labels(shuffled, params);
        std::vector<int> back(pts.size());
        for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = s[i];

        std::vector<bool> mask(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) mask[i] = cores[i] || base[i] == -1;
        CHECK(oracle::same_partition(base, back, mask));

        // border points attach to a cluster owning a core point within eps
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (cores[i] || back[i] == -1) continue;
            bool adjacent = false;
            for (std::size_t j = 0; j < pts.size(); ++j) {
                if (cores[j] && back[j] == back[i] &&
                    std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) <= params.eps) {
                    adjacent = true;
                }
            }
            CHECK(adjacent);
        }
    }
}

TEST_CASE("enlarging eps never adds noise") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto pts = uniform_points(300, seed);
        std::size_t prev = pts.size() + 1;
        for (double eps = 0.005; eps < 0.3; eps *= 1.3) {
            const auto labels = dbscan_labels(pts, {eps, 4});
            const auto noise = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
            CHECK(noise <= prev);
            prev = noise;
        }
    }
}

TEST_CASE("every member is within eps of a core point of its cluster") {
    const auto pts = blobs(6, 60, 1.0, 5);
    const ClusterParams params{0.8, 5};
    const auto labels = dbscan_labels(pts, params);
    const auto cores = core_points(pts, params);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (labels[i] < 0) continue;
        bool ok = false;
        for (std::size_t j = 0; j < pts.size() && !ok; ++j) {
            ok = cores[j] && labels[j] == labels[i] && std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) <= params.eps;
        }
        CHECK(ok);
    }
}

TEST_CASE("tiny and huge eps do not break the grid") {
    const auto pts = uniform_points(50, 3);
    const auto tiny = dbscan_labels(pts, {1e-300, 2});
    CHECK(std::count(tiny.begin(), tiny.end(), -1) == 50);
    const auto huge = dbscan_labels(pts, {1e300, 2});
    CHECK(std::count(huge.begin(), huge.end(), 0) == 50);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(validate(ClusterParams{0, 3}), ParameterError);
    CHECK_THROWS_AS(validate(ClusterParams{-1, 3}), ParameterError);
    CHECK_THROWS_AS(validate(ClusterParams{1, 0}), ParameterError);
    CHECK_NOTHROW(validate(ClusterParams{1, 1}));
}

TEST_CASE("single in-band grid point is chosen") {
    const auto coords = as_coords(blobs(3, 40, 0.5, 8));
    const std::vector<double> eps{1.0};
    const std::vector<std::size_t> ms{5};
    const auto r = tune_dbscan(coords, eps, ms, 3, 3);
    REQUIRE(r.feasible());
    CHECK(*r.chosen == 0);
    CHECK(r.entries.size() == 1);
}

TEST_CASE("tuning a 20-blob dataset picks the minimal in-band noise") {
    const auto pts = blobs(20, 50, 0.6, 9);
    const auto coords = as_coords(pts);
    const std::vector<double> eps{0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4};
    const std::vector<std::size_t> ms{3, 5, 10, 20, 40};
    const auto r = tune_dbscan(coords, eps, ms, 15, 25);
    REQUIRE(r.feasible());
    CHECK(r.entries.size() == eps.size() * ms.size());
    const auto& best = r.entries[*r.chosen];
    CHECK(best.clusters >= 15);
    CHECK(best.clusters <= 25);

    std::optional<std::size_t> min_noise;
    for (double e : eps) {
        for (auto m : ms) {
            const auto labels = oracle::dbscan(pts, e, m);
            const auto k = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
            const auto noise = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
            if (k >= 15 && k <= 25 && (!min_noise || noise < *min_noise)) min_noise = noise;
        }
    }
    CHECK(best.noise == *min_noise);
}

TEST_CASE("tie on noise prefers larger eps then larger min_samples") {
    const auto coords = as_coords(blobs(2, 30, 0.2, 4));
    const std::vector<double> eps{2.0, 3.0};
    const std::vector<std::size_t> ms{2, 3};
    const auto r = tune_dbscan(coords, eps, ms, 2, 2);
    REQUIRE(r.feasible());
    CHECK(r.entries[*r.chosen].eps == 3.0);
    CHECK(r.entries[*r.chosen].min_samples == 3);
}

TEST_CASE("all-noise grid is infeasible and keeps its table") {
    const auto coords = as_coords(uniform_points(100, 6));
    const std::vector<double> eps{1e-6, 2e-6};
    const std::vector<std::size_t> ms{3};
    const auto r = tune_dbscan(coords, eps, ms, 15, 25);
    CHECK_FALSE(r.feasible());
    REQUIRE(r.entries.size() == 2);
    for (const auto& e : r.entries) {
        CHECK(e.clusters == 0);
        CHECK(e.noise == 100);
    }
    CHECK_THROWS_AS(tune_dbscan(coords, std::vector<double>{}, ms, 1, 2), ParameterError);
    CHECK_THROWS_AS(tune_dbscan(coords, eps, ms, 5, 2), ParameterError);
}

TEST_CASE("cluster composition counts") {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<MetadataRecord> recs;
    for (int i = 0; i < 100; ++i) {
        ids.push_back("a" + std::to_string(i));
        labels.push_back(0);
        MetadataRecord r;
        r.gender = i < 2 ? Gender::Female : Gender::Male;
        r.age = i;
        recs.push_back(r);
    }
    for (int i = 0; i < 5; ++i) {
        ids.push_back("n" + std::to_string(i));
        labels.push_back(-1);
        recs.push_back({});
    }
    const ClusterAssignment a(ids, labels);
    const MetadataTable t(ids, recs, {true, true, false, false, false});
    const auto comp = cluster_composition(a, t);
    REQUIRE(comp.size() == 2);
    CHECK(comp[0].cluster == -1);
    CHECK(comp[0].size == 5);
    CHECK_FALSE(comp[0].female_share.has_value());
    CHECK(comp[0].missing_gender == 5);
    CHECK(comp[1].cluster == 0);
    CHECK(*comp[1].female_share == doctest::Approx(0.02));
    CHECK(*comp[1].male_share == doctest::Approx(0.98));
    // ages 0..99 over bins 0-15,15-30,30-45,45-60,60-75,75-90,90+
    CHECK(comp[1].age_histogram == std::vector<std::size_t>{15, 15, 15, 15, 15, 15, 10});
    CHECK(age_bin_labels(kDefaultAgeBins) ==
          std::vector<std::string>{"0-15", "15-30", "30-45", "45-60", "60-75", "75-90", "90+"});
}

}
