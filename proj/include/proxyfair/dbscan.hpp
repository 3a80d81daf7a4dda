#ifndef PROXYFAIR_DBSCAN_HPP
#define PROXYFAIR_DBSCAN_HPP

#include "proxyfair/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace proxyfair {

/**
 * DBSCAN on the plane. A point is core when at least `min_samples` points,
 * itself included, lie within distance eps (inclusive). Clusters are numbered
 * in the input order of their first core point; a border point reachable
 * from several clusters joins the lowest-numbered one.
 *
 * Fixed-radius queries use a uniform grid with cell width eps.
 */
std::vector<int> dbscan_labels(std::span<const Point2> points, const ClusterParams& params);

ClusterAssignment dbscan(const ReducedCoordinates& coords, const ClusterParams& params);

/// Core flags under the same neighbourhood definition as dbscan().
std::vector<bool> core_points(std::span<const Point2> points, const ClusterParams& params);

struct TuneEntry {
    double eps = 0;
    std::size_t min_samples = 0;
    std::size_t clusters = 0;
    std::size_t noise = 0;
};

struct TuneResult {
    /// One row per (eps, min_samples) pair, eps-major in grid order.
    std::vector<TuneEntry> entries;
    /// Index into entries; unset when no entry lands in [k_min, k_max].
    std::optional<std::size_t> chosen;

    bool feasible() const noexcept { return chosen.has_value(); }
};

/**
 * Grid search for DBSCAN parameters whose cluster count lies in
 * [k_min, k_max], preferring the fewest noise points, then larger eps, then
 * larger min_samples.
 */
TuneResult tune_dbscan(const ReducedCoordinates& coords, std::span<const double> eps_grid,
                       std::span<const std::size_t> min_samples_grid, std::size_t k_min, std::size_t k_max,
                       unsigned threads = 1);

inline constexpr std::size_t kDefaultAgeBins[] = {0, 15, 30, 45, 60, 75, 90};

struct ClusterComposition {
    int cluster = kNoise;
    std::size_t size = 0;
    std::size_t female = 0;
    std::size_t male = 0;
    std::size_t missing_gender = 0;
    std::size_t missing_age = 0;
    /// Absent when the cluster has no member with a known gender.
    std::optional<double> female_share;
    std::optional<double> male_share;
    /// Counts per age bin; bin b is [edges[b], edges[b+1]) and the last bin is open-ended.
    std::vector<std::size_t> age_histogram;
};

/// Age-bin labels such as "0-15" and "90+".
std::vector<std::string> age_bin_labels(std::span<const std::size_t> edges);

/**
 * Per-cluster size, gender split over known-gender members and age histogram.
 * Noise (-1) comes first when present, then clusters 0..K-1. Samples without
 * a metadata record count as missing for every attribute.
 */
std::vector<ClusterComposition> cluster_composition(const ClusterAssignment& assignment, const MetadataTable& table,
                                                    std::span<const std::size_t> age_edges = kDefaultAgeBins);

} // namespace proxyfair

#endif
