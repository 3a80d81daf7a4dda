#ifndef PROXYFAIR_SAMPLER_HPP
#define PROXYFAIR_SAMPLER_HPP

#include "proxyfair/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace proxyfair {

struct SamplingPlan {
    double fraction = 0.3;
    std::uint64_t seed = 0;
    /// Treat noise (-1) as one more cluster in balanced sampling.
    bool include_noise = false;
};

/// Throws ParameterError unless fraction lies in (0, 1].
void validate(const SamplingPlan& plan);

/// round-half-up(fraction * n_total); the product is nudged by 1e-9 so decimal
/// fractions such as 0.3 * 205 round as written.
std::size_t target_total(double fraction, std::size_t n_total);

/// One cluster's share of a balanced draw.
struct QuotaEntry {
    int cluster = 0;
    std::size_t size = 0;
    std::size_t take = 0;
};

/**
 * Waterfall allocation: clusters sorted by size ascending (ties by cluster
 * id), each takes min(size, ceil(remaining_target / remaining_clusters)).
 * Returned in processing order.
 */
std::vector<QuotaEntry> allocate_quotas(std::vector<std::pair<int, std::size_t>> cluster_sizes, std::size_t target);

/**
 * Equal-quota subset over proxy clusters. target_total counts every sample
 * in the assignment, noise included. Members are drawn without replacement
 * from a per-cluster substream of the seed, so the result does not depend on
 * processing order. Selected ids are listed in assignment order.
 */
SubsetSelection cluster_balanced_sample(const ClusterAssignment& assignment, const SamplingPlan& plan);

/**
 * Uniform draw of target_total ids without replacement. When `clusters` is
 * non-empty it must parallel `ids` and is carried into the selection.
 */
SubsetSelection random_sample(std::span<const std::string> ids, const SamplingPlan& plan,
                              std::span<const int> clusters = {});

} // namespace proxyfair

#endif
