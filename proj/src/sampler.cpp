#include "proxyfair/sampler.hpp"

#include "proxyfair/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace proxyfair {

namespace {

constexpr std::uint64_t kRandomStream = 0xBA5E11E5ull;

} // namespace

void validate(const SamplingPlan& plan) {
    if (!(plan.fraction > 0 && plan.fraction <= 1)) {
        throw ParameterError("fraction", "must lie in (0, 1]");
    }
}

std::size_t target_total(double fraction, std::size_t n_total) {
    const double exact = fraction * static_cast<double>(n_total);
    const auto rounded = static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9));
    return std::min(rounded, n_total);
}

std::vector<QuotaEntry> allocate_quotas(std::vector<std::pair<int, std::size_t>> cluster_sizes, std::size_t target) {
    std::sort(cluster_sizes.begin(), cluster_sizes.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    std::vector<QuotaEntry> out;
    out.reserve(cluster_sizes.size());
    std::size_t remaining = target;
    std::size_t left = cluster_sizes.size();
    for (const auto& [cluster, size] : cluster_sizes) {
        const std::size_t quota = (remaining + left - 1) / left;
        const std::size_t take = std::min(size, quota);
        out.push_back({cluster, size, take});
        remaining -= take;
        --left;
    }
    return out;
}

SubsetSelection cluster_balanced_sample(const ClusterAssignment& assignment, const SamplingPlan& plan) {
    validate(plan);
    const auto& labels = assignment.labels();

    std::vector<std::vector<std::size_t>> members(assignment.cluster_count() + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[static_cast<std::size_t>(labels[i] + 1)].push_back(i);
    }
    std::vector<std::pair<int, std::size_t>> sizes;
    if (plan.include_noise && !members[0].empty()) {
        sizes.emplace_back(kNoise, members[0].size());
    }
    for (std::size_t k = 0; k < assignment.cluster_count(); ++k) {
        sizes.emplace_back(static_cast<int>(k), members[k + 1].size());
    }
    if (sizes.empty()) {
        throw ParameterError("assignment", "no clusters to sample from");
    }

    SubsetSelection out;
    out.seed = plan.seed;
    out.fraction = plan.fraction;
    out.target_total = target_total(plan.fraction, assignment.size());
    std::size_t capacity = 0;
    for (const auto& s : sizes) {
        capacity += s.second;
    }
    out.shortfall = out.target_total > capacity;

    std::vector<bool> chosen(labels.size(), false);
    for (const auto& q : allocate_quotas(sizes, out.target_total)) {
        out.per_cluster_take[q.cluster] = q.take;
        auto pool = members[static_cast<std::size_t>(q.cluster + 1)];
        Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(q.cluster))));
        partial_shuffle(std::span<std::size_t>(pool), q.take, rng);
        for (std::size_t t = 0; t < q.take; ++t) {
            chosen[pool[t]] = true;
        }
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (chosen[i]) {
            out.selected_ids.push_back(assignment.ids()[i]);
            out.selected_clusters.push_back(labels[i]);
        }
    }
    return out;
}

SubsetSelection random_sample(std::span<const std::string> ids, const SamplingPlan& plan, std::span<const int> clusters) {
    validate(plan);
    if (!clusters.empty() && clusters.size() != ids.size()) {
        throw ParameterError("clusters", "must parallel ids");
    }
    SubsetSelection out;
    out.seed = plan.seed;
    out.fraction = plan.fraction;
    out.target_total = target_total(plan.fraction, ids.size());

    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(plan.seed, kRandomStream));
    partial_shuffle(std::span<std::size_t>(order), out.target_total, rng);
    order.resize(out.target_total);
    std::sort(order.begin(), order.end());
    for (auto i : order) {
        out.selected_ids.push_back(ids[i]);
        if (!clusters.empty()) {
            out.selected_clusters.push_back(clusters[i]);
            ++out.per_cluster_take[clusters[i]];
        }
    }
    return out;
}

} // namespace proxyfair
