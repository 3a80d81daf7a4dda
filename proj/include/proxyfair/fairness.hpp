#ifndef PROXYFAIR_FAIRNESS_HPP
#define PROXYFAIR_FAIRNESS_HPP

#include "proxyfair/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * @file fairness.hpp
 *
 * @brief Group-fairness gaps, representation arithmetic and kernel density curves.
 *
 * Gaps generalise the two-group criteria to K groups as the largest
 * pairwise difference. Groups without the denominator a rate needs are
 * excluded and listed rather than counted as zero.
 */

namespace proxyfair {

struct GroupOutcome {
    std::string group;
    std::size_t size = 0;
    std::size_t with_prediction = 0;
    std::size_t positive_predictions = 0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::optional<double> selection_rate() const;
    std::optional<double> tpr() const;
    std::optional<double> fpr() const;
    std::optional<double> ppv() const;
};

using GroupedOutcomes = std::vector<GroupOutcome>;

/**
 * Tallies outcomes per group. `groups[i]` names the group of sample i and
 * `records[i]` its metadata (nullptr = unknown). Groups appear in order of
 * first occurrence.
 */
GroupedOutcomes group_outcomes(std::span<const std::string> groups, std::span<const MetadataRecord* const> records);

/// Outcomes grouped by proxy cluster label ("-1" for noise).
GroupedOutcomes group_outcomes(const ClusterAssignment& assignment, const MetadataTable& table);

/// Outcomes grouped by true gender; samples with unknown gender are skipped.
GroupedOutcomes group_outcomes_by_gender(std::span<const std::string> ids, const MetadataTable& table);

struct GapResult {
    /// Absent when fewer than two groups have the needed denominator.
    std::optional<double> value;
    std::vector<std::string> compared;
    /// Groups left out for lack of a denominator.
    std::vector<std::string> excluded;
};

/// max pairwise |P(pred=1 | a) - P(pred=1 | b)|.
GapResult demographic_parity_gap(const GroupedOutcomes& g);

struct EqualizedOddsGap {
    GapResult tpr;
    GapResult fpr;
};

EqualizedOddsGap equalized_odds_gap(const GroupedOutcomes& g);

/// max pairwise |PPV_a - PPV_b|.
GapResult predictive_parity_gap(const GroupedOutcomes& g);

/// |a - b|, for two attribute-value proportions.
double proportion_gap(double a, double b);

enum class Attribute { Gender };

struct Representation {
    std::size_t female = 0;
    std::size_t male = 0;
    std::size_t unknown = 0;
    std::optional<double> female_share;
    std::optional<double> male_share;
    std::optional<double> gap;
};

/// Gender split over the known records among `ids`.
Representation representation(const MetadataTable& table, std::span<const std::string> ids, Attribute attribute);

/// |share(F) - share(M)| over known records; absent when none are known.
std::optional<double> representation_gap(const MetadataTable& table, std::span<const std::string> ids,
                                         Attribute attribute);

/// gap_baseline - gap_method; both must lie in [0, 1].
double gap_improvement(double gap_baseline, double gap_method);

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0;
};

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR is
/// zero and to 1 when the values have no spread or there is a single value.
double silverman_bandwidth(std::span<const double> values);

/**
 * Gaussian kernel density on evenly spaced points spanning [min - 4h, max + 4h].
 * `grid_size` is a lower bound: the grid is refined until the spacing is at
 * most h.
 */
KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth = std::nullopt,
             std::size_t grid_size = 512);

/// Trapezoidal integral of the curve over its grid.
double integrate(const KdeCurve& curve);

} // namespace proxyfair

#endif
