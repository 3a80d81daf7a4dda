#include "proxyfair/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace proxyfair {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) {
        return std::nullopt;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

template <typename Rate>
GapResult max_pairwise_gap(const GroupedOutcomes& g, Rate rate) {
    GapResult out;
    double lo = 0, hi = 0;
    for (const auto& group : g) {
        const auto r = rate(group);
        if (!r) {
            out.excluded.push_back(group.group);
            continue;
        }
        if (out.compared.empty()) {
            lo = hi = *r;
        } else {
            lo = std::min(lo, *r);
            hi = std::max(hi, *r);
        }
        out.compared.push_back(group.group);
    }
    if (out.compared.size() >= 2) {
        out.value = hi - lo;
    }
    return out;
}

} // namespace

std::optional<double> GroupOutcome::selection_rate() const {
    return ratio(positive_predictions, with_prediction);
}
std::optional<double> GroupOutcome::tpr() const {
    return ratio(tp, tp + fn);
}
std::optional<double> GroupOutcome::fpr() const {
    return ratio(fp, fp + tn);
}
std::optional<double> GroupOutcome::ppv() const {
    return ratio(tp, tp + fp);
}

GroupedOutcomes group_outcomes(std::span<const std::string> groups, std::span<const MetadataRecord* const> records) {
    if (groups.size() != records.size()) {
        throw ParameterError("groups", "must parallel records");
    }
    GroupedOutcomes out;
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto [it, fresh] = slot.try_emplace(groups[i], out.size());
        if (fresh) {
            out.push_back({groups[i]});
        }
        auto& g = out[it->second];
        ++g.size;
        const auto* rec = records[i];
        if (rec == nullptr || !rec->prediction) {
            continue;
        }
        ++g.with_prediction;
        const bool predicted = *rec->prediction == 1;
        g.positive_predictions += predicted;
        if (rec->label) {
            const bool actual = *rec->label == 1;
            if (actual) {
                ++(predicted ? g.tp : g.fn);
            } else {
                ++(predicted ? g.fp : g.tn);
            }
        }
    }
    return out;
}

GroupedOutcomes group_outcomes(const ClusterAssignment& assignment, const MetadataTable& table) {
    std::vector<std::string> groups;
    groups.reserve(assignment.size());
    for (int l : assignment.labels()) {
        groups.push_back(std::to_string(l));
    }
    const auto view = join(assignment.ids(), table);
    auto out = group_outcomes(groups, view.rows);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return std::stoi(a.group) < std::stoi(b.group); });
    return out;
}

GroupedOutcomes group_outcomes_by_gender(std::span<const std::string> ids, const MetadataTable& table) {
    std::vector<std::string> groups;
    std::vector<const MetadataRecord*> records;
    for (const auto& id : ids) {
        const auto* rec = table.find(id);
        if (rec != nullptr && rec->gender) {
            groups.emplace_back(to_string(*rec->gender));
            records.push_back(rec);
        }
    }
    auto out = group_outcomes(groups, records);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.group < b.group; });
    return out;
}

GapResult demographic_parity_gap(const GroupedOutcomes& g) {
    return max_pairwise_gap(g, [](const GroupOutcome& o) { return o.selection_rate(); });
}

EqualizedOddsGap equalized_odds_gap(const GroupedOutcomes& g) {
    return {max_pairwise_gap(g, [](const GroupOutcome& o) { return o.tpr(); }),
            max_pairwise_gap(g, [](const GroupOutcome& o) { return o.fpr(); })};
}

GapResult predictive_parity_gap(const GroupedOutcomes& g) {
    return max_pairwise_gap(g, [](const GroupOutcome& o) { return o.ppv(); });
}

double proportion_gap(double a, double b) {
    return std::abs(a - b);
}

Representation representation(const MetadataTable& table, std::span<const std::string> ids, Attribute) {
    Representation r;
    for (const auto& id : ids) {
        const auto* rec = table.find(id);
        if (rec == nullptr || !rec->gender) {
            ++r.unknown;
        } else if (*rec->gender == Gender::Female) {
            ++r.female;
        } else {
            ++r.male;
        }
    }
    const auto known = r.female + r.male;
    if (known > 0) {
        r.female_share = static_cast<double>(r.female) / static_cast<double>(known);
        r.male_share = static_cast<double>(r.male) / static_cast<double>(known);
        r.gap = proportion_gap(*r.female_share, *r.male_share);
    }
    return r;
}

std::optional<double> representation_gap(const MetadataTable& table, std::span<const std::string> ids,
                                         Attribute attribute) {
    return representation(table, ids, attribute).gap;
}

double gap_improvement(double gap_baseline, double gap_method) {
    if (!(gap_baseline >= 0 && gap_baseline <= 1)) {
        throw ParameterError("gap_baseline", "must lie in [0, 1]");
    }
    if (!(gap_method >= 0 && gap_method <= 1)) {
        throw ParameterError("gap_method", "must lie in [0, 1]");
    }
    return gap_baseline - gap_method;
}

double silverman_bandwidth(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) {
        return 1.0;
    }
    double mean = 0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double ss = 0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double h = q * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, n - 1);
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);

    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0)) {
        spread = sd;
    }
    if (!(spread > 0)) {
        return 1.0;
    }
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth, std::size_t grid_size) {
    if (values.empty()) {
        throw ParameterError("values", "KDE needs at least one value");
    }
    if (grid_size < 2) {
        throw ParameterError("grid_size", "must be >= 2");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ParameterError("values", "must be finite");
        }
    }
    if (bandwidth && (!(*bandwidth > 0) || !std::isfinite(*bandwidth))) {
        throw ParameterError("bandwidth", "must be a finite value > 0");
    }
    KdeCurve curve;
    curve.bandwidth = bandwidth.value_or(silverman_bandwidth(values));
    const double h = curve.bandwidth;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn - 4 * h;
    const double hi = *mx + 4 * h;
    // spacing above h would let the trapezoid rule drift from unit mass
    grid_size = std::max(grid_size, static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1);
    const double step = (hi - lo) / static_cast<double>(grid_size - 1);
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2 * std::numbers::pi));
    curve.grid.resize(grid_size);
    curve.density.resize(grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double x = g + 1 == grid_size ? hi : lo + step * static_cast<double>(g);
        double s = 0;
        for (double v : values) {
            const double u = (x - v) / h;
            s += std::exp(-0.5 * u * u);
        }
        curve.grid[g] = x;
        curve.density[g] = s * norm;
    }
    return curve;
}

double integrate(const KdeCurve& curve) {
    double total = 0;
    for (std::size_t g = 1; g < curve.grid.size(); ++g) {
        total += 0.5 * (curve.density[g] + curve.density[g - 1]) * (curve.grid[g] - curve.grid[g - 1]);
    }
    return total;
}

} // namespace proxyfair
