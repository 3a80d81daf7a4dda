#include "proxyfair/dbscan.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_map>

namespace proxyfair {

namespace {

struct CellKey {
    std::int64_t x;
    std::int64_t y;
    bool operator==(const CellKey&) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        return static_cast<std::size_t>(static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull ^
                                        (static_cast<std::uint64_t>(k.y) + 0x632BE59BD9B4E019ull));
    }
};

/// Uniform grid for fixed-radius queries. Cells are slightly wider than eps
/// so two points within eps never sit more than one cell apart.
class Grid {
public:
    Grid(std::span<const Point2> points, double eps) : points_(points), eps2_(eps * eps) {
        if (points.empty()) {
            return;
        }
        width_ = eps * (1 + 1e-9);
        min_x_ = points[0].x;
        min_y_ = points[0].y;
        for (const auto& p : points) {
            min_x_ = std::min(min_x_, p.x);
            min_y_ = std::min(min_y_, p.y);
        }
        std::vector<CellKey> keys(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            keys[i] = cell_of(points[i]);
        }
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), 0u);
        std::stable_sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
            return keys[a].x != keys[b].x ? keys[a].x < keys[b].x : keys[a].y < keys[b].y;
        });
        for (std::size_t k = 0; k < order_.size();) {
            std::size_t e = k;
            const auto key = keys[order_[k]];
            while (e < order_.size() && keys[order_[e]] == key) {
                ++e;
            }
            cells_.emplace(key, std::make_pair(k, e));
            k = e;
        }
    }

    template <typename Fn>
    void for_each_neighbour(std::size_t i, Fn&& fn) const {
        const auto& p = points_[i];
        const auto c = cell_of(p);
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = cells_.find({c.x + dx, c.y + dy});
                if (it == cells_.end()) {
                    continue;
                }
                for (auto k = it->second.first; k < it->second.second; ++k) {
                    const auto j = order_[k];
                    const double ddx = p.x - points_[j].x;
                    const double ddy = p.y - points_[j].y;
                    if (ddx * ddx + ddy * ddy <= eps2_) {
                        fn(static_cast<std::size_t>(j));
                    }
                }
            }
        }
    }

private:
    CellKey cell_of(const Point2& p) const {
        constexpr double kLimit = 4e18;
        return {static_cast<std::int64_t>(std::min(std::floor((p.x - min_x_) / width_), kLimit)),
                static_cast<std::int64_t>(std::min(std::floor((p.y - min_y_) / width_), kLimit))};
    }

    std::span<const Point2> points_;
    double eps2_;
    double width_ = 1;
    double min_x_ = 0, min_y_ = 0;
    std::vector<std::uint32_t> order_;
    std::unordered_map<CellKey, std::pair<std::size_t, std::size_t>, CellHash> cells_;
};

std::vector<bool> core_flags(const Grid& grid, std::size_t n, std::size_t min_samples) {
    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        grid.for_each_neighbour(i, [&](std::size_t) { ++count; });
        core[i] = count >= min_samples;
    }
    return core;
}

} // namespace

std::vector<bool> core_points(std::span<const Point2> points, const ClusterParams& params) {
    validate(params);
    Grid grid(points, params.eps);
    return core_flags(grid, points.size(), params.min_samples);
}

std::vector<int> dbscan_labels(std::span<const Point2> points, const ClusterParams& params) {
    validate(params);
    const std::size_t n = points.size();
    std::vector<int> labels(n, kNoise);
    if (n == 0) {
        return labels;
    }
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ParameterError("coords", "coordinates must be finite");
        }
    }
    Grid grid(points, params.eps);
    const auto core = core_flags(grid, n, params.min_samples);

    int next = 0;
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || labels[i] != kNoise) {
            continue;
        }
        const int cluster = next++;
        labels[i] = cluster;
        queue.push_back(i);
        while (!queue.empty()) {
            const auto p = queue.front();
            queue.pop_front();
            grid.for_each_neighbour(p, [&](std::size_t q) {
                if (labels[q] == kNoise) {
                    labels[q] = cluster;
                    if (core[q]) {
                        queue.push_back(q);
                    }
                }
            });
        }
    }
    return labels;
}

ClusterAssignment dbscan(const ReducedCoordinates& coords, const ClusterParams& params) {
    return ClusterAssignment(coords.ids(), dbscan_labels(coords.coords(), params), params);
}

TuneResult tune_dbscan(const ReducedCoordinates& coords, std::span<const double> eps_grid,
                       std::span<const std::size_t> min_samples_grid, std::size_t k_min, std::size_t k_max,
                       unsigned threads) {
    if (eps_grid.empty()) {
        throw ParameterError("eps_grid", "must not be empty");
    }
    if (min_samples_grid.empty()) {
        throw ParameterError("min_samples_grid", "must not be empty");
    }
    if (k_min > k_max) {
        throw ParameterError("k_min", "must not exceed k_max");
    }
    TuneResult result;
    for (double eps : eps_grid) {
        for (auto ms : min_samples_grid) {
            validate(ClusterParams{eps, ms});
            result.entries.push_back({eps, ms, 0, 0});
        }
    }
    detail::parallel_for(result.entries.size(), threads, [&](std::size_t b, std::size_t e) {
        for (auto k = b; k < e; ++k) {
            auto& entry = result.entries[k];
            const auto labels = dbscan_labels(coords.coords(), {entry.eps, entry.min_samples});
            entry.clusters =
                labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
            entry.noise = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
        }
    });
    for (std::size_t k = 0; k < result.entries.size(); ++k) {
        const auto& e = result.entries[k];
        if (e.clusters < k_min || e.clusters > k_max) {
            continue;
        }
        if (!result.chosen) {
            result.chosen = k;
            continue;
        }
        const auto& best = result.entries[*result.chosen];
        const bool better = e.noise != best.noise         ? e.noise < best.noise
                            : e.eps != best.eps           ? e.eps > best.eps
                                                          : e.min_samples > best.min_samples;
        if (better) {
            result.chosen = k;
        }
    }
    return result;
}

std::vector<std::string> age_bin_labels(std::span<const std::size_t> edges) {
    std::vector<std::string> out;
    for (std::size_t b = 0; b < edges.size(); ++b) {
        out.push_back(b + 1 < edges.size() ? std::to_string(edges[b]) + "-" + std::to_string(edges[b + 1])
                                           : std::to_string(edges[b]) + "+");
    }
    return out;
}

std::vector<ClusterComposition> cluster_composition(const ClusterAssignment& assignment, const MetadataTable& table,
                                                    std::span<const std::size_t> age_edges) {
    if (age_edges.empty() || age_edges.front() != 0 ||
        std::adjacent_find(age_edges.begin(), age_edges.end(), std::greater_equal<>()) != age_edges.end()) {
        throw ParameterError("age_bins", "edges must start at 0 and be strictly increasing");
    }
    const auto view = join(assignment.ids(), table);
    const bool has_noise = assignment.noise_count() > 0;
    const std::size_t k = assignment.cluster_count();
    std::vector<ClusterComposition> out(k + (has_noise ? 1 : 0));
    auto slot = [&](int label) -> ClusterComposition& {
        return out[static_cast<std::size_t>(label + (has_noise ? 1 : 0))];
    };
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c].cluster = static_cast<int>(c) - (has_noise ? 1 : 0);
        out[c].age_histogram.assign(age_edges.size(), 0);
    }
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        auto& comp = slot(assignment.labels()[i]);
        ++comp.size;
        const auto* rec = view.rows[i];
        if (rec == nullptr || !rec->gender) {
            ++comp.missing_gender;
        } else if (*rec->gender == Gender::Female) {
            ++comp.female;
        } else {
            ++comp.male;
        }
        if (rec == nullptr || !rec->age) {
            ++comp.missing_age;
        } else {
            const auto age = static_cast<std::size_t>(*rec->age);
            const auto bin = std::upper_bound(age_edges.begin(), age_edges.end(), age) - age_edges.begin() - 1;
            ++comp.age_histogram[static_cast<std::size_t>(bin)];
        }
    }
    for (auto& comp : out) {
        const auto known = comp.female + comp.male;
        if (known > 0) {
            comp.female_share = static_cast<double>(comp.female) / static_cast<double>(known);
            comp.male_share = static_cast<double>(comp.male) / static_cast<double>(known);
        }
    }
    return out;
}

} // namespace proxyfair
