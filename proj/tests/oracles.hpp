// Reference implementations used by the unit tests and the acceptance suite.
// Each one is written from the textbook definition and shares no code with
// the library beyond its value types.
#ifndef PROXYFAIR_TESTS_ORACLES_HPP
#define PROXYFAIR_TESTS_ORACLES_HPP

#include "proxyfair/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

struct Conditional {
    double sigma = 0;
    std::vector<double> p;
    double entropy = 0;
};

inline Conditional gaussian_conditional(const std::vector<double>& d, double sigma) {
    Conditional c;
    c.sigma = sigma;
    c.p.assign(d.size(), 0.0);
    // shift by the smallest positive distance for stability
    double dmin = INFINITY;
    for (double x : d) {
        if (x > 0) dmin = std::min(dmin, x);
    }
    double z = 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[j] > 0) {
            c.p[j] = std::exp(-(d[j] * d[j] - dmin * dmin) / (2 * sigma * sigma));
            z += c.p[j];
        }
    }
    for (auto& v : c.p) v /= z;
    for (double v : c.p) {
        if (v > 0) c.entropy -= v * std::log(v);
    }
    return c;
}

// Plain bisection on log(sigma) over a fixed wide bracket.
inline Conditional bisect_sigma(const std::vector<double>& d, double perplexity) {
    const double target = std::log(perplexity);
    double lo = std::log(1e-20), hi = std::log(1e20);
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (gaussian_conditional(d, std::exp(mid)).entropy < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return gaussian_conditional(d, std::exp(0.5 * (lo + hi)));
}

inline double euclid(const double* a, const double* b, std::size_t dim) {
    double s = 0;
    for (std::size_t k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

// Dense symmetric joint affinities, row-major n x n.
inline std::vector<double> dense_affinities(const std::vector<double>& x, std::size_t n, std::size_t dim,
                                            double perplexity) {
    std::vector<double> cond(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.push_back(euclid(&x[i * dim], &x[j * dim], dim));
        }
        const auto c = bisect_sigma(d, perplexity);
        std::size_t k = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) cond[i * n + j] = c.p[k++];
        }
    }
    std::vector<double> p(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n);
    }
    return p;
}

inline std::vector<double> student_q(const std::vector<proxyfair::Point2>& y) {
    const std::size_t n = y.size();
    std::vector<double> q(n * n, 0.0);
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[i].x - y[j].x, dy = y[i].y - y[j].y;
            q[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
            z += q[i * n + j];
        }
    }
    for (auto& v : q) v /= z;
    return q;
}

inline double kl(const std::vector<double>& p, const std::vector<proxyfair::Point2>& y) {
    const auto q = student_q(y);
    double s = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] > 0) s += p[k] * std::log(p[k] / q[k]);
    }
    return s;
}

// ---- DBSCAN, textbook O(n^2) form ----

inline std::vector<int> dbscan(const std::vector<proxyfair::Point2>& pts, double eps, std::size_t min_samples) {
    const std::size_t n = pts.size();
    auto region = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
            if (std::sqrt(dx * dx + dy * dy) <= eps) out.push_back(j);
        }
        return out;
    };
    constexpr int unvisited = -2;
    std::vector<int> label(n, unvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != unvisited) continue;
        auto nb = region(i);
        if (nb.size() < min_samples) {
            label[i] = -1;
            continue;
        }
        label[i] = cluster;
        std::deque<std::size_t> seeds(nb.begin(), nb.end());
        while (!seeds.empty()) {
            const auto q = seeds.front();
            seeds.pop_front();
            if (label[q] == -1) label[q] = cluster;
            if (label[q] != unvisited) continue;
            label[q] = cluster;
            auto nq = region(q);
            if (nq.size() >= min_samples) seeds.insert(seeds.end(), nq.begin(), nq.end());
        }
        ++cluster;
    }
    return label;
}

inline std::vector<bool> core(const std::vector<proxyfair::Point2>& pts, double eps, std::size_t min_samples) {
    std::vector<bool> c(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t cnt = 0;
        for (const auto& q : pts) {
            if (std::hypot(pts[i].x - q.x, pts[i].y - q.y) <= eps) ++cnt;
        }
        c[i] = cnt >= min_samples;
    }
    return c;
}

// Same partition of the masked points, up to relabelling.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b, const std::vector<bool>& mask) {
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask[i]) continue;
        if ((a[i] == -1) != (b[i] == -1)) return false;
        if (a[i] == -1) continue;
        auto [it1, new1] = ab.emplace(a[i], b[i]);
        auto [it2, new2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i]) return false;
    }
    return true;
}

// ---- quota allocation by one-unit round robin ----

inline std::map<int, std::size_t> round_robin_quotas(std::vector<std::pair<int, std::size_t>> sizes,
                                                     std::size_t target) {
    std::stable_sort(sizes.begin(), sizes.end(), [](const auto& l, const auto& r) {
        return l.second != r.second ? l.second < r.second : l.first < r.first;
    });
    std::vector<std::size_t> take(sizes.size(), 0);
    std::size_t given = 0;
    bool progress = true;
    while (given < target && progress) {
        progress = false;
        for (std::size_t k = 0; k < sizes.size() && given < target; ++k) {
            if (take[k] < sizes[k].second) {
                ++take[k];
                ++given;
                progress = true;
            }
        }
    }
    std::map<int, std::size_t> out;
    for (std::size_t k = 0; k < sizes.size(); ++k) out[sizes[k].first] = take[k];
    return out;
}

// ---- fairness gaps by pair enumeration ----

struct Table {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline std::optional<double> max_pair_gap(const std::vector<std::optional<double>>& rates) {
    std::optional<double> best;
    for (std::size_t a = 0; a < rates.size(); ++a) {
        for (std::size_t b = a + 1; b < rates.size(); ++b) {
            if (!rates[a] || !rates[b]) continue;
            const double g = std::fabs(*rates[a] - *rates[b]);
            if (!best || g > *best) best = g;
        }
    }
    return best;
}

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

// ---- Gaussian KDE by direct summation ----

inline double kde_at(const std::vector<double>& values, double h, double x) {
    double s = 0;
    for (double v : values) {
        const double u = (x - v) / h;
        s += std::exp(-0.5 * u * u);
    }
    return s / (values.size() * h * std::sqrt(2 * std::numbers::pi));
}

} // namespace oracle

#endif
