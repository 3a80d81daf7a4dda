#include "proxyfair/tsne.hpp"

#include "parallel.hpp"
#include "proxyfair/random.hpp"
#include "quadtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace proxyfair {

namespace {

constexpr int kMaxBandwidthIterations = 200;
constexpr double kPerplexityTolerance = 1e-5;

struct Calibration {
    double sigma = 0;
    double entropy = 0;
    bool converged = false;
    int iterations = 0;
};

/// Core of the bandwidth search on squared distances; writes p into `probs`.
Calibration calibrate_squared(std::span<const double> d2, double perplexity, std::span<double> probs) {
    const std::size_t k = d2.size();
    Calibration out;
    double min_positive = std::numeric_limits<double>::infinity();
    double sum_positive = 0;
    std::size_t positives = 0;
    for (double v : d2) {
        if (v > 0) {
            min_positive = std::min(min_positive, v);
            sum_positive += v;
            ++positives;
        }
    }

    if (positives == 0) {
        std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(k));
        out.sigma = std::numeric_limits<double>::min();
        out.entropy = std::log(static_cast<double>(k));
        out.converged = std::abs(static_cast<double>(k) - perplexity) <= kPerplexityTolerance;
        return out;
    }

    // Weights are shifted by the nearest positive distance so the largest is exactly 1.
    auto evaluate = [&](double sigma, bool write) {
        const double beta = 1.0 / (2.0 * sigma * sigma);
        double sum = 0, weighted = 0;
        for (std::size_t j = 0; j < k; ++j) {
            double w = 0;
            if (d2[j] > 0) {
                const double shifted = d2[j] - min_positive;
                w = shifted == 0 ? 1.0 : std::exp(-shifted * beta);
                if (w > 0) {
                    weighted += w * shifted * beta;
                }
            }
            sum += w;
            if (write) {
                probs[j] = w;
            }
        }
        if (write) {
            for (auto& p : probs) {
                p /= sum;
            }
        }
        return std::log(sum) + weighted / sum;
    };

    const double target = perplexity;
    double best_sigma = std::sqrt(sum_positive / static_cast<double>(positives));
    double best_err = std::numeric_limits<double>::infinity();
    int iter = 0;
    auto gap = [&](double sigma) {
        ++iter;
        const double err = std::exp(evaluate(sigma, false)) - target;
        if (std::abs(err) < best_err) {
            best_err = std::abs(err);
            best_sigma = sigma;
        }
        return err;
    };

    double lo = best_sigma, hi = best_sigma;
    double f = gap(best_sigma);
    // perplexity grows monotonically with sigma: expand the bracket first
    if (f < 0) {
        while (f < 0 && iter < kMaxBandwidthIterations) {
            lo = hi;
            hi *= 2;
            f = gap(hi);
        }
    } else if (f > 0) {
        while (f > 0 && iter < kMaxBandwidthIterations) {
            hi = lo;
            lo *= 0.5;
            f = gap(lo);
        }
    }
    while (best_err > 1e-10 * target && iter < kMaxBandwidthIterations && hi - lo > 1e-15 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) < 0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    out.sigma = best_sigma;
    out.entropy = evaluate(best_sigma, true);
    out.converged = best_err <= kPerplexityTolerance;
    out.iterations = iter;
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        s += diff * diff;
    }
    return s;
}

/// sum_{i != j} (1 + |y_i - y_j|^2)^-1, exactly.
double exact_normalizer(std::span<const Point2> y) {
    double z = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            const double dx = y[i].x - y[j].x;
            const double dy = y[i].y - y[j].y;
            z += 1.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    return 2 * z;
}

/// sum p_ij log(p_ij / w_ij) + log Z, the KL written against the normaliser.
double kl_with_normalizer(const AffinityMatrix& p, std::span<const Point2> y, double z) {
    double kl = 0, mass = 0;
    for (std::size_t i = 0; i < p.n; ++i) {
        for (auto k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
            const auto j = p.cols[k];
            const double pij = p.values[k];
            const double dx = y[i].x - y[j].x;
            const double dy = y[i].y - y[j].y;
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            kl += pij * std::log(pij / w);
            mass += pij;
        }
    }
    return kl + mass * std::log(z);
}

constexpr std::uint32_t kLeafSize = 8;

double barnes_hut_normalizer(std::span<const Point2> y, double theta, unsigned threads) {
    const detail::QuadTree tree(y, 48, kLeafSize);
    std::vector<double> zs(y.size(), 0.0);
    detail::parallel_for(y.size(), threads, [&](std::size_t b, std::size_t e) {
        for (auto t = b; t < e; ++t) {
            const auto i = tree.order()[t];
            Point2 f;
            tree.repulsion(i, theta, f, zs[i]);
        }
    });
    return std::accumulate(zs.begin(), zs.end(), 0.0);
}

int sign(double v) {
    return (v > 0) - (v < 0);
}

} // namespace

void validate(const TsneParams& params, std::size_t n) {
    if (n < 4) {
        throw ParameterError("input", "t-SNE needs at least 4 samples, got " + std::to_string(n));
    }
    if (!(params.perplexity > 1) || !std::isfinite(params.perplexity)) {
        throw ParameterError("perplexity", "must be a finite value > 1");
    }
    if (!(3 * params.perplexity < static_cast<double>(n))) {
        throw ParameterError("perplexity", "must be < n/3 (n = " + std::to_string(n) + ")");
    }
    if (params.iterations < 1) {
        throw ParameterError("iterations", "must be >= 1");
    }
    if (params.early_exaggeration_iters < 0 || params.early_exaggeration_iters > params.iterations) {
        throw ParameterError("early_exaggeration_iters", "must lie in [0, iterations]");
    }
    if (!(params.early_exaggeration >= 1) || !std::isfinite(params.early_exaggeration)) {
        throw ParameterError("early_exaggeration", "must be a finite value >= 1");
    }
    if (params.learning_rate && (!(*params.learning_rate > 0) || !std::isfinite(*params.learning_rate))) {
        throw ParameterError("learning_rate", "must be a finite value > 0");
    }
    if (!(params.momentum_initial >= 0 && params.momentum_initial < 1)) {
        throw ParameterError("momentum_initial", "must lie in [0, 1)");
    }
    if (!(params.momentum_final >= 0 && params.momentum_final < 1)) {
        throw ParameterError("momentum_final", "must lie in [0, 1)");
    }
    if (params.momentum_switch_iter < 0) {
        throw ParameterError("momentum_switch_iter", "must be >= 0");
    }
    if (!(params.theta >= 0 && params.theta <= 1)) {
        throw ParameterError("theta", "must lie in [0, 1]");
    }
    if (params.trace_every < 0) {
        throw ParameterError("trace_every", "must be >= 0");
    }
}

double resolved_learning_rate(const TsneParams& params, std::size_t n) {
    return params.learning_rate.value_or(std::max(static_cast<double>(n) / 12.0, 50.0));
}

BandwidthResult calibrate_bandwidth(std::span<const double> distances, double perplexity) {
    if (distances.size() < 2) {
        throw ParameterError("distances", "need at least 2 distances");
    }
    if (!(perplexity > 1) || !(perplexity <= static_cast<double>(distances.size()))) {
        throw ParameterError("perplexity", "must lie in (1, number of distances]");
    }
    std::vector<double> d2(distances.size());
    for (std::size_t j = 0; j < distances.size(); ++j) {
        if (!std::isfinite(distances[j]) || distances[j] < 0) {
            throw ParameterError("distances", "must be finite and non-negative");
        }
        d2[j] = distances[j] * distances[j];
    }
    BandwidthResult result;
    result.probabilities.resize(distances.size());
    const auto c = calibrate_squared(d2, perplexity, result.probabilities);
    result.sigma = c.sigma;
    result.entropy = c.entropy;
    result.converged = c.converged;
    result.iterations = c.iterations;
    return result;
}

double AffinityMatrix::at(std::size_t i, std::size_t j) const {
    const auto b = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto e = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    const auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(j));
    return (it != e && *it == j) ? values[static_cast<std::size_t>(it - cols.begin())] : 0.0;
}

AffinityMatrix AffinityMatrix::from_dense(std::size_t n, std::span<const double> dense) {
    AffinityMatrix p;
    p.n = n;
    p.row_ptr.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dense[i * n + j];
            if (v != 0) {
                p.cols.push_back(static_cast<std::uint32_t>(j));
                p.values.push_back(v);
            }
        }
        p.row_ptr[i + 1] = p.values.size();
    }
    return p;
}

AffinityMatrix compute_affinities(const EmbeddingMatrix& m, const TsneParams& params) {
    const std::size_t n = m.rows();
    if (n < 4) {
        throw ParameterError("input", "affinities need at least 4 samples, got " + std::to_string(n));
    }
    if (!(params.theta >= 0 && params.theta <= 1)) {
        throw ParameterError("theta", "must lie in [0, 1]");
    }
    const std::size_t k = params.theta == 0
                              ? n - 1
                              : std::min(n - 1, static_cast<std::size_t>(std::floor(3 * params.perplexity)));
    if (!(params.perplexity > 1) || !(params.perplexity < static_cast<double>(k))) {
        throw ParameterError("perplexity", "must lie in (1, " + std::to_string(k) + ") for " + std::to_string(n) +
                                               " samples");
    }

    // conditional p_{j|i} over the k nearest neighbours of each point
    std::vector<std::uint32_t> neighbours(n * k);
    std::vector<double> conditional(n * k);
    std::vector<double> sigmas(n);
    std::vector<char> converged(n);
    detail::parallel_for(n, params.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<double, std::uint32_t>> dist(n - 1);
        std::vector<double> d2(k);
        for (auto i = begin; i < end; ++i) {
            std::size_t t = 0;
            const auto row_i = m.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    dist[t++] = {squared_distance(row_i, m.row(j)), static_cast<std::uint32_t>(j)};
                }
            }
            if (k < n - 1) {
                std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
            }
            std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
            for (std::size_t a = 0; a < k; ++a) {
                d2[a] = dist[a].first;
                neighbours[i * k + a] = dist[a].second;
            }
            const auto c = calibrate_squared(d2, params.perplexity,
                                             std::span<double>(conditional).subspan(i * k, k));
            sigmas[i] = c.sigma;
            converged[i] = c.converged;
        }
    });

    // symmetrise: each conditional entry contributes to (i, j) and (j, i)
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    std::vector<std::size_t> counts(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < k; ++a) {
            if (conditional[i * k + a] > 0) {
                ++counts[i + 1];
                ++counts[neighbours[i * k + a] + 1];
            }
        }
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    std::vector<std::pair<std::uint32_t, double>> entries(counts[n]);
    std::vector<std::size_t> fill(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < k; ++a) {
            const double v = conditional[i * k + a];
            if (v > 0) {
                const auto j = neighbours[i * k + a];
                entries[fill[i]++] = {j, v * scale};
                entries[fill[j]++] = {static_cast<std::uint32_t>(i), v * scale};
            }
        }
    }

    AffinityMatrix p;
    p.n = n;
    p.sigmas = std::move(sigmas);
    p.unconverged = static_cast<std::size_t>(std::count(converged.begin(), converged.end(), 0));
    p.row_ptr.assign(n + 1, 0);
    p.cols.reserve(entries.size());
    p.values.reserve(entries.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = entries.begin() + static_cast<std::ptrdiff_t>(counts[i]);
        const auto e = entries.begin() + static_cast<std::ptrdiff_t>(counts[i + 1]);
        std::sort(b, e, [](const auto& l, const auto& r) { return l.first < r.first; });
        for (auto it = b; it != e; ++it) {
            if (!p.cols.empty() && p.values.size() > p.row_ptr[i] && p.cols.back() == it->first) {
                p.values.back() += it->second;
            } else {
                p.cols.push_back(it->first);
                p.values.push_back(it->second);
            }
        }
        p.row_ptr[i + 1] = p.values.size();
    }
    return p;
}

double kl_objective(const AffinityMatrix& p, std::span<const Point2> y) {
    return kl_with_normalizer(p, y, exact_normalizer(y));
}

std::vector<Point2> gradient_exact(const AffinityMatrix& p, std::span<const Point2> y, double exaggeration) {
    const std::size_t n = y.size();
    const double z = exact_normalizer(y);
    std::vector<Point2> grad(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto k = p.row_ptr[i];
        const auto k_end = p.row_ptr[i + 1];
        double gx = 0, gy = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            double pij = 0;
            while (k < k_end && p.cols[k] < j) {
                ++k;
            }
            if (k < k_end && p.cols[k] == j) {
                pij = exaggeration * p.values[k];
            }
            const double dx = y[i].x - y[j].x;
            const double dy = y[i].y - y[j].y;
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            const double coef = (pij - w / z) * w;
            gx += coef * dx;
            gy += coef * dy;
        }
        grad[i] = {4 * gx, 4 * gy};
    }
    return grad;
}

std::vector<Point2> gradient_barnes_hut(const AffinityMatrix& p, std::span<const Point2> y, double theta,
                                        double exaggeration, unsigned threads, double* normalizer) {
    const std::size_t n = y.size();
    const detail::QuadTree tree(y, 48, kLeafSize);
    std::vector<Point2> attract(n), repel(n);
    std::vector<double> zs(n, 0.0);
    // tree order keeps consecutive traversals on the same nodes
    detail::parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (auto t = begin; t < end; ++t) {
            const auto i = tree.order()[t];
            double ax = 0, ay = 0;
            for (auto k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
                const auto j = p.cols[k];
                const double dx = y[i].x - y[j].x;
                const double dy = y[i].y - y[j].y;
                const double w = exaggeration * p.values[k] / (1.0 + dx * dx + dy * dy);
                ax += w * dx;
                ay += w * dy;
            }
            attract[i] = {ax, ay};
            tree.repulsion(i, theta, repel[i], zs[i]);
        }
    });
    const double z = std::accumulate(zs.begin(), zs.end(), 0.0);
    if (normalizer != nullptr) {
        *normalizer = z;
    }
    std::vector<Point2> grad(n);
    for (std::size_t i = 0; i < n; ++i) {
        grad[i] = {4 * (attract[i].x - repel[i].x / z), 4 * (attract[i].y - repel[i].y / z)};
    }
    return grad;
}

std::vector<Point2> random_initialization(std::size_t n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1417));
    std::vector<Point2> y(n);
    for (auto& p : y) {
        p.x = 1e-4 * standard_normal(rng);
        p.y = 1e-4 * standard_normal(rng);
    }
    return y;
}

std::vector<Point2> pca_initialization(const EmbeddingMatrix& m, std::uint64_t seed) {
    const std::size_t n = m.rows();
    const std::size_t d = m.dim();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = m.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            mean[c] += row[c];
        }
    }
    for (auto& v : mean) {
        v /= static_cast<double>(n);
    }

    // subspace iteration for the top two right singular vectors of the centred data
    Rng rng(derive_seed(seed, 0x9CA));
    std::vector<double> basis(2 * d);
    for (auto& v : basis) {
        v = standard_normal(rng);
    }
    std::vector<double> proj(2 * n), next(2 * d);
    auto project = [&](const std::vector<double>& b, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = m.row(i);
            double s0 = 0, s1 = 0;
            for (std::size_t c = 0; c < d; ++c) {
                const double x = row[c] - mean[c];
                s0 += x * b[c];
                s1 += x * b[d + c];
            }
            out[2 * i] = s0;
            out[2 * i + 1] = s1;
        }
    };
    auto orthonormalize = [&](std::vector<double>& b) {
        double n0 = 0;
        for (std::size_t c = 0; c < d; ++c) {
            n0 += b[c] * b[c];
        }
        n0 = std::sqrt(n0);
        if (n0 == 0) {
            return false;
        }
        double dot = 0;
        for (std::size_t c = 0; c < d; ++c) {
            b[c] /= n0;
            dot += b[c] * b[d + c];
        }
        double n1 = 0;
        for (std::size_t c = 0; c < d; ++c) {
            b[d + c] -= dot * b[c];
            n1 += b[d + c] * b[d + c];
        }
        n1 = std::sqrt(n1);
        for (std::size_t c = 0; c < d; ++c) {
            b[d + c] = n1 > 1e-300 ? b[d + c] / n1 : 0.0;
        }
        return true;
    };
    if (!orthonormalize(basis)) {
        return random_initialization(n, seed);
    }
    for (int iter = 0; iter < 100; ++iter) {
        project(basis, proj);
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = m.row(i);
            for (std::size_t c = 0; c < d; ++c) {
                const double x = row[c] - mean[c];
                next[c] += x * proj[2 * i];
                next[d + c] += x * proj[2 * i + 1];
            }
        }
        if (!orthonormalize(next)) {
            return random_initialization(n, seed);
        }
        double c0 = 0, c1 = 0;
        for (std::size_t c = 0; c < d; ++c) {
            c0 += next[c] * basis[c];
            c1 += next[d + c] * basis[d + c];
        }
        basis.swap(next);
        if (std::abs(std::abs(c0) - 1) < 1e-12 && std::abs(std::abs(c1) - 1) < 1e-12) {
            break;
        }
    }
    // fix the sign: largest-magnitude loading positive
    for (int comp = 0; comp < 2; ++comp) {
        const auto b = basis.begin() + comp * static_cast<std::ptrdiff_t>(d);
        const auto it = std::max_element(b, b + static_cast<std::ptrdiff_t>(d),
                                         [](double l, double r) { return std::abs(l) < std::abs(r); });
        if (*it < 0) {
            std::for_each(b, b + static_cast<std::ptrdiff_t>(d), [](double& v) { v = -v; });
        }
    }
    project(basis, proj);

    double mean0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean0 += proj[2 * i];
    }
    mean0 /= static_cast<double>(n);
    double var0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        var0 += (proj[2 * i] - mean0) * (proj[2 * i] - mean0);
    }
    const double sd0 = std::sqrt(var0 / static_cast<double>(n));
    if (!(sd0 > 0)) {
        return random_initialization(n, seed);
    }
    const double scale = 1e-4 / sd0;
    const bool flat_second = std::all_of(basis.begin() + static_cast<std::ptrdiff_t>(d), basis.end(),
                                         [](double v) { return v == 0; });
    auto jitter = random_initialization(n, seed);
    std::vector<Point2> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i].x = proj[2 * i] * scale;
        y[i].y = flat_second ? jitter[i].y : proj[2 * i + 1] * scale;
    }
    return y;
}

std::vector<Point2> optimize_layout(const AffinityMatrix& p, std::vector<Point2> y, const TsneParams& params,
                                    std::vector<TracePoint>* trace) {
    const std::size_t n = y.size();
    const double eta = resolved_learning_rate(params, n);
    std::vector<Point2> update(n), gains(n, Point2{1.0, 1.0});
    double z = 0;

    for (int iter = 0; iter < params.iterations; ++iter) {
        const double exaggeration = iter < params.early_exaggeration_iters ? params.early_exaggeration : 1.0;
        const double momentum = iter < params.momentum_switch_iter ? params.momentum_initial : params.momentum_final;
        const auto grad = params.theta == 0
                              ? gradient_exact(p, y, exaggeration)
                              : gradient_barnes_hut(p, y, params.theta, exaggeration, params.threads, &z);

        auto step = [&](double g, double& u, double& gain, double& coord) {
            gain = sign(g) != sign(u) ? gain + 0.2 : gain * 0.8;
            gain = std::max(gain, 0.01);
            u = momentum * u - eta * gain * g;
            coord += u;
        };
        double cx = 0, cy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            step(grad[i].x, update[i].x, gains[i].x, y[i].x);
            step(grad[i].y, update[i].y, gains[i].y, y[i].y);
            cx += y[i].x;
            cy += y[i].y;
        }
        cx /= static_cast<double>(n);
        cy /= static_cast<double>(n);
        for (auto& pt : y) {
            pt.x -= cx;
            pt.y -= cy;
        }

        const int done = iter + 1;
        if (trace != nullptr && params.trace_every > 0 &&
            (done % params.trace_every == 0 || done == params.iterations)) {
            const double kl = params.theta == 0
                                  ? kl_objective(p, y)
                                  : kl_with_normalizer(p, y, barnes_hut_normalizer(y, params.theta, params.threads));
            trace->push_back({done, kl});
        }
    }
    return y;
}

TsneResult run_tsne(const EmbeddingMatrix& m, const TsneParams& params) {
    validate(params, m.rows());
    const auto p = compute_affinities(m, params);
    auto y = params.init == TsneInit::Pca ? pca_initialization(m, params.seed)
                                          : random_initialization(m.rows(), params.seed);
    std::vector<TracePoint> trace;
    y = optimize_layout(p, std::move(y), params, &trace);
    return TsneResult{ReducedCoordinates(m.ids(), std::move(y)), std::move(trace), p.unconverged};
}

} // namespace proxyfair
