#ifndef PROXYFAIR_TSNE_HPP
#define PROXYFAIR_TSNE_HPP

#include "proxyfair/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * @file tsne.hpp
 *
 * @brief t-SNE reduction of an embedding matrix to the plane.
 *
 * Two regimes share one code path: theta == 0 uses dense affinities and the
 * exact O(n^2) gradient, theta > 0 restricts affinities to the
 * floor(3 * perplexity) nearest neighbours and approximates repulsion with a
 * Barnes-Hut quadtree.
 */

namespace proxyfair {

enum class TsneInit { Pca, Random };

struct TsneParams {
    double perplexity = 30;
    int iterations = 1000;
    double early_exaggeration = 12;
    int early_exaggeration_iters = 250;
    /// Unset means max(n / 12, 50).
    std::optional<double> learning_rate;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    int momentum_switch_iter = 250;
    double theta = 0.5;
    std::uint64_t seed = 0;
    TsneInit init = TsneInit::Pca;
    /// Record the objective every this many iterations (0 disables the trace).
    int trace_every = 50;
    /// Worker threads for per-point work; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

/// Throws ParameterError naming the first violated field.
void validate(const TsneParams& params, std::size_t n);

double resolved_learning_rate(const TsneParams& params, std::size_t n);

struct BandwidthResult {
    double sigma = 0;
    /// p_{j|i}, in the order of the input distances.
    std::vector<double> probabilities;
    /// Shannon entropy in nats.
    double entropy = 0;
    bool converged = false;
    int iterations = 0;
};

/**
 * Finds the Gaussian bandwidth sigma for which the conditional distribution
 * p_j proportional to exp(-d_j^2 / (2 sigma^2)) has exp(entropy) equal to
 * `perplexity`.
 *
 * Zero distances (duplicates of the query point) receive zero probability
 * unless every distance is zero, in which case the distribution is uniform
 * and sigma is the smallest positive normal double. If fewer than
 * `perplexity` distances are positive the target is unreachable; the widest
 * bandwidth tried is returned with `converged == false`.
 *
 * Requires at least two finite non-negative distances and 1 < perplexity <= count.
 */
BandwidthResult calibrate_bandwidth(std::span<const double> distances, double perplexity);

/**
 * Symmetric joint probabilities p_ij stored as CSR with sorted columns.
 * Entries that are exactly zero are not stored.
 */
struct AffinityMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> cols;
    std::vector<double> values;
    /// Calibrated per-point bandwidths (empty for matrices built directly).
    std::vector<double> sigmas;
    /// Points whose bandwidth search did not reach the perplexity target.
    std::size_t unconverged = 0;

    double at(std::size_t i, std::size_t j) const;
    std::size_t nonzeros() const noexcept { return values.size(); }

    /// Builds from a dense row-major n x n matrix (zeros dropped).
    static AffinityMatrix from_dense(std::size_t n, std::span<const double> dense);
};

/**
 * p_ij = (p_{j|i} + p_{i|j}) / (2n). With theta > 0 each conditional is
 * restricted to the k = min(n - 1, floor(3 * perplexity)) exact nearest
 * neighbours; with theta == 0 all n - 1 other points are used.
 */
AffinityMatrix compute_affinities(const EmbeddingMatrix& m, const TsneParams& params);

/// KL(P || Q) with Student-t q_ij; O(n^2).
double kl_objective(const AffinityMatrix& p, std::span<const Point2> y);

/// Exact KL gradient with P scaled by `exaggeration`; O(n^2).
std::vector<Point2> gradient_exact(const AffinityMatrix& p, std::span<const Point2> y, double exaggeration = 1.0);

/**
 * Barnes-Hut KL gradient. A quadtree cell is summarised by its centre of
 * mass when cell_width / distance < theta; theta == 0 visits every point.
 * When `normalizer` is non-null it receives the estimate of
 * sum_{i != j} (1 + |y_i - y_j|^2)^-1.
 */
std::vector<Point2> gradient_barnes_hut(const AffinityMatrix& p, std::span<const Point2> y, double theta,
                                        double exaggeration = 1.0, unsigned threads = 1,
                                        double* normalizer = nullptr);

struct TracePoint {
    int iteration = 0;
    double kl = 0;
};

struct TsneResult {
    ReducedCoordinates coords;
    /// Objective after the listed iteration (1-based count of completed
    /// steps), always against the unexaggerated P. With theta > 0 the
    /// normaliser comes from the Barnes-Hut estimate.
    std::vector<TracePoint> trace;
    std::size_t unconverged_bandwidths = 0;
};

/// Full reduction: affinities, initialisation, then momentum gradient descent.
TsneResult run_tsne(const EmbeddingMatrix& m, const TsneParams& params);

/// Gradient descent from a given starting layout.
std::vector<Point2> optimize_layout(const AffinityMatrix& p, std::vector<Point2> y, const TsneParams& params,
                                    std::vector<TracePoint>* trace = nullptr);

/// Top-two principal component projection scaled so the first coordinate has std 1e-4.
std::vector<Point2> pca_initialization(const EmbeddingMatrix& m, std::uint64_t seed);

std::vector<Point2> random_initialization(std::size_t n, std::uint64_t seed);

} // namespace proxyfair

#endif
