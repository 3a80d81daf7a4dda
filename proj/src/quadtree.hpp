#ifndef PROXYFAIR_QUADTREE_HPP
#define PROXYFAIR_QUADTREE_HPP

#include "proxyfair/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace proxyfair::detail {

/**
 * Region quadtree over a fixed point set, used for Barnes-Hut summation of
 * t-SNE repulsive forces. Built once per iteration, read-only afterwards.
 */
class QuadTree {
public:
    QuadTree(std::span<const Point2> points, int max_depth = 48, std::uint32_t leaf_size = 1);

    /**
     * Adds to `force` the unnormalised repulsion sum_j w_ij^2 (y_i - y_j) and
     * to `z` the sum_j w_ij for point i, with w = 1 / (1 + d^2). Cells with
     * width / distance < theta are replaced by their centre of mass; leaves
     * (up to `leaf_size` points) are summed exactly.
     */
    void repulsion(std::size_t i, double theta, Point2& force, double& z) const;

    std::size_t node_count() const noexcept { return nodes_.size(); }

    /// Point indices in tree (spatially coherent) order.
    std::span<const std::uint32_t> order() const noexcept { return order_; }

private:
    struct Node {
        double cx = 0, cy = 0, half = 0;
        double mx = 0, my = 0;
        std::uint32_t begin = 0, end = 0;
        std::int32_t child[4] = {-1, -1, -1, -1};
        bool leaf = true;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end, double cx, double cy, double half, int depth);

    std::span<const Point2> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Point2> sorted_;
    std::vector<Node> nodes_;
    int max_depth_;
    std::uint32_t leaf_size_;
};

} // namespace proxyfair::detail

#endif
