#include "quadtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace proxyfair::detail {

QuadTree::QuadTree(std::span<const Point2> points, int max_depth, std::uint32_t leaf_size)
    : points_(points), max_depth_(max_depth), leaf_size_(std::max<std::uint32_t>(leaf_size, 1)) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (points.empty()) {
        return;
    }
    double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
    for (const auto& p : points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double half = std::max({max_x - min_x, max_y - min_y, 1e-12}) * 0.5 * (1 + 1e-9);
    nodes_.reserve(2 * points.size());
    build(0, static_cast<std::uint32_t>(points.size()), 0.5 * (min_x + max_x), 0.5 * (min_y + max_y), half, 0);
    sorted_.resize(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        sorted_[k] = points[order_[k]];
    }
}

std::int32_t QuadTree::build(std::uint32_t begin, std::uint32_t end, double cx, double cy, double half, int depth) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    {
        auto& node = nodes_.back();
        node.cx = cx;
        node.cy = cy;
        node.half = half;
        node.begin = begin;
        node.end = end;
        double sx = 0, sy = 0;
        for (auto k = begin; k < end; ++k) {
            sx += points_[order_[k]].x;
            sy += points_[order_[k]].y;
        }
        node.mx = sx / (end - begin);
        node.my = sy / (end - begin);
    }
    if (end - begin <= leaf_size_ || depth >= max_depth_) {
        return index;
    }
    const auto& first = points_[order_[begin]];
    const bool identical = std::all_of(order_.begin() + begin, order_.begin() + end, [&](std::uint32_t j) {
        return points_[j].x == first.x && points_[j].y == first.y;
    });
    if (identical) {
        return index;
    }

    auto below = [&](std::uint32_t j) { return points_[j].y < cy; };
    auto left = [&](std::uint32_t j) { return points_[j].x < cx; };
    const auto b = order_.begin() + begin;
    const auto e = order_.begin() + end;
    const auto mid_y = std::partition(b, e, below);
    const auto mid_x_low = std::partition(b, mid_y, left);
    const auto mid_x_high = std::partition(mid_y, e, left);

    const std::uint32_t bounds[5] = {
        begin,
        static_cast<std::uint32_t>(mid_x_low - order_.begin()),
        static_cast<std::uint32_t>(mid_y - order_.begin()),
        static_cast<std::uint32_t>(mid_x_high - order_.begin()),
        end,
    };
    const double q = half * 0.5;
    const double offsets[4][2] = {{-q, -q}, {q, -q}, {-q, q}, {q, q}};
    std::int32_t children[4] = {-1, -1, -1, -1};
    for (int c = 0; c < 4; ++c) {
        if (bounds[c] < bounds[c + 1]) {
            children[c] = build(bounds[c], bounds[c + 1], cx + offsets[c][0], cy + offsets[c][1], q, depth + 1);
        }
    }
    auto& node = nodes_[static_cast<std::size_t>(index)];
    node.leaf = false;
    std::copy(children, children + 4, node.child);
    return index;
}

void QuadTree::repulsion(std::size_t i, double theta, Point2& force, double& z) const {
    if (nodes_.empty()) {
        return;
    }
    const Point2 p = points_[i];
    const double theta2 = theta * theta;
    double fx = 0, fy = 0, zz = 0;
    std::int32_t stack[4 * 64 + 8];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const auto& node = nodes_[static_cast<std::size_t>(stack[--top])];
        if (node.leaf) {
            for (auto k = node.begin; k < node.end; ++k) {
                if (order_[k] == i) {
                    continue;
                }
                const double dx = p.x - sorted_[k].x;
                const double dy = p.y - sorted_[k].y;
                const double w = 1.0 / (1.0 + dx * dx + dy * dy);
                zz += w;
                fx += w * w * dx;
                fy += w * w * dy;
            }
            continue;
        }
        const double dx = p.x - node.mx;
        const double dy = p.y - node.my;
        const double d2 = dx * dx + dy * dy;
        // (2 half) / sqrt(d2) < theta
        if (d2 > 0 && 4 * node.half * node.half < theta2 * d2) {
            const double count = node.end - node.begin;
            const double w = 1.0 / (1.0 + d2);
            zz += count * w;
            fx += count * w * w * dx;
            fy += count * w * w * dy;
            continue;
        }
        for (auto c : node.child) {
            if (c >= 0) {
                stack[top++] = c;
            }
        }
    }
    force.x += fx;
    force.y += fy;
    z += zz;
}

} // namespace proxyfair::detail
