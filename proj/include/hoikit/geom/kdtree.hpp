#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hoikit/geom/point_cloud.hpp"

namespace hoikit::geom {

/// Result of a nearest-neighbor query.
struct Neighbor {
    std::uint32_t index;
    double distance;
};

/// kd-tree over an immutable point cloud. Queries return exactly what an
/// exhaustive scan would: equal distances resolve to the lowest point index,
/// and per-pair distance arithmetic matches squared_distance().
class SpatialIndex {
public:
    explicit SpatialIndex(const PointCloud& cloud) : points_(cloud.points) {
        cloud.validate();
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        nodes_.reserve(points_.size() / kLeafSize * 2 + 1);
        root_ = build(0, std::uint32_t(order_.size()));
    }

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    /// Single nearest neighbor (lowest index on distance ties).
    Neighbor nearest(const Vec3& query) const {
        Best best;
        search_nearest(root_, query, best);
        return {best.index, std::sqrt(best.d2)};
    }

    /// k nearest neighbors sorted ascending by (distance, index). Returns
    /// fewer when the cloud is smaller than k.
    std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
        if (k == 0) return {};
        k = std::min(k, points_.size());
        std::vector<HeapEntry> heap;
        heap.reserve(k);
        search_knn(root_, query, k, heap);
        std::sort(heap.begin(), heap.end(), [](const HeapEntry& a, const HeapEntry& b) {
            return a.d2 != b.d2 ? a.d2 < b.d2 : a.index < b.index;
        });
        std::vector<Neighbor> out;
        out.reserve(heap.size());
        for (const auto& e : heap) out.push_back({e.index, std::sqrt(e.d2)});
        return out;
    }

    /// Indices of all points with squared distance <= r2, ascending by index.
    std::vector<std::uint32_t> radius_search_sq(const Vec3& query, double r2) const {
        std::vector<std::uint32_t> out;
        search_radius(root_, query, r2, out);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::uint32_t> radius_search(const Vec3& query, double radius) const {
        return radius_search_sq(query, radius * radius);
    }

private:
    static constexpr std::uint32_t kLeafSize = 12;
    static constexpr std::uint32_t kNone = 0xffffffffu;

    struct Node {
        double split = 0.0;
        std::uint32_t left = kNone, right = kNone;
        std::uint32_t begin = 0, end = 0;  // leaf payload range in order_
        std::uint8_t axis = 0;
        bool leaf() const { return left == kNone && right == kNone; }
    };

    struct Best {
        double d2 = std::numeric_limits<double>::infinity();
        std::uint32_t index = 0;
        bool improves(double d2_new, std::uint32_t idx) const {
            return d2_new < d2 || (d2_new == d2 && idx < index);
        }
    };

    struct HeapEntry {
        double d2;
        std::uint32_t index;
        // max-heap: the worst entry (largest d2, then largest index) on top
        bool operator<(const HeapEntry& o) const {
            return d2 != o.d2 ? d2 < o.d2 : index < o.index;
        }
    };

    static double coord(const Vec3& p, int axis) {
        return axis == 0 ? p.x : axis == 1 ? p.y : p.z;
    }

    std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return std::uint32_t(nodes_.size() - 1);
        }
        Aabb box;
        for (std::uint32_t i = begin; i < end; ++i) box.expand(points_[order_[i]]);
        const Vec3 ext = box.extent();
        const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
        const std::uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double ca = coord(points_[a], axis), cb = coord(points_[b], axis);
                             return ca != cb ? ca < cb : a < b;
                         });
        node.axis = std::uint8_t(axis);
        node.split = coord(points_[order_[mid]], axis);
        const std::uint32_t self = std::uint32_t(nodes_.size());
        nodes_.push_back(node);
        const std::uint32_t left = build(begin, mid);
        const std::uint32_t right = build(mid, end);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void search_nearest(std::uint32_t ni, const Vec3& q, Best& best) const {
        const Node& node = nodes_[ni];
        if (node.leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t idx = order_[i];
                const double d2 = squared_distance(points_[idx], q);
                if (best.improves(d2, idx)) best = {d2, idx};
            }
            return;
        }
        const double diff = coord(q, node.axis) - node.split;
        const std::uint32_t near = diff < 0.0 ? node.left : node.right;
        const std::uint32_t far = diff < 0.0 ? node.right : node.left;
        search_nearest(near, q, best);
        // <= keeps equal-distance candidates reachable for the index tie rule
        if (diff * diff <= best.d2) search_nearest(far, q, best);
    }

    void search_knn(std::uint32_t ni, const Vec3& q, std::size_t k,
                    std::vector<HeapEntry>& heap) const {
        const Node& node = nodes_[ni];
        if (node.leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t idx = order_[i];
                const double d2 = squared_distance(points_[idx], q);
                const HeapEntry entry{d2, idx};
                if (heap.size() < k) {
                    heap.push_back(entry);
                    std::push_heap(heap.begin(), heap.end());
                } else if (entry < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = entry;
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        const double diff = coord(q, node.axis) - node.split;
        const std::uint32_t near = diff < 0.0 ? node.left : node.right;
        const std::uint32_t far = diff < 0.0 ? node.right : node.left;
        search_knn(near, q, k, heap);
        if (heap.size() < k || diff * diff <= heap.front().d2) search_knn(far, q, k, heap);
    }

    void search_radius(std::uint32_t ni, const Vec3& q, double r2,
                       std::vector<std::uint32_t>& out) const {
        const Node& node = nodes_[ni];
        if (node.leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t idx = order_[i];
                if (squared_distance(points_[idx], q) <= r2) out.push_back(idx);
            }
            return;
        }
        const double diff = coord(q, node.axis) - node.split;
        const std::uint32_t near = diff < 0.0 ? node.left : node.right;
        const std::uint32_t far = diff < 0.0 ? node.right : node.left;
        search_radius(near, q, r2, out);
        if (diff * diff <= r2) search_radius(far, q, r2, out);
    }

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::uint32_t root_ = 0;
};

/// Convenience wrapper matching the one-shot query shape used throughout.
inline Neighbor nearest_neighbor(const SpatialIndex& index, const Vec3& query) {
    return index.nearest(query);
}

}  // namespace hoikit::geom
