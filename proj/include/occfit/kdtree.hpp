#pragma once

#include <algorithm>
#include <cstddef>
#include <queue>
#include <vector>

#include "occfit/point_cloud.hpp"
#include "occfit/types.hpp"

namespace occfit {

struct Neighbor {
    std::size_t index;
    double distance;
};

// Exact k-nearest-neighbor index over an immutable point set. Results match a
// brute-force scan bit for bit, with ties broken by ascending point index.
// Safe for concurrent queries once built.
class KdTree {
public:
    explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points) {}

    explicit KdTree(const std::vector<Vec3>& points) : points_(points) {
        if (points_.empty()) throw Error(Error::Code::empty_cloud, "KdTree: empty point set");
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        root_ = build(0, points_.size(), 0);
    }

    std::size_t size() const { return points_.size(); }
    const Vec3& point(std::size_t i) const { return points_[i]; }

    /// min(k, n) neighbors sorted by (distance, index).
    std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const {
        if (k == 0) return {};
        k = std::min(k, points_.size());
        Heap heap;
        search(root_, q, k, heap);
        std::vector<Neighbor> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            const Entry e = heap.top();
            heap.pop();
            out[i] = {e.index, std::sqrt(e.d2)};
        }
        return out;
    }

    Neighbor nearest(const Vec3& q) const { return knn(q, 1).front(); }

private:
    static constexpr std::size_t kLeafSize = 8;

    struct Entry {
        double d2;
        std::size_t index;
        // Orders "better" entries last so the heap top is the current worst.
        bool operator<(const Entry& o) const {
            return d2 < o.d2 || (d2 == o.d2 && index < o.index);
        }
    };
    using Heap = std::priority_queue<Entry>;

    struct Node {
        int left = -1;
        int right = -1;
        int axis = 0;
        double split = 0.0;
        std::size_t begin = 0;
        std::size_t end = 0; // leaf iff end > begin
    };

    int build(std::size_t begin, std::size_t end, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        if (end - begin <= kLeafSize) {
            nodes_[id].begin = begin;
            nodes_[id].end = end;
            return id;
        }
        const int axis = depth % 3;
        const std::size_t mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
        const double split = points_[order_[mid]][axis];
        const int left = build(begin, mid, depth + 1);
        const int right = build(mid, end, depth + 1);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void consider(const Vec3& q, std::size_t idx, std::size_t k, Heap& heap) const {
        const double d2 = (q - points_[idx]).squaredNorm();
        const Entry cand{d2, idx};
        if (heap.size() < k) {
            heap.push(cand);
        } else if (cand < heap.top()) {
            heap.pop();
            heap.push(cand);
        }
    }

    void search(int node_id, const Vec3& q, std::size_t k, Heap& heap) const {
        const Node& node = nodes_[node_id];
        if (node.end > node.begin) {
            for (std::size_t i = node.begin; i < node.end; ++i) consider(q, order_[i], k, heap);
            return;
        }
        const double diff = q[node.axis] - node.split;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        search(near, q, k, heap);
        // <= keeps equal-distance candidates visible so index tie-break stays exact
        if (heap.size() < k || diff * diff <= heap.top().d2) search(far, q, k, heap);
    }

    const std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = 0;
};

} // namespace occfit
