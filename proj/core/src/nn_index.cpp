#include "defgrid/nn_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace defgrid {

NnIndex::NnIndex(std::span<const Vec3> points)
    : points_(points.begin(), points.end()) {
    if (points_.empty()) throw InputError("cannot build NN index over an empty cloud");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(points_.size()));
}

int NnIndex::build(int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(begin)])];
    Vec3 hi = lo;
    for (int i = begin + 1; i < end; ++i) {
        const Vec3& p = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all points coincide on every axis: keep as leaf

    const int mid = begin + (end - begin) / 2;
    auto cmp = [&](int a, int b) {
        const double ca = points_[static_cast<std::size_t>(a)][axis];
        const double cb = points_[static_cast<std::size_t>(b)][axis];
        return ca < cb || (ca == cb && a < b);
    };
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, cmp);

    nodes_[static_cast<std::size_t>(id)].axis = axis;
    nodes_[static_cast<std::size_t>(id)].split =
        points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

void NnIndex::search(int node_id, const Vec3& q, Result& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = order_[static_cast<std::size_t>(i)];
            const double d2 = (q - points_[static_cast<std::size_t>(idx)]).squaredNorm();
            if (d2 < best.sq_dist || (d2 == best.sq_dist && idx < best.index)) {
                best.sq_dist = d2;
                best.index = idx;
            }
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    // Equal-distance boundary is not pruned so index ties resolve globally.
    if (diff * diff <= best.sq_dist) search(far, q, best);
}

NnIndex::Result NnIndex::nearest(const Vec3& query) const {
    Result best;
    best.sq_dist = std::numeric_limits<double>::infinity();
    best.index = static_cast<int>(points_.size());
    search(root_, query, best);
    return best;
}

}  // namespace defgrid
