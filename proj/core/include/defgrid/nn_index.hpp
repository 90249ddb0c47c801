#pragma once

#include <span>
#include <vector>

#include "defgrid/types.hpp"

namespace defgrid {

/// Exact nearest-neighbor index over a fixed point set.
/// Ties in squared distance resolve to the smallest point index, so queries
/// are reproducible bit-for-bit. Immutable after construction; concurrent
/// queries are safe.
class NnIndex {
public:
    struct Result {
        int index = -1;
        double sq_dist = 0.0;
    };

    NnIndex() = default;
    explicit NnIndex(std::span<const Vec3> points);

    Result nearest(const Vec3& query) const;
    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int axis = -1;        // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };

    static constexpr int kLeafSize = 16;

    int build(int begin, int end);
    void search(int node, const Vec3& q, Result& best) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace defgrid
