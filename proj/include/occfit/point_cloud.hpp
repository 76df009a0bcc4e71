#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "occfit/types.hpp"

namespace occfit {

struct PointCloud {
    std::vector<Vec3> points;
    /// On-disk size of the originating file in bytes (0 for synthetic clouds).
    std::uint64_t source_bytes = 0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    bool all_finite() const {
        for (const Vec3& p : points)
            if (!p.allFinite()) return false;
        return true;
    }
};

inline Box bounding_box(const PointCloud& cloud) {
    if (cloud.empty()) throw Error(Error::Code::empty_cloud, "bounding_box: empty point cloud");
    Box b;
    b.min = cloud.points.front();
    b.max = cloud.points.front();
    for (const Vec3& p : cloud.points) {
        b.min = b.min.cwiseMin(p);
        b.max = b.max.cwiseMax(p);
    }
    return b;
}

/// Similarity transform mapping scene coordinates into the unit ball.
struct NormalizationTransform {
    Vec3 center = Vec3::Zero();
    double scale = 1.0; // scene units per normalized unit

    Vec3 apply(const Vec3& p) const { return (p - center) / scale; }
    Vec3 invert(const Vec3& p) const { return p * scale + center; }
};

/// Center on the bounding-box centroid and scale by the half-diagonal so the
/// result lies in the closed unit ball.
inline std::pair<PointCloud, NormalizationTransform> normalize(const PointCloud& cloud) {
    if (cloud.empty()) throw Error(Error::Code::empty_cloud, "normalize: empty point cloud");
    const Box box = bounding_box(cloud);
    NormalizationTransform t;
    t.center = box.center();
    t.scale = 0.5 * box.extent().norm();
    if (t.scale <= 0.0)
        throw Error(Error::Code::degenerate_cloud, "normalize: all points identical, zero extent");
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Vec3& p : cloud.points) out.points.push_back(t.apply(p));
    out.source_bytes = cloud.source_bytes;
    return {std::move(out), t};
}

inline bool is_normalized(const PointCloud& cloud, double tol = 1e-9) {
    for (const Vec3& p : cloud.points)
        if (p.norm() > 1.0 + tol) return false;
    return true;
}

} // namespace occfit
