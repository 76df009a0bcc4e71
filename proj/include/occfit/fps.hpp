#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "occfit/point_cloud.hpp"
#include "occfit/rng.hpp"
#include "occfit/types.hpp"

namespace occfit {

namespace detail {

// Greedy farthest-point selection. Stops at max_count samples or when the
// best remaining min-distance drops below min_spacing, whichever comes first.
inline std::vector<std::size_t> fps_impl(const std::vector<Vec3>& points, std::size_t max_count,
                                         double min_spacing, std::uint64_t seed) {
    const std::size_t n = points.size();
    std::vector<std::size_t> picked;
    if (n == 0 || max_count == 0) return picked;

    Rng rng(seed);
    std::size_t current = rng.index(n);
    picked.push_back(current);

    std::vector<char> taken(n, 0);
    taken[current] = 1;
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    while (picked.size() < max_count) {
        double best_d2 = -1.0;
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = (points[i] - points[current]).squaredNorm();
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (!taken[i] && min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        if (best == n || best_d2 < min_spacing * min_spacing) break;
        picked.push_back(best);
        taken[best] = 1;
        current = best;
    }
    return picked;
}

} // namespace detail

/// Exactly m indices; the first pick is drawn from the seed, every later pick
/// maximizes the distance to the already chosen set (ties -> lowest index).
inline std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m,
                                                      std::uint64_t seed) {
    if (cloud.empty()) throw Error(Error::Code::empty_cloud, "farthest_point_sample: empty cloud");
    if (m < 1 || m > cloud.size())
        throw Error(Error::Code::precondition, "farthest_point_sample: need 1 <= m <= n");
    return detail::fps_impl(cloud.points, m, 0.0, seed);
}

/// Farthest-point selection that stops once the next candidate would sit
/// closer than `spacing` to the chosen set.
inline std::vector<std::size_t> farthest_point_sample_spacing(const std::vector<Vec3>& points,
                                                              double spacing, std::uint64_t seed) {
    if (points.empty()) throw Error(Error::Code::empty_cloud, "farthest_point_sample_spacing: empty set");
    if (spacing <= 0.0)
        throw Error(Error::Code::precondition, "farthest_point_sample_spacing: spacing must be positive");
    return detail::fps_impl(points, points.size(), spacing, seed);
}

} // namespace occfit
