#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "occfit/field.hpp"
#include "occfit/types.hpp"

namespace occfit {

/// Regular lattice of margin-uncertainty samples, x-fastest ordering.
struct GridField {
    int resolution = 0;
    Box bounds;
    std::vector<double> values;

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(resolution) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution) * k);
    }

    double value(int i, int j, int k) const { return values[index(i, j, k)]; }

    Vec3 position(int i, int j, int k) const {
        const Vec3 e = bounds.extent();
        const double denom = static_cast<double>(resolution - 1);
        return bounds.min + Vec3(e.x() * i / denom, e.y() * j / denom, e.z() * k / denom);
    }
};

inline GridField evaluate_grid(const NetworkParameters& params, const Box& bounds, int resolution) {
    if (resolution < 2) throw Error(Error::Code::precondition, "evaluate_grid: resolution >= 2");
    GridField grid;
    grid.resolution = resolution;
    grid.bounds = bounds;
    grid.values.resize(static_cast<std::size_t>(resolution) * resolution * resolution);

    FieldEvaluator ev(params);
    constexpr int kChunk = 4096;
    Matrix X(3, kChunk);
    std::size_t flat = 0;
    const std::size_t total = grid.values.size();
    while (flat < total) {
        const int n = static_cast<int>(std::min<std::size_t>(kChunk, total - flat));
        for (int c = 0; c < n; ++c) {
            const std::size_t idx = flat + c;
            const int i = static_cast<int>(idx % resolution);
            const int j = static_cast<int>((idx / resolution) % resolution);
            const int k = static_cast<int>(idx / (static_cast<std::size_t>(resolution) * resolution));
            X.col(c) = grid.position(i, j, k);
        }
        ev.forward(X.leftCols(n), false);
        for (int c = 0; c < n; ++c) grid.values[flat + c] = ev.uncertainty()[c];
        flat += n;
    }
    return grid;
}

/// Exact median; even counts average the two central order statistics.
inline double median_threshold(const GridField& grid) {
    if (grid.values.empty()) throw Error(Error::Code::precondition, "median_threshold: empty grid");
    std::vector<double> v = grid.values;
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double upper = v[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lower + upper);
}

/// Raw little-endian float32 dump plus a text sidecar (<path>.txt) carrying
/// the resolution and bounds.
inline void dump_grid(const GridField& grid, const std::string& path) {
    std::ofstream raw(path, std::ios::binary);
    if (!raw) throw Error(Error::Code::io, "cannot write " + path);
    for (double v : grid.values) {
        const float f = static_cast<float>(v);
        raw.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
    if (!raw) throw Error(Error::Code::io, "write failed: " + path);

    std::ofstream side(path + ".txt");
    if (!side) throw Error(Error::Code::io, "cannot write " + path + ".txt");
    char buf[256];
    std::snprintf(buf, sizeof(buf), "resolution %d\nmin %.17g %.17g %.17g\nmax %.17g %.17g %.17g\n",
                  grid.resolution, grid.bounds.min.x(), grid.bounds.min.y(), grid.bounds.min.z(),
                  grid.bounds.max.x(), grid.bounds.max.y(), grid.bounds.max.z());
    side << buf;
}

} // namespace occfit
