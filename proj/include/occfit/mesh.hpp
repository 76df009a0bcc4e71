#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "occfit/types.hpp"

namespace occfit {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    bool empty() const { return triangles.empty(); }
};

/// Undirected edge -> number of incident triangles.
inline std::map<std::pair<int, int>, int> edge_incidence(const TriangleMesh& mesh) {
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edges[{a, b}];
        }
    }
    return edges;
}

/// Every edge shared by exactly two triangles.
inline bool is_watertight(const TriangleMesh& mesh) {
    if (mesh.empty()) return false;
    for (const auto& [edge, count] : edge_incidence(mesh))
        if (count != 2) return false;
    return true;
}

inline long euler_characteristic(const TriangleMesh& mesh) {
    const long v = static_cast<long>(mesh.vertex_count());
    const long e = static_cast<long>(edge_incidence(mesh).size());
    const long f = static_cast<long>(mesh.triangle_count());
    return v - e + f;
}

/// Six times the signed volume enclosed by the mesh (positive for outward
/// orientation under the right-hand rule).
inline double signed_volume6(const TriangleMesh& mesh) {
    double vol = 0.0;
    for (const auto& t : mesh.triangles)
        vol += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
    return vol;
}

} // namespace occfit
