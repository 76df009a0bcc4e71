#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "occfit/types.hpp"

namespace occfit {

// Deterministic random source. mt19937_64 output is pinned by the standard;
// the uniform/normal transforms are spelled out here because the standard
// library distributions are implementation-defined and would break
// byte-reproducibility across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * u01(); }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        std::size_t i = static_cast<std::size_t>(u01() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    /// Standard normal via Box-Muller, one spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - u01(); // (0, 1]
        const double u2 = u01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    Vec3 normal3() {
        const double x = normal();
        const double y = normal();
        const double z = normal();
        return {x, y, z};
    }

    Vec3 uniform_in_cube(double half_extent) {
        const double x = uniform(-half_extent, half_extent);
        const double y = uniform(-half_extent, half_extent);
        const double z = uniform(-half_extent, half_extent);
        return {x, y, z};
    }

    Vec3 uniform_in_ball(double radius) {
        for (;;) {
            Vec3 p = uniform_in_cube(radius);
            if (p.squaredNorm() <= radius * radius) return p;
        }
    }

    /// Uniform direction on the unit sphere.
    Vec3 unit_vector() {
        for (;;) {
            Vec3 v = normal3();
            const double n = v.norm();
            if (n > 1e-12) return v / n;
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace occfit
