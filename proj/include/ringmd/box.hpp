#pragma once

#include <cmath>
#include <stdexcept>

#include "ringmd/vec.hpp"

namespace ringmd {

// Orthorhombic periodic cell. All axes are periodic.
struct SimulationBox {
    Vec3 lengths{0.0, 0.0, 0.0};  // Angstrom

    SimulationBox() = default;
    explicit SimulationBox(const Vec3& l) : lengths(l) {
        if (!(l.x > 0.0 && l.y > 0.0 && l.z > 0.0))
            throw std::invalid_argument("SimulationBox: all edge lengths must be positive");
    }
    explicit SimulationBox(double edge) : SimulationBox(Vec3{edge, edge, edge}) {}

    double volume() const { return lengths.x * lengths.y * lengths.z; }
    double min_edge() const { return std::min({lengths.x, lengths.y, lengths.z}); }

    // component-wise wrap into [0, L)
    Vec3 wrap(const Vec3& r) const {
        Vec3 w;
        for (int a = 0; a < 3; ++a) {
            double l = lengths[a];
            w[a] = r[a] - l * std::floor(r[a] / l);
            if (w[a] >= l) w[a] = 0.0;  // guard against floor rounding at the edge
        }
        return w;
    }

    // nearest-image displacement, each component in [-L/2, L/2)
    Vec3 min_image(const Vec3& r) const {
        Vec3 m;
        for (int a = 0; a < 3; ++a) {
            double l = lengths[a];
            m[a] = r[a] - l * std::floor(r[a] / l + 0.5);
        }
        return m;
    }

    double min_image_dist2(const Vec3& a, const Vec3& b) const { return min_image(a - b).norm2(); }
};

}  // namespace ringmd
