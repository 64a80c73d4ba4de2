#pragma once

#include <vector>

#include "ringmd/system.hpp"

namespace ringmd {

// Full (symmetric) Verlet list over atoms. Each entry stores the neighbor's
// atom index plus the periodic image shift that brings the neighbor next to
// the owner, so r_ij = pos[j] + shift*L - pos[i] without re-wrapping.
struct NeighborEntry {
    int index = 0;
    Int3 shift;
};

struct NeighborList {
    double cutoff = 6.0;  // Angstrom
    double skin = 2.0;    // Angstrom
    int rebuild_interval = 50;
    std::vector<std::vector<NeighborEntry>> neighbors;  // indexed by atom index

    double reach() const { return cutoff + skin; }
    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto& l : neighbors) n += l.size();
        return n / 2;
    }
};

// Preallocation hints per species (soft, not limits)
inline constexpr int kNeighborReserveO = 46;
inline constexpr int kNeighborReserveH = 92;

// Cell-binned build; includes exactly the pairs with minimum-image distance
// < cutoff + skin. Throws if cutoff + skin >= half the smallest box edge.
NeighborList build_neighbor_list(const System& system, double cutoff, double skin,
                                 int rebuild_interval = 50);

}  // namespace ringmd
