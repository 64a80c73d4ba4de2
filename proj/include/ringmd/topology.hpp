#pragma once

#include <vector>

#include "ringmd/system.hpp"

namespace ringmd {

class Network;

struct RankId {
    int node = 0;
    int rank_in_node = 0;
    bool operator==(const RankId&) const = default;
};

// 3D grid of compute nodes; each node owns an axis-aligned subdomain and
// hosts ranks_per_node MPI-style ranks. Workload granularity is the node.
struct NodeTopology {
    Int3 grid{1, 1, 1};
    int ranks_per_node = 4;
    SimulationBox box;

    NodeTopology() = default;
    NodeTopology(const Int3& g, const SimulationBox& b, int rpn = 4);

    int node_count() const { return grid.product(); }
    Int3 node_coords(int node) const {
        return {node % grid.x, (node / grid.x) % grid.y, node / (grid.x * grid.y)};
    }
    int node_index(const Int3& c) const { return (c.z * grid.y + c.y) * grid.x + c.x; }

    Vec3 subdomain_lo(int node) const;
    Vec3 subdomain_hi(int node) const;

    // Owner of a wrapped position. An atom exactly on an internal face goes to
    // the lower-coordinate node; the face at coordinate 0 stays with node 0
    // (it is not an internal face).
    int owner_node(const Vec3& wrapped_position) const;
};

// Per-node particle assignment produced by decompose(); WCs follow their
// binding atom.
struct Decomposition {
    std::vector<std::vector<int>> atoms_of_node;  // atom indices
    std::vector<std::vector<int>> wcs_of_node;    // wc indices
    std::vector<int> node_of_atom;
};

Decomposition decompose(const System& system, const NodeTopology& topology);

// Imported copy of a non-local particle: index into the system's atom or WC
// array plus the periodic image shift under which it is near the subdomain.
struct GhostEntry {
    int index = 0;
    bool is_wc = false;
    Int3 shift;
    Vec3 position;  // shifted absolute position
};

struct GhostRegion {
    int owner_node = 0;
    double extent = 0.0;  // Angstrom beyond each face
    std::vector<GhostEntry> entries;
};

// Every particle (atom or WC, any periodic image) whose position falls within
// `extent` of a node's subdomain slab appears in that node's ghost region.
// Messages between node pairs are charged to `net` when provided, spread
// round-robin over the node's ranks. extent must stay below half the box.
std::vector<GhostRegion> exchange_ghosts(const System& system, const NodeTopology& topology,
                                         const Decomposition& assignment, double extent,
                                         Network* net = nullptr);

}  // namespace ringmd
