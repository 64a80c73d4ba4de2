#include "ringmd/topology.hpp"

#include <cmath>
#include <stdexcept>

#include "ringmd/netsim.hpp"

namespace ringmd {

NodeTopology::NodeTopology(const Int3& g, const SimulationBox& b, int rpn)
    : grid(g), ranks_per_node(rpn), box(b) {
    if (g.x < 1 || g.y < 1 || g.z < 1)
        throw std::invalid_argument("NodeTopology: grid dims must be >= 1");
    if (rpn < 1) throw std::invalid_argument("NodeTopology: ranks_per_node must be >= 1");
}

Vec3 NodeTopology::subdomain_lo(int node) const {
    Int3 c = node_coords(node);
    return {c.x * box.lengths.x / grid.x, c.y * box.lengths.y / grid.y,
            c.z * box.lengths.z / grid.z};
}

Vec3 NodeTopology::subdomain_hi(int node) const {
    Int3 c = node_coords(node);
    return {(c.x + 1) * box.lengths.x / grid.x, (c.y + 1) * box.lengths.y / grid.y,
            (c.z + 1) * box.lengths.z / grid.z};
}

int NodeTopology::owner_node(const Vec3& p) const {
    Int3 c;
    for (int a = 0; a < 3; ++a) {
        const double width = box.lengths[a] / grid[a];
        int i = static_cast<int>(p[a] / width);
        if (i >= grid[a]) i = grid[a] - 1;
        // exact hit on an internal face -> lower-coordinate node
        if (i > 0 && p[a] == i * width) --i;
        c[a] = i;
    }
    return node_index(c);
}

Decomposition decompose(const System& system, const NodeTopology& topology) {
    Decomposition d;
    const int nodes = topology.node_count();
    d.atoms_of_node.resize(nodes);
    d.wcs_of_node.resize(nodes);
    d.node_of_atom.resize(system.atoms.size());

    for (std::size_t i = 0; i < system.atoms.size(); ++i) {
        const int node = topology.owner_node(system.box.wrap(system.atoms[i].position));
        d.node_of_atom[i] = node;
        d.atoms_of_node[node].push_back(static_cast<int>(i));
    }
    for (std::size_t w = 0; w < system.wcs.size(); ++w) {
        const int ai = system.atom_index(system.wcs[w].binding_atom_id);
        d.wcs_of_node[d.node_of_atom[ai]].push_back(static_cast<int>(w));
    }
    return d;
}

namespace {

// does `pos + shift*L` fall inside [lo - extent, hi + extent] on every axis?
bool in_expanded_slab(const Vec3& pos, const Int3& shift, const Vec3& lo, const Vec3& hi,
                      const Vec3& box_len, double extent) {
    for (int a = 0; a < 3; ++a) {
        const double x = pos[a] + shift[a] * box_len[a];
        if (x < lo[a] - extent || x > hi[a] + extent) return false;
    }
    return true;
}

}  // namespace

std::vector<GhostRegion> exchange_ghosts(const System& system, const NodeTopology& topology,
                                         const Decomposition& assignment, double extent,
                                         Network* net) {
    if (!(extent > 0.0)) throw std::invalid_argument("exchange_ghosts: extent must be positive");
    if (extent > 0.5 * system.box.min_edge())
        throw std::invalid_argument("exchange_ghosts: extent beyond half the box is ill-defined");

    const int nodes = topology.node_count();
    const Vec3 len = system.box.lengths;
    std::vector<GhostRegion> regions(nodes);

    // WC absolute positions resolved once
    std::vector<Vec3> wc_pos(system.wcs.size());
    for (std::size_t w = 0; w < system.wcs.size(); ++w) wc_pos[w] = system.wc_position(system.wcs[w]);

    std::vector<int> rank_counter(nodes, 0);
    for (int dst = 0; dst < nodes; ++dst) {
        GhostRegion& region = regions[dst];
        region.owner_node = dst;
        region.extent = extent;
        const Vec3 lo = topology.subdomain_lo(dst);
        const Vec3 hi = topology.subdomain_hi(dst);

        for (int src = 0; src < nodes; ++src) {
            if (src == dst) continue;
            std::size_t sent = 0;
            auto scan = [&](int index, bool is_wc, const Vec3& raw_pos) {
                const Vec3 pos = system.box.wrap(raw_pos);
                for (int sx = -1; sx <= 1; ++sx)
                    for (int sy = -1; sy <= 1; ++sy)
                        for (int sz = -1; sz <= 1; ++sz) {
                            const Int3 shift{sx, sy, sz};
                            if (!in_expanded_slab(pos, shift, lo, hi, len, extent)) continue;
                            region.entries.push_back(
                                {index, is_wc,
                                 shift,
                                 {pos.x + sx * len.x, pos.y + sy * len.y, pos.z + sz * len.z}});
                            ++sent;
                        }
            };
            for (int ai : assignment.atoms_of_node[src]) scan(ai, false, system.atoms[ai].position);
            for (int wi : assignment.wcs_of_node[src]) scan(wi, true, wc_pos[wi]);

            if (net && sent > 0) {
                // one batched message per node pair, handled by the next rank
                // of the destination node in round-robin order
                net->count_message(sent * (sizeof(GhostEntry) + sizeof(double)));
                rank_counter[dst] = (rank_counter[dst] + 1) % topology.ranks_per_node;
            }
        }
    }
    return regions;
}

}  // namespace ringmd
