#pragma once

#include <vector>

#include "ringmd/neighbor.hpp"
#include "ringmd/topology.hpp"

namespace ringmd {

class Network;

// Closed directed ring over the node grid, built by serpentine scanning so
// consecutive nodes are grid-adjacent.
struct RingOrder {
    std::vector<int> order;       // node ids in ring order
    std::vector<int> upstream;    // indexed by node id
    std::vector<int> downstream;  // indexed by node id

    std::size_t size() const { return order.size(); }
};

RingOrder serpentine_ring(const Int3& node_grid);

enum class PlanMode {
    corrected,  // send = surplus + inherited (consistent with migrating excess downstream)
    literal,    // recurrence exactly as printed: goal - local + inherited
};

struct MigrationPlan {
    std::vector<long> n_local;
    std::vector<long> n_goal;
    std::vector<long> n_send;  // to the downstream neighbor
    bool feasible = false;

    long total_migrated() const;
};

// Two relaxation passes around the ring followed by a verification pass;
// infeasibility (clamped sends cannot reach the goal) is reported, not
// thrown, so callers can fall back to intra-node balancing.
MigrationPlan plan_migration(const std::vector<long>& n_local, const std::vector<long>& n_goal,
                             const RingOrder& ring, PlanMode mode);
MigrationPlan plan_migration(const std::vector<long>& n_local, long n_goal, const RingOrder& ring,
                             PlanMode mode);

struct ImbalanceMetric {
    double max_over_mean = 1.0;
    double stddev = 0.0;
};

ImbalanceMetric imbalance_metric(const std::vector<long>& counts);

// Execution of a feasible plan: which atoms each donor hands to its
// downstream neighbor this rebalance interval (ownership stays put; only the
// force computation migrates).
struct MigrationExecution {
    // migrated[d] = atom indices donor d's downstream neighbor computes
    std::vector<std::vector<int>> migrated;
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
};

// Ghost-region expansion strategy: migrated atoms must already sit in the
// recipient's ghost region (one-hop invariant, hard error otherwise); the
// recipient widens its ghost import toward the donor instead of receiving
// atom data in extra synchronous messages.
MigrationExecution apply_ghost_expansion(const MigrationPlan& plan, const RingOrder& ring,
                                         const System& system, const NodeTopology& topology,
                                         const Decomposition& assignment,
                                         const std::vector<GhostRegion>& ghosts,
                                         const NeighborList& nlist, Network* net = nullptr);

// Neighbor-list forwarding strategy: the donor packs the migrated atoms with
// their neighbor entries, the recipient returns the forces (two synchronous
// messages per donor-recipient pair).
MigrationExecution apply_forwarding(const MigrationPlan& plan, const RingOrder& ring,
                                    const System& system, const NodeTopology& topology,
                                    const Decomposition& assignment, const NeighborList& nlist,
                                    Network* net = nullptr);

}  // namespace ringmd
