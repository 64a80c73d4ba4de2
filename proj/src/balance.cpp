#include "ringmd/balance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ringmd/netsim.hpp"

namespace ringmd {

RingOrder serpentine_ring(const Int3& grid) {
    if (grid.x < 1 || grid.y < 1 || grid.z < 1)
        throw std::invalid_argument("serpentine_ring: grid dims must be >= 1");
    RingOrder ring;
    const int n = grid.product();
    ring.order.reserve(static_cast<std::size_t>(n));

    // x sweeps alternate per visited row, y sweeps alternate per layer
    int row_counter = 0;
    for (int z = 0; z < grid.z; ++z) {
        const bool y_fwd = z % 2 == 0;
        for (int yi = 0; yi < grid.y; ++yi, ++row_counter) {
            const int y = y_fwd ? yi : grid.y - 1 - yi;
            const bool x_fwd = row_counter % 2 == 0;
            for (int xi = 0; xi < grid.x; ++xi) {
                const int x = x_fwd ? xi : grid.x - 1 - xi;
                ring.order.push_back((z * grid.y + y) * grid.x + x);
            }
        }
    }

    ring.upstream.resize(static_cast<std::size_t>(n));
    ring.downstream.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int cur = ring.order[static_cast<std::size_t>(i)];
        ring.downstream[static_cast<std::size_t>(cur)] =
            ring.order[static_cast<std::size_t>((i + 1) % n)];
        ring.upstream[static_cast<std::size_t>(cur)] =
            ring.order[static_cast<std::size_t>((i + n - 1) % n)];
    }
    return ring;
}

long MigrationPlan::total_migrated() const {
    return std::accumulate(n_send.begin(), n_send.end(), 0L);
}

MigrationPlan plan_migration(const std::vector<long>& n_local, const std::vector<long>& n_goal,
                             const RingOrder& ring, PlanMode mode) {
    const std::size_t n = ring.size();
    if (n_local.size() != n || n_goal.size() != n)
        throw std::invalid_argument("plan_migration: count vectors must match the ring size");
    for (std::size_t i = 0; i < n; ++i)
        if (n_local[i] < 0 || n_goal[i] < 0)
            throw std::invalid_argument("plan_migration: counts must be non-negative");

    MigrationPlan plan;
    plan.n_local = n_local;
    plan.n_goal = n_goal;
    plan.n_send.assign(n, 0);

    auto send_of = [&](int cur) -> long {
        const long inherited = plan.n_send[static_cast<std::size_t>(ring.upstream[static_cast<std::size_t>(cur)])];
        long s = mode == PlanMode::corrected
                     ? n_local[static_cast<std::size_t>(cur)] + inherited - n_goal[static_cast<std::size_t>(cur)]
                     : n_goal[static_cast<std::size_t>(cur)] - n_local[static_cast<std::size_t>(cur)] + inherited;
        if (s < 0) s = 0;
        if (s > n_local[static_cast<std::size_t>(cur)]) s = n_local[static_cast<std::size_t>(cur)];
        return s;
    };

    for (int iter = 0; iter < 2; ++iter) {
        int cur = ring.order[0];
        for (std::size_t i = 0; i < n; ++i) {
            plan.n_send[static_cast<std::size_t>(cur)] = send_of(cur);
            cur = ring.downstream[static_cast<std::size_t>(cur)];
        }
    }

    // verification pass: fixed point and exact balance
    plan.feasible = true;
    {
        int cur = ring.order[0];
        for (std::size_t i = 0; i < n; ++i) {
            if (plan.n_send[static_cast<std::size_t>(cur)] != send_of(cur)) plan.feasible = false;
            cur = ring.downstream[static_cast<std::size_t>(cur)];
        }
    }
    for (std::size_t node = 0; node < n; ++node) {
        const long final_count = n_local[node] - plan.n_send[node] +
                                 plan.n_send[static_cast<std::size_t>(ring.upstream[node])];
        if (final_count != n_goal[node]) plan.feasible = false;
    }
    return plan;
}

MigrationPlan plan_migration(const std::vector<long>& n_local, long n_goal, const RingOrder& ring,
                             PlanMode mode) {
    return plan_migration(n_local, std::vector<long>(ring.size(), n_goal), ring, mode);
}

ImbalanceMetric imbalance_metric(const std::vector<long>& counts) {
    if (counts.empty()) throw std::invalid_argument("imbalance_metric: empty counts");
    const double mean =
        static_cast<double>(std::accumulate(counts.begin(), counts.end(), 0L)) / counts.size();
    ImbalanceMetric m;
    if (mean == 0.0) return m;
    double mx = 0.0, var = 0.0;
    for (long c : counts) {
        mx = std::max(mx, static_cast<double>(c));
        var += (c - mean) * (c - mean);
    }
    m.max_over_mean = mx / mean;
    m.stddev = std::sqrt(var / counts.size());
    return m;
}

namespace {

// donor atoms ranked by how close they sit to the recipient subdomain,
// ties broken by index, so the migrated set is deterministic
std::vector<int> pick_migrated(const MigrationPlan& plan, int donor, int recipient,
                               const System& system, const NodeTopology& topology,
                               const Decomposition& assignment) {
    const long count = plan.n_send[static_cast<std::size_t>(donor)];
    if (count == 0) return {};
    const Vec3 lo = topology.subdomain_lo(recipient);
    const Vec3 hi = topology.subdomain_hi(recipient);
    const Vec3 len = system.box.lengths;

    auto distance_to_recipient = [&](int atom) {
        const Vec3 p = system.box.wrap(system.atoms[static_cast<std::size_t>(atom)].position);
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            double best = len[a];
            for (int s = -1; s <= 1; ++s) {
                const double x = p[a] + s * len[a];
                double d = 0.0;
                if (x < lo[a]) d = lo[a] - x;
                else if (x > hi[a]) d = x - hi[a];
                best = std::min(best, d);
            }
            d2 += best * best;
        }
        return d2;
    };

    std::vector<int> atoms = assignment.atoms_of_node[static_cast<std::size_t>(donor)];
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(atoms.size());
    for (int a : atoms) ranked.emplace_back(distance_to_recipient(a), a);
    std::sort(ranked.begin(), ranked.end());
    atoms.clear();
    for (long i = 0; i < count; ++i) atoms.push_back(ranked[static_cast<std::size_t>(i)].second);
    return atoms;
}

}  // namespace

MigrationExecution apply_ghost_expansion(const MigrationPlan& plan, const RingOrder& ring,
                                         const System& system, const NodeTopology& topology,
                                         const Decomposition& assignment,
                                         const std::vector<GhostRegion>& ghosts,
                                         const NeighborList& nlist, Network* net) {
    if (!plan.feasible)
        throw std::invalid_argument("apply_ghost_expansion: plan is not feasible");
    MigrationExecution exec;
    exec.migrated.resize(ring.size());

    for (std::size_t donor = 0; donor < ring.size(); ++donor) {
        if (plan.n_send[donor] == 0) continue;
        const int recipient = ring.downstream[donor];
        auto atoms = pick_migrated(plan, static_cast<int>(donor), recipient, system, topology,
                                   assignment);

        // one-hop invariant: every migrated atom must already be a ghost of
        // the recipient
        std::set<int> recipient_ghost_atoms;
        for (const GhostEntry& e : ghosts[static_cast<std::size_t>(recipient)].entries)
            if (!e.is_wc) recipient_ghost_atoms.insert(e.index);
        for (int atom : atoms) {
            if (!recipient_ghost_atoms.count(atom))
                throw std::runtime_error(
                    "apply_ghost_expansion: migrated atom " + std::to_string(atom) +
                    " is not in the ghost region of node " + std::to_string(recipient) +
                    " (one-hop invariant violated)");
        }

        // the recipient widens its ghost region to cover the migrated atoms'
        // neighborhoods; charge the extra imports, no synchronous messages
        std::set<int> extra;
        for (int atom : atoms)
            for (const NeighborEntry& e : nlist.neighbors[static_cast<std::size_t>(atom)])
                if (!recipient_ghost_atoms.count(e.index) &&
                    assignment.node_of_atom[static_cast<std::size_t>(e.index)] != recipient)
                    extra.insert(e.index);
        exec.bytes += extra.size() * sizeof(GhostEntry);
        if (net && !extra.empty()) net->count_message(extra.size() * sizeof(GhostEntry));

        exec.migrated[donor] = std::move(atoms);
    }
    return exec;
}

MigrationExecution apply_forwarding(const MigrationPlan& plan, const RingOrder& ring,
                                    const System& system, const NodeTopology& topology,
                                    const Decomposition& assignment, const NeighborList& nlist,
                                    Network* net) {
    if (!plan.feasible) throw std::invalid_argument("apply_forwarding: plan is not feasible");
    MigrationExecution exec;
    exec.migrated.resize(ring.size());

    for (std::size_t donor = 0; donor < ring.size(); ++donor) {
        if (plan.n_send[donor] == 0) continue;
        const int recipient = ring.downstream[donor];
        auto atoms = pick_migrated(plan, static_cast<int>(donor), recipient, system, topology,
                                   assignment);

        std::size_t records = 0;
        for (int atom : atoms) records += 1 + nlist.neighbors[static_cast<std::size_t>(atom)].size();
        const std::size_t fwd_bytes = records * (sizeof(Vec3) + sizeof(double) + sizeof(int));
        const std::size_t ret_bytes = atoms.size() * sizeof(Vec3);
        exec.messages += 2;  // forward + returned forces
        exec.bytes += fwd_bytes + ret_bytes;
        if (net) {
            net->count_message(fwd_bytes);
            net->count_message(ret_bytes);
        }
        exec.migrated[donor] = std::move(atoms);
    }
    return exec;
}

}  // namespace ringmd
