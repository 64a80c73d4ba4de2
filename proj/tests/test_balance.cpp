#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "ringmd/balance.hpp"
#include "ringmd/netsim.hpp"
#include "ringmd/potential.hpp"
#include "ringmd/rng.hpp"

using namespace ringmd;

namespace {

bool grid_adjacent(const Int3& grid, int a, int b) {
    const Int3 ca{a % grid.x, (a / grid.x) % grid.y, a / (grid.x * grid.y)};
    const Int3 cb{b % grid.x, (b / grid.x) % grid.y, b / (grid.x * grid.y)};
    const int d = std::abs(ca.x - cb.x) + std::abs(ca.y - cb.y) + std::abs(ca.z - cb.z);
    return d == 1;
}

// exhaustive one-directional ring-flow search: sends s_i in [0, N_local_i]
// with N_local - s + s_up == goal everywhere; returns the minimal total or -1
long min_ring_flow(const std::vector<long>& local, const std::vector<long>& goal,
                   const RingOrder& ring) {
    const std::size_t n = ring.size();
    const long cap = *std::max_element(local.begin(), local.end()) * static_cast<long>(n);
    for (long c = 0; c <= cap; ++c) {
        // fix the send of the first ring node and propagate downstream
        std::vector<long> s(n, -1);
        const int start = ring.order[0];
        s[static_cast<std::size_t>(start)] = c;
        bool ok = c <= local[static_cast<std::size_t>(start)];
        int cur = ring.downstream[static_cast<std::size_t>(start)];
        while (ok && cur != start) {
            const long up = s[static_cast<std::size_t>(ring.upstream[static_cast<std::size_t>(cur)])];
            const long send = local[static_cast<std::size_t>(cur)] + up - goal[static_cast<std::size_t>(cur)];
            if (send < 0 || send > local[static_cast<std::size_t>(cur)]) ok = false;
            s[static_cast<std::size_t>(cur)] = send;
            cur = ring.downstream[static_cast<std::size_t>(cur)];
        }
        // wrap-around consistency for the start node
        if (ok) {
            const long up = s[static_cast<std::size_t>(ring.upstream[static_cast<std::size_t>(start)])];
            if (local[static_cast<std::size_t>(start)] + up - goal[static_cast<std::size_t>(start)] != c)
                ok = false;
        }
        if (ok) return std::accumulate(s.begin(), s.end(), 0L);
    }
    return -1;
}

}  // namespace

TEST_CASE("serpentine ring: degenerate and hand-enumerated cases") {
    RingOrder self = serpentine_ring({1, 1, 1});
    CHECK(self.order == std::vector<int>{0});
    CHECK(self.downstream[0] == 0);
    CHECK(self.upstream[0] == 0);

    // 2x2x1 boustrophedon
    RingOrder r = serpentine_ring({2, 2, 1});
    CHECK(r.order == std::vector<int>{0, 1, 3, 2});
}

TEST_CASE("serpentine ring adjacency on the 12-node 2x3x2 grid") {
    const Int3 grid{2, 3, 2};
    RingOrder r = serpentine_ring(grid);
    REQUIRE(r.order.size() == 12);
    std::set<int> seen(r.order.begin(), r.order.end());
    CHECK(seen.size() == 12);
    for (std::size_t i = 0; i + 1 < r.order.size(); ++i)
        CHECK(grid_adjacent(grid, r.order[i], r.order[i + 1]));
    // even-depth grids close the ring with an adjacent edge as well
    CHECK(grid_adjacent(grid, r.order.back(), r.order.front()));
    // upstream/downstream are inverse maps
    for (int node : r.order) {
        CHECK(r.downstream[static_cast<std::size_t>(r.upstream[static_cast<std::size_t>(node)])] ==
              node);
    }
}

TEST_CASE("serpentine adjacency holds for assorted grids") {
    for (const Int3& grid : {Int3{4, 1, 1}, Int3{3, 3, 1}, Int3{2, 2, 3}, Int3{4, 3, 2}}) {
        RingOrder r = serpentine_ring(grid);
        std::set<int> seen(r.order.begin(), r.order.end());
        CHECK(static_cast<int>(seen.size()) == grid.product());
        for (std::size_t i = 0; i + 1 < r.order.size(); ++i)
            CHECK(grid_adjacent(grid, r.order[i], r.order[i + 1]));
    }
}

TEST_CASE("plan: balanced input needs no migration") {
    RingOrder ring = serpentine_ring({4, 1, 1});
    auto plan = plan_migration({2, 2, 2, 2}, 2, ring, PlanMode::corrected);
    CHECK(plan.feasible);
    CHECK(plan.n_send == std::vector<long>{0, 0, 0, 0});
}

TEST_CASE("plan: corrected-mode hand trace [4,1,2,1] -> goal 2") {
    RingOrder ring = serpentine_ring({4, 1, 1});  // 0 -> 1 -> 2 -> 3 -> 0
    auto plan = plan_migration({4, 1, 2, 1}, 2, ring, PlanMode::corrected);
    CHECK(plan.feasible);
    CHECK(plan.n_send == std::vector<long>{2, 1, 1, 0});
    for (std::size_t i = 0; i < 4; ++i) {
        const long fin = plan.n_local[i] - plan.n_send[i] +
                         plan.n_send[static_cast<std::size_t>(ring.upstream[i])];
        CHECK(fin == 2);
    }
    CHECK(plan.total_migrated() == 4);
}

TEST_CASE("plan: clamped case [0,6,2,0] -> goal 2 reports infeasible") {
    RingOrder ring = serpentine_ring({4, 1, 1});
    auto plan = plan_migration({0, 6, 2, 0}, 2, ring, PlanMode::corrected);
    CHECK_FALSE(plan.feasible);
    // node 2 can forward at most its local count
    CHECK(plan.n_send[2] == 2);
    CHECK(plan.n_send[1] == 4);
}

TEST_CASE("plan: literal-printed recurrence zeroes surplus nodes") {
    RingOrder ring = serpentine_ring({4, 1, 1});
    auto plan = plan_migration({4, 1, 2, 1}, 2, ring, PlanMode::literal);
    // the printed sign sends nothing from the overloaded node, so the
    // distribution cannot reach the goal
    CHECK(plan.n_send[0] == 0);
    CHECK_FALSE(plan.feasible);
}

TEST_CASE("plan conserves atoms for random distributions in both modes") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 3 + rng.uniform_int(10);
        RingOrder ring = serpentine_ring({n, 1, 1});
        std::vector<long> local(static_cast<std::size_t>(n));
        for (auto& c : local) c = rng.uniform_int(40);
        const long total = std::accumulate(local.begin(), local.end(), 0L);
        std::vector<long> goal(static_cast<std::size_t>(n), total / n);
        for (long r = total % n, i = 0; r > 0; --r, ++i) ++goal[static_cast<std::size_t>(i)];

        for (PlanMode mode : {PlanMode::corrected, PlanMode::literal}) {
            auto plan = plan_migration(local, goal, ring, mode);
            long after = 0;
            for (std::size_t i = 0; i < local.size(); ++i) {
                CHECK(plan.n_send[i] >= 0);
                CHECK(plan.n_send[i] <= local[i]);
                after += local[i] - plan.n_send[i] +
                         plan.n_send[static_cast<std::size_t>(ring.upstream[i])];
            }
            CHECK(after == total);
            if (plan.feasible && mode == PlanMode::corrected) {
                for (std::size_t i = 0; i < local.size(); ++i) {
                    const long fin = local[i] - plan.n_send[i] +
                                     plan.n_send[static_cast<std::size_t>(ring.upstream[i])];
                    CHECK(fin == goal[i]);
                }
            }
        }
    }
}

TEST_CASE("feasible corrected plans achieve the exhaustive minimum flow") {
    Rng rng(77);
    int feasible_seen = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 3 + rng.uniform_int(4);  // rings of 3..6 nodes
        RingOrder ring = serpentine_ring({n, 1, 1});
        std::vector<long> local(static_cast<std::size_t>(n));
        for (auto& c : local) c = rng.uniform_int(12);
        const long total = std::accumulate(local.begin(), local.end(), 0L);
        if (total % n != 0) continue;  // uniform goals only
        std::vector<long> goal(static_cast<std::size_t>(n), total / n);

        auto plan = plan_migration(local, goal, ring, PlanMode::corrected);
        const long oracle = min_ring_flow(local, goal, ring);
        if (plan.feasible) {
            ++feasible_seen;
            REQUIRE(oracle >= 0);
            CHECK(plan.total_migrated() == oracle);
        }
    }
    CHECK(feasible_seen > 20);
}

TEST_CASE("imbalance metric") {
    CHECK(imbalance_metric({3, 3, 3}).max_over_mean == doctest::Approx(1.0));
    CHECK(imbalance_metric({4, 1, 2, 1}).max_over_mean == doctest::Approx(2.0));
    CHECK(imbalance_metric({5, 5}).stddev == doctest::Approx(0.0));
    CHECK_THROWS_AS(imbalance_metric({}), std::invalid_argument);
}

namespace {

struct BalanceFixture {
    System sys;
    NodeTopology topo;
    Decomposition decomp;
    NeighborList nlist;
    std::vector<GhostRegion> ghosts;
    RingOrder ring;

    explicit BalanceFixture(std::uint64_t seed, int waters = 48)
        : topo({2, 1, 1}, SimulationBox(14.0)) {
        WaterGenParams p;
        p.waters = waters;
        p.edge = {14.0, 14.0, 14.0};
        Rng rng(seed);
        sys = generate_water_system(p, rng);
        topo = NodeTopology({2, 1, 1}, sys.box);
        decomp = decompose(sys, topo);
        nlist = build_neighbor_list(sys, 4.0, 1.0);
        ghosts = exchange_ghosts(sys, topo, decomp, 5.0);
        ring = serpentine_ring({2, 1, 1});
    }

    std::vector<long> counts() const {
        std::vector<long> c;
        for (const auto& l : decomp.atoms_of_node) c.push_back(static_cast<long>(l.size()));
        return c;
    }
};

}  // namespace

TEST_CASE("ghost expansion: zero plan leaves assignment unchanged") {
    BalanceFixture fx(10);
    MigrationPlan plan;
    plan.n_local = fx.counts();
    plan.n_goal = plan.n_local;
    plan.n_send.assign(2, 0);
    plan.feasible = true;
    auto exec = apply_ghost_expansion(plan, fx.ring, fx.sys, fx.topo, fx.decomp, fx.ghosts,
                                      fx.nlist);
    for (const auto& m : exec.migrated) CHECK(m.empty());
    CHECK(exec.messages == 0);
}

TEST_CASE("ghost expansion: migrated forces equal the owner-computed oracle") {
    BalanceFixture fx(11);
    auto counts = fx.counts();
    const long total = counts[0] + counts[1];
    std::vector<long> goal{total / 2, total - total / 2};
    auto plan = plan_migration(counts, goal, fx.ring, PlanMode::corrected);
    REQUIRE(plan.feasible);

    Network net(fx.topo);
    auto exec = apply_ghost_expansion(plan, fx.ring, fx.sys, fx.topo, fx.decomp, fx.ghosts,
                                      fx.nlist, &net);

    ShortRangeModel model(ShortRangeModel::Kind::pair_analytic, 4.0);
    for (std::size_t donor = 0; donor < exec.migrated.size(); ++donor) {
        if (exec.migrated[donor].empty()) continue;
        const int recipient = fx.ring.downstream[donor];

        // the recipient's view: own atoms, regular ghosts, plus the widened
        // region covering the migrated atoms' neighborhoods
        std::set<int> visible;
        for (int ai : fx.decomp.atoms_of_node[static_cast<std::size_t>(recipient)])
            visible.insert(ai);
        for (const auto& e : fx.ghosts[static_cast<std::size_t>(recipient)].entries)
            if (!e.is_wc) visible.insert(e.index);
        std::set<int> migrated(exec.migrated[donor].begin(), exec.migrated[donor].end());
        for (int atom : migrated) {
            CHECK(visible.count(atom) == 1);  // one-hop invariant
            for (const auto& e : fx.nlist.neighbors[static_cast<std::size_t>(atom)])
                visible.insert(e.index);  // granted by the expansion
        }

        // recipient-side evaluation may touch only visible particles; the
        // result must match the donor's full-view computation exactly
        const Vec3 len = fx.sys.box.lengths;
        for (int atom : migrated) {
            Vec3 remote{};
            const Vec3 ri = fx.sys.atoms[static_cast<std::size_t>(atom)].position;
            for (const auto& e : fx.nlist.neighbors[static_cast<std::size_t>(atom)]) {
                REQUIRE(visible.count(e.index) == 1);
                const Vec3 rij =
                    fx.sys.atoms[static_cast<std::size_t>(e.index)].position +
                    Vec3{e.shift.x * len.x, e.shift.y * len.y, e.shift.z * len.z} - ri;
                const double r = rij.norm();
                if (r >= 4.0 || r == 0.0) continue;
                remote += rij * (model.pair_energy_deriv(r) / r);
            }
            std::vector<Vec3> owner_forces(fx.sys.atoms.size());
            model.evaluate_atom(atom, fx.sys, fx.nlist, owner_forces);
            // evaluate_atom splits each pair force half/half; the full force
            // on the atom is the sum over its own entries (full list)
            CHECK((owner_forces[static_cast<std::size_t>(atom)] - 0.5 * remote).norm() < 1e-15);
        }
    }
}

TEST_CASE("ghost expansion rejects a violated one-hop invariant") {
    BalanceFixture fx(12);
    auto counts = fx.counts();
    const long total = counts[0] + counts[1];
    auto plan = plan_migration(counts, {total / 2, total - total / 2}, fx.ring,
                               PlanMode::corrected);
    REQUIRE(plan.feasible);
    if (plan.total_migrated() == 0) return;
    // ghost regions built with a tiny extent cannot contain the migrated atoms
    auto thin_ghosts = exchange_ghosts(fx.sys, fx.topo, fx.decomp, 1e-6);
    CHECK_THROWS_AS(apply_ghost_expansion(plan, fx.ring, fx.sys, fx.topo, fx.decomp, thin_ghosts,
                                          fx.nlist),
                    std::runtime_error);
}

TEST_CASE("forwarding: two messages per donor edge and payload sizes") {
    BalanceFixture fx(13);
    auto counts = fx.counts();
    if (counts[0] == counts[1]) return;
    const long total = counts[0] + counts[1];
    auto plan = plan_migration(counts, {total / 2, total - total / 2}, fx.ring,
                               PlanMode::corrected);
    REQUIRE(plan.feasible);

    Network net(fx.topo);
    auto exec = apply_forwarding(plan, fx.ring, fx.sys, fx.topo, fx.decomp, fx.nlist, &net);
    std::size_t donors = 0;
    for (std::size_t d = 0; d < exec.migrated.size(); ++d)
        if (!exec.migrated[d].empty()) ++donors;
    CHECK(exec.messages == 2 * donors);
    CHECK(net.stats().totals().messages == 2 * donors);

    // payload records = migrated atoms + their neighbor entries
    for (std::size_t d = 0; d < exec.migrated.size(); ++d) {
        for (int atom : exec.migrated[d])
            CHECK(fx.nlist.neighbors[static_cast<std::size_t>(atom)].size() > 0);
    }
}

TEST_CASE("forwarding with zero migrations sends nothing") {
    BalanceFixture fx(14);
    MigrationPlan plan;
    plan.n_local = fx.counts();
    plan.n_goal = plan.n_local;
    plan.n_send.assign(2, 0);
    plan.feasible = true;
    Network net(fx.topo);
    auto exec = apply_forwarding(plan, fx.ring, fx.sys, fx.topo, fx.decomp, fx.nlist, &net);
    CHECK(exec.messages == 0);
    CHECK(net.stats().totals().messages == 0);
}

TEST_CASE("end-to-end: feasible rebalance reaches ratio 1.0") {
    Rng rng(55);
    for (int n : {4, 8, 16, 24}) {
        RingOrder ring = serpentine_ring({n, 1, 1});
        std::vector<long> local(static_cast<std::size_t>(n));
        // near-balanced distribution with moderate noise, always feasible
        for (auto& c : local) c = 40 + rng.uniform_int(10);
        const long total = std::accumulate(local.begin(), local.end(), 0L);
        std::vector<long> goal(static_cast<std::size_t>(n), total / n);
        for (long r = total % n, i = 0; r > 0; --r, ++i) ++goal[static_cast<std::size_t>(i)];

        auto plan = plan_migration(local, goal, ring, PlanMode::corrected);
        if (!plan.feasible) continue;
        std::vector<long> after(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < local.size(); ++i)
            after[i] = local[i] - plan.n_send[i] +
                       plan.n_send[static_cast<std::size_t>(ring.upstream[i])];
        const auto metric = imbalance_metric(after);
        if (total % n == 0) CHECK(metric.max_over_mean == doctest::Approx(1.0));
        CHECK(*std::max_element(after.begin(), after.end()) -
                  *std::min_element(after.begin(), after.end()) <=
              1);
    }
}
