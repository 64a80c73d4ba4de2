#include "ringmd/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ringmd {

namespace {

// simulated cost-model constants (time units per work item; the network hop
// is 0.2 in the same units)
constexpr double kCostDwFwdPerNeighbor = 2e-6;
constexpr double kCostSrPerNeighbor = 6e-6;
constexpr double kCostSpreadPerPoint = 1.5e-7;  // per particle per spline point
constexpr double kCostMeshPerPoint = 5e-8;
constexpr double kCostIntegratePerAtom = 1e-7;
constexpr double kCostRebuildPerAtom = 1.2e-6;

double host_seconds(std::chrono::steady_clock::time_point a,
                    std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace

std::vector<std::string> RunConfig::validate(const System& system) const {
    std::vector<std::string> errors;
    if (steps < 0) errors.push_back("steps must be >= 0");
    if (!(dt > 0.0)) errors.push_back("dt must be positive");
    if (warmup < 0) errors.push_back("warmup must be >= 0");
    if (t_target <= 0.0 && ensemble == Ensemble::nvt_rescale)
        errors.push_back("t_target must be positive for the NVT ensemble");
    const bool topology_ok = topology.x >= 1 && topology.y >= 1 && topology.z >= 1;
    if (!topology_ok) errors.push_back("topology dims must be >= 1");
    if (ranks_per_node < 1) errors.push_back("ranks_per_node must be >= 1");
    if (workers < 1) errors.push_back("workers must be >= 1");
    if (!(cutoff > 0.0)) errors.push_back("cutoff must be positive");
    if (!(model_range > 0.0) || model_range > cutoff)
        errors.push_back("model_range must be positive and at most the neighbor cutoff");
    if (sr_kind == ShortRangeModel::Kind::pair_analytic && !(pair.sigma < model_range))
        errors.push_back("pair sigma must sit inside the model range");
    if (skin < 0.0) errors.push_back("skin must be >= 0");
    if (rebuild_interval < 1) errors.push_back("rebuild_interval must be >= 1");
    if (rebalance_interval < 1) errors.push_back("rebalance_interval must be >= 1");
    if (cutoff + skin >= 0.5 * system.box.min_edge())
        errors.push_back("cutoff + skin must stay below half the smallest box edge");
    for (int a = 0; topology_ok && a < 3; ++a) {
        if (ewald.mesh[a] % topology[a] != 0)
            errors.push_back("mesh dim " + std::to_string(ewald.mesh[a]) +
                             " not divisible by topology dim " + std::to_string(topology[a]));
        else if (ewald.mesh[a] / topology[a] < 4)
            errors.push_back("fewer than 4 mesh points per node along axis " + std::to_string(a));
    }
    try {
        ewald.validate(system.box);
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    if (synthetic.enabled &&
        (synthetic.t_dw_fwd < 0 || synthetic.t_sr_bwd < 0 || synthetic.t_lr < 0))
        errors.push_back("synthetic phase times must be >= 0");
    return errors;
}

Engine::Engine(System system, const RunConfig& config)
    : system_(std::move(system)), config_(config) {
    auto errors = config_.validate(system_);
    if (!errors.empty()) {
        std::string all = "invalid run configuration:";
        for (const auto& e : errors) all += "\n  - " + e;
        throw std::invalid_argument(all);
    }

    topology_ = NodeTopology(config_.topology, system_.box, config_.ranks_per_node);
    kgrid_ = KGrid(config_.ewald.mesh, config_.topology, system_.box.lengths, config_.ewald.kcut);
    sr_model_ = std::make_unique<ShortRangeModel>(config_.sr_kind, config_.model_range,
                                                  config_.pair, config_.mlp);
    dw_model_ = WannierModel{config_.wc_amplitude, config_.model_range};
    ring_ = serpentine_ring(config_.topology);

    net_ = std::make_unique<Network>(topology_);
    DistributedDft::Options opt;
    opt.mode = config_.payload_mode;
    dft_ = std::make_unique<DistributedDft>(kgrid_, *net_, opt);
    pppm_ = std::make_unique<Pppm>(kgrid_, config_.ewald, *dft_, *net_);

    wc_of_atom_.assign(system_.atoms.size(), -1);
    for (std::size_t w = 0; w < system_.wcs.size(); ++w)
        wc_of_atom_[static_cast<std::size_t>(system_.atom_index(system_.wcs[w].binding_atom_id))] =
            static_cast<int>(w);

    system_.wrap_all();
    refresh_neighbor_structures();
    auto pass = compute_forces();
    prev_forces_ = std::move(pass.total);
    e_sr_last_ = pass.e_sr;
    e_gt_last_ = pass.e_gt;
}

void Engine::refresh_neighbor_structures() {
    nlist_ = build_neighbor_list(system_, config_.cutoff, config_.skin, config_.rebuild_interval);
    decomp_ = decompose(system_, topology_);
    net_->set_phase("comm");
    ghosts_ = exchange_ghosts(system_, topology_, decomp_, config_.cutoff + config_.skin,
                              net_.get());

    charge_owners_.assign(static_cast<std::size_t>(topology_.node_count()), {});
    for (int node = 0; node < topology_.node_count(); ++node) {
        auto& list = charge_owners_[static_cast<std::size_t>(node)];
        for (int ai : decomp_.atoms_of_node[static_cast<std::size_t>(node)]) list.push_back(ai);
        for (int wi : decomp_.wcs_of_node[static_cast<std::size_t>(node)])
            list.push_back(static_cast<int>(system_.atoms.size()) + wi);
        std::sort(list.begin(), list.end());
    }
    // node ownership changed; any active compute migration is stale
    migration_active_ = false;
    migration_ = MigrationExecution{};
    scratch_.others_work += kCostRebuildPerAtom * static_cast<double>(system_.atoms.size());
}

void Engine::maybe_rebalance() {
    if (config_.balance_mode == BalanceMode::off || topology_.node_count() < 2) return;

    std::vector<long> counts(static_cast<std::size_t>(topology_.node_count()));
    for (std::size_t n = 0; n < counts.size(); ++n)
        counts[n] = static_cast<long>(decomp_.atoms_of_node[n].size());

    const bool interval_due = global_step_ % config_.rebalance_interval == 0;
    const bool threshold_due =
        !migration_active_ &&
        imbalance_metric(counts).max_over_mean > config_.imbalance_threshold;
    if (!interval_due && !threshold_due) return;
    migration_active_ = false;
    migration_ = MigrationExecution{};

    // one allgather per rebalance event
    net_->set_phase("comm");
    std::vector<int> nodes(counts.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<int>(i);
    auto gathered = net_->allgather(nodes, counts);

    const long total = std::accumulate(gathered.begin(), gathered.end(), 0L);
    std::vector<long> goal(gathered.size(), total / static_cast<long>(gathered.size()));
    // distribute the remainder deterministically over the first ring nodes
    long rem = total % static_cast<long>(gathered.size());
    for (std::size_t i = 0; rem > 0; ++i, --rem)
        ++goal[static_cast<std::size_t>(ring_.order[i])];

    const PlanMode mode = config_.balance_mode == BalanceMode::ring_corrected
                              ? PlanMode::corrected
                              : PlanMode::literal;
    MigrationPlan plan = plan_migration(gathered, goal, ring_, mode);
    if (!plan.feasible) return;  // fall back to intra-node balance (node-internal)

    if (config_.balance_strategy == BalanceStrategy::ghost_expansion)
        migration_ = apply_ghost_expansion(plan, ring_, system_, topology_, decomp_, ghosts_,
                                           nlist_, net_.get());
    else
        migration_ = apply_forwarding(plan, ring_, system_, topology_, decomp_, nlist_,
                                      net_.get());
    migration_active_ = true;
}

Engine::ForcePass Engine::compute_forces() {
    const std::size_t n_atoms = system_.atoms.size();
    ForcePass pass;
    pass.terms.f_short.assign(n_atoms, Vec3{});
    pass.terms.f_chain.assign(n_atoms, Vec3{});

    auto t0 = std::chrono::steady_clock::now();

    // (1) DW forward on the worker pool: fix the WC displacements
    double dw_fwd_work = 0.0;
    for (std::size_t w = 0; w < system_.wcs.size(); ++w) {
        const int ai = system_.atom_index(system_.wcs[w].binding_atom_id);
        system_.wcs[w].displacement = dw_forward(ai, system_, nlist_, dw_model_);
        dw_fwd_work += 1.0 + static_cast<double>(nlist_.neighbors[static_cast<std::size_t>(ai)].size());
    }
    scratch_.dw_fwd_work += dw_fwd_work * kCostDwFwdPerNeighbor /
                            std::max(1, config_.workers);
    auto t1 = std::chrono::steady_clock::now();
    scratch_.host_dw_fwd += host_seconds(t0, t1);

    // (2) long-range lane: intra-node gather, PPPM, scatter
    net_->set_phase("comm");
    for (int node = 0; node < topology_.node_count(); ++node) {
        const std::size_t particles = charge_owners_[static_cast<std::size_t>(node)].size();
        if (topology_.ranks_per_node > 1 && particles > 0) {
            // ranks hand their particle slices to the long-range rank
            std::vector<int> group(static_cast<std::size_t>(topology_.ranks_per_node));
            for (std::size_t r = 0; r < group.size(); ++r) group[r] = static_cast<int>(r);
            std::vector<std::uint64_t> slice_sizes(group.size(),
                                                   static_cast<std::uint64_t>(particles) * 32 /
                                                       group.size());
            net_->gather_to(RankId{node, topology_.ranks_per_node - 1}, group, slice_sizes);
        }
    }
    auto t2 = std::chrono::steady_clock::now();
    scratch_.host_comm += host_seconds(t1, t2);

    net_->set_phase("kspace");
    std::vector<Vec3> wc_positions(system_.wcs.size());
    for (std::size_t w = 0; w < system_.wcs.size(); ++w)
        wc_positions[w] = system_.wc_position(system_.wcs[w]);
    const ChargeView charges = collect_charges(system_, wc_positions);

    auto charge_bricks = pppm_->spread(charges, charge_owners_);
    auto solved = pppm_->solve(std::move(charge_bricks));
    KSpaceGradients kgrad = pppm_->gather(solved, charges, charge_owners_);
    pass.e_gt = kgrad.energy;
    pass.terms.ion_grad = std::move(kgrad.ion_grad);
    pass.terms.wc_grad = std::move(kgrad.wc_grad);

    const int p = config_.ewald.order;
    scratch_.kspace_compute +=
        solved.sim_time +
        kCostSpreadPerPoint * static_cast<double>(charges.size()) * p * p * p * 2.0 +
        kCostMeshPerPoint * static_cast<double>(kgrid_.mesh.product()) * 5.0;
    auto t3 = std::chrono::steady_clock::now();
    scratch_.host_kspace += host_seconds(t2, t3);

    net_->set_phase("comm");
    for (int node = 0; node < topology_.node_count(); ++node) {
        const std::size_t particles = charge_owners_[static_cast<std::size_t>(node)].size();
        if (topology_.ranks_per_node > 1 && particles > 0) {
            std::vector<int> group(static_cast<std::size_t>(topology_.ranks_per_node));
            for (std::size_t r = 0; r < group.size(); ++r) group[r] = static_cast<int>(r);
            std::vector<std::uint64_t> slice_sizes(group.size(),
                                                   static_cast<std::uint64_t>(particles) * 24 /
                                                       group.size());
            net_->scatter_from(RankId{node, topology_.ranks_per_node - 1}, group, slice_sizes);
        }
    }
    // recurring per-step forwarding messages while a migration is active
    if (migration_active_ && config_.balance_strategy == BalanceStrategy::forwarding) {
        for (std::size_t donor = 0; donor < migration_.migrated.size(); ++donor) {
            const auto& atoms = migration_.migrated[donor];
            if (atoms.empty()) continue;
            std::size_t records = 0;
            for (int a : atoms) records += 1 + nlist_.neighbors[static_cast<std::size_t>(a)].size();
            net_->count_message(records * 40);
            net_->count_message(atoms.size() * sizeof(Vec3));
        }
    }
    auto t4 = std::chrono::steady_clock::now();
    scratch_.host_comm += host_seconds(t3, t4);

    // (3) worker segment: short-range energy/forces and the DW Jacobians
    pass.e_sr = sr_model_->evaluate(system_, nlist_, pass.terms.f_short);
    std::vector<WannierJacobian> jacobians;
    jacobians.reserve(system_.wcs.size());
    for (std::size_t w = 0; w < system_.wcs.size(); ++w)
        jacobians.push_back(dw_jacobian(
            system_.atom_index(system_.wcs[w].binding_atom_id), system_, nlist_, dw_model_));

    // per-node work, shifted by any active migration, sets the worker-lane time
    std::vector<double> node_work(static_cast<std::size_t>(topology_.node_count()), 0.0);
    for (std::size_t i = 0; i < n_atoms; ++i) {
        int owner = decomp_.node_of_atom[i];
        if (migration_active_) {
            for (std::size_t donor = 0; donor < migration_.migrated.size(); ++donor) {
                const auto& m = migration_.migrated[donor];
                if (std::find(m.begin(), m.end(), static_cast<int>(i)) != m.end()) {
                    owner = ring_.downstream[donor];
                    break;
                }
            }
        }
        node_work[static_cast<std::size_t>(owner)] +=
            1.0 + static_cast<double>(nlist_.neighbors[i].size());
    }
    scratch_.sr_bwd_work += *std::max_element(node_work.begin(), node_work.end()) *
                            kCostSrPerNeighbor / std::max(1, config_.workers);
    auto t5 = std::chrono::steady_clock::now();
    scratch_.host_dw_bwd += host_seconds(t4, t5);

    // (4) assembly: contract DW Jacobians with dE/dW and sum the terms
    for (std::size_t w = 0; w < system_.wcs.size(); ++w)
        dw_backward(jacobians[w], pass.terms.wc_grad[w], pass.terms.f_chain);
    pass.total = assemble_forces(system_, pass.terms);
    scratch_.others_work += kCostIntegratePerAtom * static_cast<double>(n_atoms);
    auto t6 = std::chrono::steady_clock::now();
    scratch_.host_others += host_seconds(t5, t6);
    return pass;
}

PhaseTimings Engine::finalize_timings(bool overlap_enabled) const {
    PhaseTimings t;
    if (config_.synthetic.enabled) {
        t.dw_fwd = config_.synthetic.t_dw_fwd;
        t.dw_bwd_dp = config_.synthetic.t_sr_bwd;
        t.kspace = config_.synthetic.t_lr;
    } else {
        t.dw_fwd = scratch_.dw_fwd_work;
        t.dw_bwd_dp = scratch_.sr_bwd_work;
        // lane view: DFT makespans plus modeled mesh work (NetStats keeps the
        // raw per-operation chain totals separately)
        t.kspace = scratch_.kspace_compute;
    }
    t.comm = scratch_.net_comm;
    t.others = scratch_.others_work;

    if (overlap_enabled) {
        const double lane = t.kspace;
        const double visible = std::max(0.0, lane - t.dw_bwd_dp);
        t.hidden_kspace = lane - visible;
        t.kspace = visible;
    }
    t.host_kspace = scratch_.host_kspace;
    t.host_comm = scratch_.host_comm;
    t.host_dw_fwd = scratch_.host_dw_fwd;
    t.host_dw_bwd_dp = scratch_.host_dw_bwd;
    t.host_others = scratch_.host_others;
    return t;
}

void Engine::step() {
    ++global_step_;
    scratch_ = TimingScratch{};
    const double comm0 = net_->stats().phase("comm").sim_time;
    auto t0 = std::chrono::steady_clock::now();

    const double dt = config_.dt;
    const std::size_t n = system_.atoms.size();

    // half kick + drift
    for (std::size_t i = 0; i < n; ++i) {
        Atom& a = system_.atoms[i];
        a.velocity += prev_forces_[i] * (0.5 * dt / species_mass(a.species));
        a.position += a.velocity * dt;
        if (!std::isfinite(a.velocity.x + a.velocity.y + a.velocity.z) ||
            !std::isfinite(a.position.x + a.position.y + a.position.z))
            throw std::runtime_error("step " + std::to_string(global_step_) +
                                     ": non-finite velocity or position on atom " +
                                     std::to_string(a.id) +
                                     " (unstable configuration or too large dt)");
    }
    system_.wrap_all();
    auto t1 = std::chrono::steady_clock::now();
    scratch_.host_others += host_seconds(t0, t1);

    if (global_step_ % config_.rebuild_interval == 0) refresh_neighbor_structures();
    maybe_rebalance();

    auto pass = compute_forces();
    scratch_.net_comm = net_->stats().phase("comm").sim_time - comm0;

    auto t2 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) {
        Atom& a = system_.atoms[i];
        a.velocity += pass.total[i] * (0.5 * dt / species_mass(a.species));
    }

    if (config_.ensemble == Ensemble::nvt_rescale && n > 0) {
        const double t_now =
            2.0 * kinetic_energy() / (3.0 * static_cast<double>(n) * units::k_boltzmann);
        if (t_now > 0.0) {
            const double lambda =
                std::sqrt(1.0 + config_.thermostat_relax * (config_.t_target / t_now - 1.0));
            for (auto& a : system_.atoms) a.velocity *= lambda;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& v = system_.atoms[i].velocity;
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
            throw std::runtime_error("step " + std::to_string(global_step_) +
                                     ": non-finite velocity on atom " +
                                     std::to_string(system_.atoms[i].id) +
                                     " (unstable configuration or too large dt)");
    }

    prev_forces_ = std::move(pass.total);
    e_sr_last_ = pass.e_sr;
    e_gt_last_ = pass.e_gt;
    scratch_.host_others += host_seconds(t2, std::chrono::steady_clock::now());
}

double Engine::kinetic_energy() const {
    double ke = 0.0;
    for (const auto& a : system_.atoms)
        ke += 0.5 * species_mass(a.species) * a.velocity.norm2();
    return ke;
}

StepRecord Engine::snapshot_record(int step_index) {
    StepRecord rec;
    rec.step = step_index;
    rec.e_sr = e_sr_last_;
    rec.e_gt = e_gt_last_;
    rec.kinetic = kinetic_energy();
    rec.temperature =
        system_.atoms.empty()
            ? 0.0
            : 2.0 * rec.kinetic /
                  (3.0 * static_cast<double>(system_.atoms.size()) * units::k_boltzmann);
    rec.timings = finalize_timings(config_.overlap);
    return rec;
}

std::vector<StepRecord> Engine::run() {
    for (int w = 0; w < config_.warmup; ++w) step();

    std::vector<StepRecord> records;
    records.reserve(static_cast<std::size_t>(config_.steps) + 1);
    scratch_ = TimingScratch{};
    records.push_back(snapshot_record(0));
    for (int s = 1; s <= config_.steps; ++s) {
        step();
        records.push_back(snapshot_record(s));
    }
    return records;
}

void write_energy_csv(const std::string& path, const std::vector<StepRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    out << "step,e_sr,e_gt,e_total,temperature\n";
    for (const auto& r : records)
        out << r.step << "," << r.e_sr << "," << r.e_gt << "," << r.total_energy() << ","
            << r.temperature << "\n";
}

void write_timings_csv(const std::string& path, const std::vector<StepRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    out << "step,kspace,comm,dw_fwd,dw_bwd_dp_all,others\n";
    for (const auto& r : records)
        out << r.step << "," << r.timings.kspace << "," << r.timings.comm << ","
            << r.timings.dw_fwd << "," << r.timings.dw_bwd_dp << "," << r.timings.others << "\n";
}

PerformanceReport make_performance_report(const std::vector<StepRecord>& records, double dt_fs) {
    if (records.empty()) throw std::invalid_argument("performance report needs >= 1 record");
    PerformanceReport rep;
    // skip the step-0 snapshot when more data exists
    const std::size_t begin = records.size() > 1 ? 1 : 0;
    const std::size_t n = records.size() - begin;

    double sim_total = 0.0, host_total = 0.0;
    std::vector<double> series[5];
    for (std::size_t i = begin; i < records.size(); ++i) {
        const PhaseTimings& t = records[i].timings;
        const double vals[5] = {t.kspace, t.comm, t.dw_fwd, t.dw_bwd_dp, t.others};
        for (int c = 0; c < 5; ++c) {
            rep.mean[c] += vals[c];
            series[c].push_back(vals[c]);
        }
        sim_total += t.total();
        host_total += t.host_total();
        rep.hidden_kspace_total += t.hidden_kspace;
    }
    for (int c = 0; c < 5; ++c) {
        rep.mean[c] /= static_cast<double>(n);
        std::sort(series[c].begin(), series[c].end());
        rep.p50[c] = series[c][(series[c].size() - 1) / 2];
        rep.p95[c] = series[c][static_cast<std::size_t>(0.95 * (series[c].size() - 1))];
    }
    rep.sim_step_mean = sim_total / static_cast<double>(n);
    rep.host_step_mean = host_total / static_cast<double>(n);
    const double simulated_ns = dt_fs * static_cast<double>(n) * 1e-6;
    if (sim_total > 0.0) rep.ns_per_day_sim = simulated_ns / (sim_total / 86400.0);
    if (host_total > 0.0) rep.ns_per_day_host = simulated_ns / (host_total / 86400.0);
    return rep;
}

std::string performance_report_text(const PerformanceReport& rep) {
    static const char* names[5] = {"kspace", "comm", "dw_fwd", "dw_bwd+dp_all", "others"};
    std::ostringstream os;
    os.precision(6);
    os << "phase            mean        p50         p95\n";
    for (int c = 0; c < 5; ++c) {
        os << names[c];
        for (std::size_t pad = std::string(names[c]).size(); pad < 14; ++pad) os << ' ';
        os << "  " << rep.mean[c] << "  " << rep.p50[c] << "  " << rep.p95[c] << "\n";
    }
    os << "step mean: " << rep.sim_step_mean << " sim units, " << rep.host_step_mean
       << " host s\n";
    os << "hidden kspace (overlap-masked) total: " << rep.hidden_kspace_total << " sim units\n";
    os << "ns/day: " << rep.ns_per_day_sim << " (simulated clock), " << rep.ns_per_day_host
       << " (host clock)\n";
    return os.str();
}

}  // namespace ringmd
