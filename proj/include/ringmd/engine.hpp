#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ringmd/balance.hpp"
#include "ringmd/dft.hpp"
#include "ringmd/ewald.hpp"
#include "ringmd/neighbor.hpp"
#include "ringmd/netsim.hpp"
#include "ringmd/potential.hpp"
#include "ringmd/pppm.hpp"
#include "ringmd/system.hpp"
#include "ringmd/topology.hpp"

namespace ringmd {

enum class Ensemble { nve, nvt_rescale };
enum class BalanceMode { off, ring_corrected, ring_literal };
enum class BalanceStrategy { ghost_expansion, forwarding };

// fixed per-step phase costs for overlap studies; replaces the work-based
// model when enabled
struct SyntheticTiming {
    bool enabled = false;
    double t_dw_fwd = 0.0;
    double t_sr_bwd = 0.0;  // short-range + backprop worker segment
    double t_lr = 0.0;      // long-range lane
};

struct RunConfig {
    int steps = 100;
    double dt = 1.0;  // fs
    Ensemble ensemble = Ensemble::nvt_rescale;
    double t_target = 300.0;  // K
    double thermostat_relax = 0.1;
    int warmup = 10;
    std::uint64_t seed = 1;

    Int3 topology{1, 1, 1};
    int ranks_per_node = 4;
    int workers = 4;  // worker-lane core count in the timing model
    bool overlap = true;
    PayloadMode payload_mode = PayloadMode::three_f64;

    EwaldParams ewald{0.47, 0.6, {24, 24, 24}, 4};
    double cutoff = 6.0;  // neighbor-list cutoff, Angstrom
    double skin = 2.0;
    int rebuild_interval = 50;
    // interaction range of the analytic surrogates; at most the list cutoff
    double model_range = 3.0;

    ShortRangeModel::Kind sr_kind = ShortRangeModel::Kind::pair_analytic;
    PairParams pair;
    MlpParams mlp;
    double wc_amplitude = 0.05;

    BalanceMode balance_mode = BalanceMode::off;
    BalanceStrategy balance_strategy = BalanceStrategy::ghost_expansion;
    int rebalance_interval = 50;
    double imbalance_threshold = 1.25;

    SyntheticTiming synthetic;

    // all problems collected, not just the first
    std::vector<std::string> validate(const System& system) const;
};

// Simulated-clock durations of the five step phases; they tile the step
// exactly (under overlap the kspace entry is the unhidden remainder).
struct PhaseTimings {
    double kspace = 0.0;
    double comm = 0.0;
    double dw_fwd = 0.0;
    double dw_bwd_dp = 0.0;
    double others = 0.0;
    double hidden_kspace = 0.0;  // overlap-masked lane time (not part of the sum)

    // host wall-clock seconds per phase, measured sequentially
    double host_kspace = 0.0;
    double host_comm = 0.0;
    double host_dw_fwd = 0.0;
    double host_dw_bwd_dp = 0.0;
    double host_others = 0.0;

    double total() const { return kspace + comm + dw_fwd + dw_bwd_dp + others; }
    double host_total() const {
        return host_kspace + host_comm + host_dw_fwd + host_dw_bwd_dp + host_others;
    }
};

struct StepRecord {
    int step = 0;
    double e_sr = 0.0;
    double e_gt = 0.0;
    double kinetic = 0.0;
    double temperature = 0.0;
    PhaseTimings timings;

    double total_energy() const { return e_sr + e_gt + kinetic; }
};

class Engine {
  public:
    Engine(System system, const RunConfig& config);

    // one velocity-Verlet step (throws on non-finite state)
    void step();

    // warm-up followed by the measured steps; returns one record per
    // measured state (step 0 = state after warm-up)
    std::vector<StepRecord> run();

    const System& system() const { return system_; }
    const RunConfig& config() const { return config_; }
    Network& network() { return *net_; }
    const NeighborList& neighbor_list() const { return nlist_; }
    int steps_taken() const { return global_step_; }

    struct ForcePass {
        std::vector<Vec3> total;
        ForceBreakdown terms;
        double e_sr = 0.0;
        double e_gt = 0.0;
    };
    // exposed for oracle tests; identical to the arithmetic used inside step()
    ForcePass compute_forces();

    StepRecord snapshot_record(int step_index);

  private:
    void refresh_neighbor_structures();
    void maybe_rebalance();
    double kinetic_energy() const;
    PhaseTimings finalize_timings(bool overlap_enabled) const;

    System system_;
    RunConfig config_;
    NodeTopology topology_;
    std::unique_ptr<Network> net_;
    KGrid kgrid_;
    std::unique_ptr<DistributedDft> dft_;
    std::unique_ptr<Pppm> pppm_;
    std::unique_ptr<ShortRangeModel> sr_model_;
    WannierModel dw_model_;
    RingOrder ring_;

    NeighborList nlist_;
    Decomposition decomp_;
    std::vector<GhostRegion> ghosts_;
    std::vector<std::vector<int>> charge_owners_;  // per node, ChargeView indices
    std::vector<int> wc_of_atom_;                  // -1 for non-binding atoms
    MigrationExecution migration_;
    bool migration_active_ = false;

    std::vector<Vec3> prev_forces_;
    double e_sr_last_ = 0.0;
    double e_gt_last_ = 0.0;
    int global_step_ = 0;

    // per-step scratch for the timing model
    struct TimingScratch {
        double dw_fwd_work = 0.0;
        double sr_bwd_work = 0.0;
        double kspace_compute = 0.0;
        double others_work = 0.0;
        double net_comm = 0.0;
        double host_kspace = 0.0;
        double host_comm = 0.0;
        double host_dw_fwd = 0.0;
        double host_dw_bwd = 0.0;
        double host_others = 0.0;
    } scratch_;
};

// run outputs
void write_energy_csv(const std::string& path, const std::vector<StepRecord>& records);
void write_timings_csv(const std::string& path, const std::vector<StepRecord>& records);

struct PerformanceReport {
    double mean[5] = {0, 0, 0, 0, 0};  // kspace, comm, dw_fwd, dw_bwd_dp, others
    double p50[5] = {0, 0, 0, 0, 0};
    double p95[5] = {0, 0, 0, 0, 0};
    double sim_step_mean = 0.0;
    double host_step_mean = 0.0;
    double hidden_kspace_total = 0.0;
    double ns_per_day_sim = 0.0;   // dt * steps / simulated time
    double ns_per_day_host = 0.0;  // dt * steps / host wall time
};

PerformanceReport make_performance_report(const std::vector<StepRecord>& records, double dt_fs);
std::string performance_report_text(const PerformanceReport& report);

}  // namespace ringmd
