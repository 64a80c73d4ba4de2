#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "ringmd/quant.hpp"
#include "ringmd/topology.hpp"

namespace ringmd {

enum class PayloadMode { three_f64, six_u64, packed_i32x12 };

// scalar values one reduction operation can carry
constexpr int lane_capacity(PayloadMode mode) {
    switch (mode) {
        case PayloadMode::three_f64: return 3;
        case PayloadMode::six_u64: return 6;
        case PayloadMode::packed_i32x12: return 12;
    }
    return 0;
}

const char* payload_mode_name(PayloadMode mode);
PayloadMode payload_mode_from_name(const std::string& name);

// One reduction operation's data. three_f64 uses `f64`; the integer modes
// use `words` (six_u64: one value per word, packed_i32x12: two lanes per word).
struct Payload {
    PayloadMode mode = PayloadMode::three_f64;
    std::vector<double> f64;
    std::vector<std::uint64_t> words;

    static Payload doubles(std::vector<double> v);
    static Payload u64(std::vector<std::uint64_t> w, PayloadMode m = PayloadMode::six_u64);
};

// Relay chain anchored at a master node. The relay order visits every other
// ring member exactly once; a reduction traverses master -> relays -> master,
// i.e. ring_size point-to-point hops.
struct ReductionChain {
    int master = 0;
    std::vector<int> relays;
    PayloadMode mode = PayloadMode::three_f64;

    int ring_size() const { return static_cast<int>(relays.size()) + 1; }
};

// One chain per master over the given ring members; relay order is the member
// list rotated to start just after the master. chains_per_master > 1
// replicates each chain so batches can proceed concurrently.
std::vector<ReductionChain> configure_chains(const std::vector<int>& ring_members,
                                             const std::vector<int>& masters, PayloadMode mode,
                                             int chains_per_master = 1, int per_node_limit = 24);

struct PhaseStats {
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
    std::uint64_t reduction_ops = 0;
    std::uint64_t collectives = 0;
    double sim_time = 0.0;
};

class NetStats {
  public:
    PhaseStats& phase(const std::string& name) { return phases_[name]; }
    const std::map<std::string, PhaseStats>& phases() const { return phases_; }
    std::map<int, std::uint64_t>& chain_ops() { return chain_ops_; }
    const std::map<int, std::uint64_t>& chain_ops() const { return chain_ops_; }

    PhaseStats totals() const;
    std::string to_json() const;
    std::string to_csv() const;

  private:
    std::map<std::string, PhaseStats> phases_;
    std::map<int, std::uint64_t> chain_ops_;
};

struct NetConfig {
    double hop_latency = 0.2;   // simulated time units per point-to-point hop
    double per_byte = 1e-4;     // simulated time units per payload byte
};

// Deterministic interconnect model. All cross-rank traffic is orchestrated
// through this class: payloads move by value, latencies follow the configured
// cost model, and every counter is a pure function of the call sequence.
class Network {
  public:
    Network(const NodeTopology& topology, NetConfig config = {});

    const NodeTopology& topology() const { return topology_; }
    NetStats& stats() { return stats_; }
    const NetStats& stats() const { return stats_; }

    // attribution label for subsequent traffic (e.g. "kspace", "comm")
    void set_phase(std::string name) { phase_ = std::move(name); }
    const std::string& current_phase() const { return phase_; }

    // --- point to point ---------------------------------------------------
    double send(RankId src, RankId dst, int tag, std::vector<double> payload);
    std::vector<double> recv(RankId src, RankId dst, int tag);
    bool has_message(RankId src, RankId dst, int tag) const;
    // accounting-only message (payload lives in caller structures)
    double count_message(std::size_t bytes);

    // --- collectives --------------------------------------------------------
    // contributions[i] belongs to group[i]; every member ends up with the
    // full vector. Returns it once (the orchestrator hands it to each member).
    template <typename T>
    std::vector<T> allgather(const std::vector<int>& group, std::vector<T> contributions) {
        collective_check("allgather", group.size(), contributions.size());
        const std::size_t n = group.size();
        if (n > 1)
            add_traffic(n * (n - 1), n * (n - 1) * sizeof(T),
                        static_cast<double>(n - 1) * (config_.hop_latency + sizeof(T) * config_.per_byte));
        ++stats_.phase(phase_).collectives;
        return contributions;
    }

    template <typename T>
    std::vector<T> gather_to(RankId master, const std::vector<int>& group,
                             std::vector<T> contributions) {
        collective_check("gather_to", group.size(), contributions.size());
        const std::size_t n = group.size();
        if (n > 1)
            add_traffic(n - 1, (n - 1) * sizeof(T),
                        static_cast<double>(n - 1) * config_.per_byte * sizeof(T) + config_.hop_latency);
        ++stats_.phase(phase_).collectives;
        (void)master;
        return contributions;
    }

    template <typename T>
    std::vector<T> scatter_from(RankId master, const std::vector<int>& group,
                                std::vector<T> items) {
        collective_check("scatter_from", group.size(), items.size());
        const std::size_t n = group.size();
        if (n > 1)
            add_traffic(n - 1, (n - 1) * sizeof(T),
                        static_cast<double>(n - 1) * config_.per_byte * sizeof(T) + config_.hop_latency);
        ++stats_.phase(phase_).collectives;
        (void)master;
        return items;
    }

    // --- reduction chains ---------------------------------------------------
    int add_chain(ReductionChain chain);
    const ReductionChain& chain(int id) const { return chains_.at(id); }
    std::size_t chain_count() const { return chains_.size(); }

    // Element-wise sum of the ring's contributions, accumulated in relay
    // traversal order (master first). contributions must be in ring order
    // [master, relays...]. Returns the payload delivered to the master and
    // the completion time: the op starts when the chain is free (chains are
    // busy-exclusive), not before `earliest_start`.
    struct ReduceResult {
        Payload value;
        double finish_time = 0.0;
    };
    ReduceResult chain_reduce(int chain_id, const std::vector<Payload>& contributions,
                              double earliest_start = 0.0);

    // forget chain availability times (new scheduling epoch); counters persist
    void reset_chain_schedule();

    double chain_op_latency(const ReductionChain& chain, std::size_t payload_bytes) const;

  private:
    void collective_check(const char* what, std::size_t group, std::size_t items) const;
    void add_traffic(std::uint64_t messages, std::uint64_t bytes, double time);

    NodeTopology topology_;
    NetConfig config_;
    NetStats stats_;
    std::string phase_ = "default";
    std::vector<ReductionChain> chains_;
    std::vector<double> chain_free_at_;
    std::vector<bool> chain_busy_;
    std::map<std::uint64_t, std::deque<std::vector<double>>> mailboxes_;
};

}  // namespace ringmd
