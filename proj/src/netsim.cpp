#include "ringmd/netsim.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ringmd {

const char* payload_mode_name(PayloadMode mode) {
    switch (mode) {
        case PayloadMode::three_f64: return "f64";
        case PayloadMode::six_u64: return "u64";
        case PayloadMode::packed_i32x12: return "i32x12";
    }
    return "?";
}

PayloadMode payload_mode_from_name(const std::string& name) {
    if (name == "f64") return PayloadMode::three_f64;
    if (name == "u64") return PayloadMode::six_u64;
    if (name == "i32x12") return PayloadMode::packed_i32x12;
    throw std::invalid_argument("unknown payload mode '" + name + "' (f64|u64|i32x12)");
}

Payload Payload::doubles(std::vector<double> v) {
    Payload p;
    p.mode = PayloadMode::three_f64;
    p.f64 = std::move(v);
    return p;
}

Payload Payload::u64(std::vector<std::uint64_t> w, PayloadMode m) {
    Payload p;
    p.mode = m;
    p.words = std::move(w);
    return p;
}

std::vector<ReductionChain> configure_chains(const std::vector<int>& ring_members,
                                             const std::vector<int>& masters, PayloadMode mode,
                                             int chains_per_master, int per_node_limit) {
    if (ring_members.empty()) throw std::invalid_argument("configure_chains: empty ring");
    if (chains_per_master < 1) throw std::invalid_argument("configure_chains: bad multiplicity");
    // every chain touches every ring member, so participation = chain count
    const long participation = static_cast<long>(masters.size()) * chains_per_master;
    if (participation > per_node_limit)
        throw std::invalid_argument("configure_chains: " + std::to_string(participation) +
                                    " chains exceed the per-node limit of " +
                                    std::to_string(per_node_limit));

    std::vector<ReductionChain> chains;
    chains.reserve(masters.size() * static_cast<std::size_t>(chains_per_master));
    for (int master : masters) {
        auto it = std::find(ring_members.begin(), ring_members.end(), master);
        if (it == ring_members.end())
            throw std::invalid_argument("configure_chains: master " + std::to_string(master) +
                                        " is not a ring member");
        ReductionChain c;
        c.master = master;
        c.mode = mode;
        const std::size_t start = static_cast<std::size_t>(it - ring_members.begin());
        for (std::size_t k = 1; k < ring_members.size(); ++k)
            c.relays.push_back(ring_members[(start + k) % ring_members.size()]);
        for (int rep = 0; rep < chains_per_master; ++rep) chains.push_back(c);
    }
    return chains;
}

PhaseStats NetStats::totals() const {
    PhaseStats t;
    for (const auto& [name, p] : phases_) {
        t.messages += p.messages;
        t.bytes += p.bytes;
        t.reduction_ops += p.reduction_ops;
        t.collectives += p.collectives;
        t.sim_time += p.sim_time;
    }
    return t;
}

std::string NetStats::to_json() const {
    nlohmann::json j;
    for (const auto& [name, p] : phases_) {
        j["phases"][name] = {{"messages", p.messages},
                             {"bytes", p.bytes},
                             {"reduction_ops", p.reduction_ops},
                             {"collectives", p.collectives},
                             {"sim_time", p.sim_time}};
    }
    PhaseStats t = totals();
    j["total"] = {{"messages", t.messages},
                  {"bytes", t.bytes},
                  {"reduction_ops", t.reduction_ops},
                  {"collectives", t.collectives},
                  {"sim_time", t.sim_time}};
    nlohmann::json chains = nlohmann::json::object();
    for (const auto& [id, ops] : chain_ops_) chains[std::to_string(id)] = ops;
    j["chain_reduction_ops"] = chains;
    return j.dump(2);
}

std::string NetStats::to_csv() const {
    std::ostringstream os;
    os << "phase,messages,bytes,reduction_ops,collectives,sim_time\n";
    os.precision(17);
    for (const auto& [name, p] : phases_)
        os << name << "," << p.messages << "," << p.bytes << "," << p.reduction_ops << ","
           << p.collectives << "," << p.sim_time << "\n";
    PhaseStats t = totals();
    os << "total," << t.messages << "," << t.bytes << "," << t.reduction_ops << ","
       << t.collectives << "," << t.sim_time << "\n";
    return os.str();
}

Network::Network(const NodeTopology& topology, NetConfig config)
    : topology_(topology), config_(config) {}

namespace {

std::uint64_t mailbox_key(RankId src, RankId dst, int tag) {
    auto pack = [](int node, int rank) {
        return (static_cast<std::uint64_t>(node) << 8) | static_cast<std::uint64_t>(rank & 0xff);
    };
    return (pack(src.node, src.rank_in_node) << 40) ^ (pack(dst.node, dst.rank_in_node) << 16) ^
           static_cast<std::uint64_t>(tag & 0xffff);
}

std::size_t payload_bytes(const Payload& p) {
    return p.f64.size() * sizeof(double) + p.words.size() * sizeof(std::uint64_t);
}

void check_payload(const Payload& p) {
    switch (p.mode) {
        case PayloadMode::three_f64:
            if (p.f64.size() > 3 || !p.words.empty())
                throw std::invalid_argument("payload: three_f64 carries at most 3 doubles");
            break;
        case PayloadMode::six_u64:
        case PayloadMode::packed_i32x12:
            if (p.words.size() > 6 || !p.f64.empty())
                throw std::invalid_argument("payload: integer modes carry at most 6 words");
            break;
    }
}

}  // namespace

double Network::send(RankId src, RankId dst, int tag, std::vector<double> payload) {
    const std::size_t bytes = payload.size() * sizeof(double);
    mailboxes_[mailbox_key(src, dst, tag)].push_back(std::move(payload));
    const double t = config_.hop_latency + static_cast<double>(bytes) * config_.per_byte;
    add_traffic(1, bytes, t);
    return t;
}

std::vector<double> Network::recv(RankId src, RankId dst, int tag) {
    auto it = mailboxes_.find(mailbox_key(src, dst, tag));
    if (it == mailboxes_.end() || it->second.empty())
        throw std::runtime_error("recv: no message from node " + std::to_string(src.node) +
                                 " rank " + std::to_string(src.rank_in_node) + " to node " +
                                 std::to_string(dst.node) + " rank " +
                                 std::to_string(dst.rank_in_node) + " tag " + std::to_string(tag) +
                                 " (mismatched participation would deadlock here)");
    std::vector<double> payload = std::move(it->second.front());
    it->second.pop_front();
    return payload;
}

bool Network::has_message(RankId src, RankId dst, int tag) const {
    auto it = mailboxes_.find(mailbox_key(src, dst, tag));
    return it != mailboxes_.end() && !it->second.empty();
}

double Network::count_message(std::size_t bytes) {
    const double t = config_.hop_latency + static_cast<double>(bytes) * config_.per_byte;
    add_traffic(1, bytes, t);
    return t;
}

int Network::add_chain(ReductionChain chain) {
    chains_.push_back(std::move(chain));
    chain_free_at_.push_back(0.0);
    chain_busy_.push_back(false);
    return static_cast<int>(chains_.size()) - 1;
}

double Network::chain_op_latency(const ReductionChain& chain, std::size_t bytes) const {
    // master -> relays -> master: ring_size hops; a single-member chain never
    // leaves the node
    if (chain.relays.empty()) return 0.0;
    return chain.ring_size() * (config_.hop_latency + static_cast<double>(bytes) * config_.per_byte);
}

Network::ReduceResult Network::chain_reduce(int chain_id, const std::vector<Payload>& contributions,
                                            double earliest_start) {
    const ReductionChain& c = chains_.at(static_cast<std::size_t>(chain_id));
    if (chain_busy_[static_cast<std::size_t>(chain_id)])
        throw std::runtime_error("chain_reduce: chain " + std::to_string(chain_id) +
                                 " already has a reduction in flight");
    chain_busy_[static_cast<std::size_t>(chain_id)] = true;
    struct BusyGuard {
        std::vector<bool>& flags;
        std::size_t id;
        ~BusyGuard() { flags[id] = false; }
    } guard{chain_busy_, static_cast<std::size_t>(chain_id)};

    if (contributions.size() != static_cast<std::size_t>(c.ring_size()))
        throw std::invalid_argument("chain_reduce: need one contribution per ring member (" +
                                    std::to_string(c.ring_size()) + ", got " +
                                    std::to_string(contributions.size()) + ")");
    for (const auto& p : contributions) {
        if (p.mode != c.mode) throw std::invalid_argument("chain_reduce: payload mode mismatch");
        check_payload(p);
        if (p.f64.size() != contributions[0].f64.size() ||
            p.words.size() != contributions[0].words.size())
            throw std::invalid_argument("chain_reduce: contribution sizes differ");
    }

    // accumulate in relay-traversal order: master's value first
    Payload acc = contributions[0];
    for (std::size_t i = 1; i < contributions.size(); ++i) {
        for (std::size_t v = 0; v < acc.f64.size(); ++v) acc.f64[v] += contributions[i].f64[v];
        for (std::size_t w = 0; w < acc.words.size(); ++w) acc.words[w] += contributions[i].words[w];
    }

    const double latency = chain_op_latency(c, payload_bytes(acc));
    double& free_at = chain_free_at_[static_cast<std::size_t>(chain_id)];
    const double start = std::max(earliest_start, free_at);
    const double finish = start + latency;
    free_at = finish;

    PhaseStats& ph = stats_.phase(phase_);
    ph.reduction_ops += 1;
    if (!c.relays.empty()) {
        ph.messages += static_cast<std::uint64_t>(c.ring_size());
        ph.bytes += static_cast<std::uint64_t>(c.ring_size()) * payload_bytes(acc);
    }
    ph.sim_time += latency;
    ++stats_.chain_ops()[chain_id];

    return {std::move(acc), finish};
}

void Network::reset_chain_schedule() {
    std::fill(chain_free_at_.begin(), chain_free_at_.end(), 0.0);
}

void Network::collective_check(const char* what, std::size_t group, std::size_t items) const {
    if (group == 0) throw std::invalid_argument(std::string(what) + ": empty group");
    if (group != items)
        throw std::runtime_error(std::string(what) + ": " + std::to_string(items) +
                                 " contributions for a group of " + std::to_string(group) +
                                 " (mismatched participation would deadlock here)");
}

void Network::add_traffic(std::uint64_t messages, std::uint64_t bytes, double time) {
    PhaseStats& ph = stats_.phase(phase_);
    ph.messages += messages;
    ph.bytes += bytes;
    ph.sim_time += time;
}

}  // namespace ringmd
