#include "ringmd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ringmd {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + where);
}

Int3 int3_of(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error("config: " + where + " must be a 3-element array");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

Vec3 vec3_of(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error("config: " + where + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

System ConfigFile::build_system() const {
    System base;
    if (source.kind == SystemSource::Kind::file) {
        base = load_system(source.path);
    } else {
        Rng rng(run.seed);
        base = generate_water_system(source.gen, rng);
    }
    if (source.replicate == Int3{1, 1, 1}) return base;
    return replicate_box(base, source.replicate);
}

ConfigFile parse_config(const std::string& text) {
    const json j = json::parse(text);
    ConfigFile cfg;

    reject_unknown(j, {"system", "steps", "dt", "ensemble", "t_target", "thermostat_relax",
                       "warmup", "seed", "topology", "ranks_per_node", "workers", "overlap",
                       "payload_mode", "ewald", "model", "balance", "synthetic_timing"},
                   "top level");

    if (j.contains("system")) {
        const json& s = j.at("system");
        reject_unknown(s, {"source", "path", "waters", "edge", "temperature", "replicate", "min_oo_dist"},
                       "system");
        const std::string kind = s.value("source", "generated");
        if (kind == "file") {
            cfg.source.kind = SystemSource::Kind::file;
            cfg.source.path = s.at("path").get<std::string>();
        } else if (kind == "generated") {
            cfg.source.kind = SystemSource::Kind::generated;
            if (s.contains("waters")) cfg.source.gen.waters = s.at("waters").get<int>();
            if (s.contains("edge")) {
                if (s.at("edge").is_number())
                    cfg.source.gen.edge = Vec3{s.at("edge").get<double>(), s.at("edge").get<double>(),
                                               s.at("edge").get<double>()};
                else
                    cfg.source.gen.edge = vec3_of(s.at("edge"), "system.edge");
            }
            if (s.contains("temperature")) cfg.source.gen.temperature = s.at("temperature").get<double>();
            if (s.contains("min_oo_dist")) cfg.source.gen.min_oo_dist = s.at("min_oo_dist").get<double>();
        } else {
            throw std::runtime_error("config: system.source must be 'generated' or 'file'");
        }
        if (s.contains("replicate")) cfg.source.replicate = int3_of(s.at("replicate"), "system.replicate");
    }

    RunConfig& r = cfg.run;
    if (j.contains("steps")) r.steps = j.at("steps").get<int>();
    if (j.contains("dt")) r.dt = j.at("dt").get<double>();
    if (j.contains("ensemble")) {
        const std::string e = j.at("ensemble").get<std::string>();
        if (e == "nve") r.ensemble = Ensemble::nve;
        else if (e == "nvt_rescale") r.ensemble = Ensemble::nvt_rescale;
        else throw std::runtime_error("config: ensemble must be 'nve' or 'nvt_rescale'");
    }
    if (j.contains("t_target")) r.t_target = j.at("t_target").get<double>();
    if (j.contains("thermostat_relax")) r.thermostat_relax = j.at("thermostat_relax").get<double>();
    if (j.contains("warmup")) r.warmup = j.at("warmup").get<int>();
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("topology")) r.topology = int3_of(j.at("topology"), "topology");
    if (j.contains("ranks_per_node")) r.ranks_per_node = j.at("ranks_per_node").get<int>();
    if (j.contains("workers")) r.workers = j.at("workers").get<int>();
    if (j.contains("overlap")) r.overlap = j.at("overlap").get<bool>();
    if (j.contains("payload_mode"))
        r.payload_mode = payload_mode_from_name(j.at("payload_mode").get<std::string>());

    if (j.contains("ewald")) {
        const json& e = j.at("ewald");
        reject_unknown(e, {"beta", "kcut", "mesh", "order"}, "ewald");
        if (e.contains("beta")) r.ewald.beta = e.at("beta").get<double>();
        if (e.contains("kcut")) r.ewald.kcut = e.at("kcut").get<double>();
        if (e.contains("mesh")) r.ewald.mesh = int3_of(e.at("mesh"), "ewald.mesh");
        if (e.contains("order")) r.ewald.order = e.at("order").get<int>();
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, {"kind", "epsilon", "sigma", "cutoff", "skin", "range",
                           "rebuild_interval", "wc_amplitude", "mlp_widths", "mlp_seed",
                           "mlp_radial"},
                       "model");
        if (m.contains("kind")) {
            const std::string k = m.at("kind").get<std::string>();
            if (k == "pair_analytic") r.sr_kind = ShortRangeModel::Kind::pair_analytic;
            else if (k == "toy_mlp") r.sr_kind = ShortRangeModel::Kind::toy_mlp;
            else throw std::runtime_error("config: model.kind must be 'pair_analytic' or 'toy_mlp'");
        }
        if (m.contains("epsilon")) r.pair.epsilon = m.at("epsilon").get<double>();
        if (m.contains("sigma")) r.pair.sigma = m.at("sigma").get<double>();
        if (m.contains("cutoff")) r.cutoff = m.at("cutoff").get<double>();
        if (m.contains("skin")) r.skin = m.at("skin").get<double>();
        if (m.contains("range")) r.model_range = m.at("range").get<double>();
        if (m.contains("rebuild_interval")) r.rebuild_interval = m.at("rebuild_interval").get<int>();
        if (m.contains("wc_amplitude")) r.wc_amplitude = m.at("wc_amplitude").get<double>();
        if (m.contains("mlp_widths")) {
            const Int3 w = int3_of(m.at("mlp_widths"), "model.mlp_widths");
            r.mlp.widths = {w.x, w.y, w.z};
        }
        if (m.contains("mlp_seed")) r.mlp.seed = m.at("mlp_seed").get<std::uint64_t>();
        if (m.contains("mlp_radial")) r.mlp.n_radial = m.at("mlp_radial").get<int>();
    }

    if (j.contains("balance")) {
        const json& b = j.at("balance");
        reject_unknown(b, {"mode", "strategy", "interval", "threshold"}, "balance");
        if (b.contains("mode")) {
            const std::string m = b.at("mode").get<std::string>();
            if (m == "off") r.balance_mode = BalanceMode::off;
            else if (m == "ring-corrected") r.balance_mode = BalanceMode::ring_corrected;
            else if (m == "ring-literal") r.balance_mode = BalanceMode::ring_literal;
            else throw std::runtime_error("config: balance.mode must be off|ring-corrected|ring-literal");
        }
        if (b.contains("strategy")) {
            const std::string s = b.at("strategy").get<std::string>();
            if (s == "ghost-expansion") r.balance_strategy = BalanceStrategy::ghost_expansion;
            else if (s == "forwarding") r.balance_strategy = BalanceStrategy::forwarding;
            else throw std::runtime_error("config: balance.strategy must be ghost-expansion|forwarding");
        }
        if (b.contains("interval")) r.rebalance_interval = b.at("interval").get<int>();
        if (b.contains("threshold")) r.imbalance_threshold = b.at("threshold").get<double>();
    }

    if (j.contains("synthetic_timing")) {
        const json& s = j.at("synthetic_timing");
        reject_unknown(s, {"t_dw_fwd", "t_sr_bwd", "t_lr"}, "synthetic_timing");
        r.synthetic.enabled = true;
        if (s.contains("t_dw_fwd")) r.synthetic.t_dw_fwd = s.at("t_dw_fwd").get<double>();
        if (s.contains("t_sr_bwd")) r.synthetic.t_sr_bwd = s.at("t_sr_bwd").get<double>();
        if (s.contains("t_lr")) r.synthetic.t_lr = s.at("t_lr").get<double>();
    }

    return cfg;
}

ConfigFile load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace ringmd
