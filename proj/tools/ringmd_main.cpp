#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ringmd/balance.hpp"
#include "ringmd/config.hpp"
#include "ringmd/engine.hpp"
#include "ringmd/rng.hpp"

namespace {

using namespace ringmd;

int cmd_gen(int waters, double edge, const Int3& replicate, std::uint64_t seed,
            const std::string& out, const std::string& extxyz, double temperature) {
    WaterGenParams params;
    params.waters = waters;
    params.edge = {edge, edge, edge};
    params.temperature = temperature;
    Rng rng(seed);
    System sys = generate_water_system(params, rng);
    if (!(replicate == Int3{1, 1, 1})) sys = replicate_box(sys, replicate);
    save_system(sys, out);
    if (!extxyz.empty()) {
        std::ofstream xyz(extxyz);
        xyz << system_to_extxyz(sys);
    }
    std::cout << "wrote " << out << ": " << sys.atoms.size() << " atoms, " << sys.wcs.size()
              << " wannier centroids, box " << sys.box.lengths << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::vector<std::string>& overrides) {
    ConfigFile cfg = load_config(config_path);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        const std::string key = o.substr(0, eq);
        const std::string val = eq == std::string::npos ? "" : o.substr(eq + 1);
        if (key == "seed") cfg.run.seed = std::stoull(val);
        else if (key == "overlap") cfg.run.overlap = val == "on";
        else if (key == "payload") cfg.run.payload_mode = payload_mode_from_name(val);
        else if (key == "balance") {
            if (val == "off") cfg.run.balance_mode = BalanceMode::off;
            else if (val == "ring-corrected") cfg.run.balance_mode = BalanceMode::ring_corrected;
            else if (val == "ring-literal") cfg.run.balance_mode = BalanceMode::ring_literal;
            else throw std::runtime_error("unknown balance mode '" + val + "'");
        }
    }

    System sys = cfg.build_system();
    Engine engine(std::move(sys), cfg.run);
    auto records = engine.run();

    std::filesystem::create_directories(out_dir);
    write_energy_csv(out_dir + "/energy.csv", records);
    write_timings_csv(out_dir + "/timings.csv", records);
    std::ofstream(out_dir + "/netstats.json") << engine.network().stats().to_json() << "\n";
    std::ofstream(out_dir + "/netstats.csv") << engine.network().stats().to_csv();

    auto report = make_performance_report(records, cfg.run.dt);
    std::cout << performance_report_text(report);
    std::cout << "outputs in " << out_dir << "\n";
    return 0;
}

int cmd_bench_fft(const Int3& mesh, const Int3& topology, const std::string& mode_name,
                  int iterations, std::uint64_t seed, const std::string& out) {
    const PayloadMode mode = payload_mode_from_name(mode_name);
    SimulationBox box({static_cast<double>(mesh.x), static_cast<double>(mesh.y),
                       static_cast<double>(mesh.z)});
    Network net(NodeTopology(topology, box));
    KGrid kgrid(mesh, topology, box.lengths);
    DftOptions opt;
    opt.mode = mode;
    DistributedDft dft(kgrid, net, opt);

    Rng rng(seed);
    Grid3 input(mesh);
    for (auto& z : input.data) z = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    Grid3 oracle = serial_dft_3d(input, DftDirection::forward);

    double total_latency = 0.0, max_err = 0.0;
    for (int it = 0; it < iterations; ++it) {
        auto bricks = dft.scatter(input);
        total_latency += dft.transform(bricks, DftDirection::forward);
        if (it == 0) {
            Grid3 got = dft.assemble(bricks);
            for (std::size_t i = 0; i < got.data.size(); ++i)
                max_err = std::max(max_err, std::abs(got.data[i] - oracle.data[i]));
        }
    }
    const auto totals = net.stats().totals();
    const long points = static_cast<long>(kgrid.brick_size().product());

    std::ostringstream csv;
    csv << "mode,mesh,topology,points_per_node,reductions_per_node_per_dim,total_reduction_ops,"
           "sim_latency_per_transform,max_error_vs_oracle\n";
    csv << payload_mode_name(mode) << "," << mesh.x << "x" << mesh.y << "x" << mesh.z << ","
        << topology.x << "x" << topology.y << "x" << topology.z << "," << points << ","
        << reduction_count(points, mode) << "," << totals.reduction_ops << ","
        << total_latency / iterations << "," << max_err << "\n";
    if (out.empty())
        std::cout << csv.str();
    else
        std::ofstream(out) << csv.str();
    return 0;
}

int cmd_bench_balance(int nodes, int steps, int jitter, const std::string& mode_name,
                      const std::string& strategy_name, std::uint64_t seed,
                      const std::string& out) {
    const PlanMode mode = mode_name == "ring-literal" ? PlanMode::literal : PlanMode::corrected;
    RingOrder ring = serpentine_ring({nodes, 1, 1});
    Rng rng(seed);

    std::ostringstream csv;
    csv << "step,max_over_mean,migrated_atoms,messages,feasible\n";
    for (int step = 0; step < steps; ++step) {
        std::vector<long> counts(static_cast<std::size_t>(nodes));
        for (auto& c : counts)
            c = 47 + (jitter > 0 ? rng.uniform_int(2 * jitter + 1) - jitter : 0);
        const long total = std::accumulate(counts.begin(), counts.end(), 0L);
        std::vector<long> goal(static_cast<std::size_t>(nodes), total / nodes);
        for (long r = total % nodes, i = 0; r > 0; --r, ++i) ++goal[static_cast<std::size_t>(i)];

        auto metric = imbalance_metric(counts);
        auto plan = plan_migration(counts, goal, ring, mode);
        std::uint64_t messages = 0;
        if (plan.feasible && strategy_name == "forwarding") {
            for (std::size_t d = 0; d < plan.n_send.size(); ++d)
                if (plan.n_send[d] > 0) messages += 2;
        }
        csv << step << "," << metric.max_over_mean << ","
            << (plan.feasible ? plan.total_migrated() : 0) << "," << messages << ","
            << (plan.feasible ? 1 : 0) << "\n";
    }
    if (out.empty())
        std::cout << csv.str();
    else
        std::ofstream(out) << csv.str();
    return 0;
}

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double tolerance = 0.0;
};

int cmd_validate(const std::string& config_path, const std::string& out) {
    ConfigFile cfg;
    if (!config_path.empty()) {
        cfg = load_config(config_path);
    } else {
        cfg.source.gen.waters = 32;
        cfg.source.gen.edge = {10.0, 10.0, 10.0};
        cfg.run.seed = 12345;
        cfg.run.ewald = EwaldParams{0.47, 0.6, {40, 40, 40}, 4};
        cfg.run.cutoff = 3.0;
        cfg.run.skin = 1.0;
    }
    System sys = cfg.build_system();
    const EwaldParams& ewald = cfg.run.ewald;
    ewald.validate(sys.box);

    NeighborList nlist = build_neighbor_list(sys, cfg.run.cutoff, cfg.run.skin);
    WannierModel dw{cfg.run.wc_amplitude, cfg.run.cutoff};
    for (auto& w : sys.wcs)
        w.displacement = dw_forward(sys.atom_index(w.binding_atom_id), sys, nlist, dw);

    std::vector<CheckResult> checks;
    const ChargeView charges = collect_charges(sys);
    auto direct = ewald_forces_direct(charges, sys.box, ewald);

    auto grid_eval = [&](const EwaldParams& p, PayloadMode mode) {
        KGrid kgrid(p.mesh, {1, 1, 1}, sys.box.lengths, p.kcut);
        Network net(NodeTopology({1, 1, 1}, sys.box));
        DftOptions opt;
        opt.mode = mode;
        DistributedDft dft(kgrid, net, opt);
        Pppm pppm(kgrid, p, dft, net);
        std::vector<std::vector<int>> owners(1);
        for (int i = 0; i < static_cast<int>(charges.size()); ++i) owners[0].push_back(i);
        auto solved = pppm.solve(pppm.spread(charges, owners));
        return pppm.gather(solved, charges, owners);
    };

    auto grid = grid_eval(ewald, PayloadMode::three_f64);
    {
        CheckResult c{"pppm_vs_direct_energy", false, 0.0, 1e-4};
        c.value = std::abs(grid.energy - direct.energy) / std::abs(direct.energy);
        c.pass = c.value <= c.tolerance;
        checks.push_back(c);

        double ferr = 0.0;
        for (std::size_t i = 0; i < direct.ion_grad.size(); ++i)
            ferr = std::max(ferr, max_abs_component(grid.ion_grad[i] - direct.ion_grad[i]));
        for (std::size_t w = 0; w < direct.wc_grad.size(); ++w)
            ferr = std::max(ferr, max_abs_component(grid.wc_grad[w] - direct.wc_grad[w]));
        checks.push_back({"pppm_vs_direct_forces", ferr <= 1e-4, ferr, 1e-4});
    }

    {
        double prev = 1e100;
        bool monotone = true;
        double last = 0.0;
        for (int mesh : {24, 32, 40}) {
            EwaldParams p = ewald;
            p.mesh = {mesh, mesh, mesh};
            auto g = grid_eval(p, PayloadMode::three_f64);
            const double err = std::abs(g.energy - direct.energy) / std::abs(direct.energy);
            if (err >= prev) monotone = false;
            prev = err;
            last = err;
        }
        checks.push_back({"refinement_ladder_monotone", monotone, last, 1e-4});
    }

    {
        double worst = 0.0;
        const double h = 1e-5;
        ChargeView probe = charges;
        for (std::size_t j = 0; j < probe.size(); j += 17) {
            for (int a = 0; a < 3; ++a) {
                probe.positions[j][a] += h;
                const double ep = ewald_energy_direct(probe, sys.box, ewald);
                probe.positions[j][a] -= 2 * h;
                const double em = ewald_energy_direct(probe, sys.box, ewald);
                probe.positions[j][a] += h;
                const Vec3 g = j < probe.n_atoms ? direct.ion_grad[j]
                                                 : direct.wc_grad[j - probe.n_atoms];
                worst = std::max(worst, std::abs(g[a] - (ep - em) / (2 * h)));
            }
        }
        checks.push_back({"direct_gradient_fd", worst <= 1e-6, worst, 1e-6});
    }

    {
        ChargeView lam = charges;
        for (auto& q : lam.charges) q *= 2.0;
        const double e4 = ewald_energy_direct(lam, sys.box, ewald);
        const double rel = std::abs(e4 - 4.0 * direct.energy) / std::abs(4.0 * direct.energy);
        checks.push_back({"charge_scaling_quadratic", rel <= 1e-14, rel, 1e-14});
    }

    {
        auto quant = grid_eval(ewald, PayloadMode::packed_i32x12);
        const double erel = std::abs(quant.energy - grid.energy) / std::abs(grid.energy);
        double fmax = 0.0, fdiff = 0.0;
        for (std::size_t i = 0; i < grid.ion_grad.size(); ++i) {
            fmax = std::max(fmax, max_abs_component(grid.ion_grad[i]));
            fdiff = std::max(fdiff, max_abs_component(quant.ion_grad[i] - grid.ion_grad[i]));
        }
        const double frel = fdiff / fmax;
        checks.push_back({"mixed_precision_energy", erel <= 1e-5, erel, 1e-5});
        checks.push_back({"mixed_precision_forces", frel <= 1e-5, frel, 1e-5});
    }

    nlohmann::json verdict;
    bool all_pass = true;
    for (const auto& c : checks) {
        verdict[c.name] = {{"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance}};
        all_pass = all_pass && c.pass;
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (value " << c.value
                  << ", tolerance " << c.tolerance << ")\n";
    }
    verdict["all_pass"] = all_pass;
    if (!out.empty()) std::ofstream(out) << verdict.dump(2) << "\n";
    std::cout << (all_pass ? "validate: all checks passed\n" : "validate: FAILURES\n");
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ringmd: deterministic simulator of a distributed MD engine with long-range "
                 "electrostatics, in-network reduction chains, and ring load balancing"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a water-like system file");
    int waters = 128;
    double edge = 16.0;
    double temperature = 300.0;
    std::vector<int> replicate{1, 1, 1};
    std::uint64_t seed = 1;
    std::string out_path = "system.json";
    std::string extxyz;
    gen->add_option("--waters", waters, "number of water molecules");
    gen->add_option("--edge", edge, "cubic box edge in Angstrom");
    gen->add_option("--replicate", replicate, "replication factors per axis")->expected(3);
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--temperature", temperature, "initial temperature (K)");
    gen->add_option("--out", out_path, "output system JSON path");
    gen->add_option("--extxyz", extxyz, "optional extended-XYZ export path");

    auto* run = app.add_subcommand("run", "run a simulation from a config file");
    std::string config_path;
    std::string out_dir = "out";
    bool overlap_flag = false, no_overlap_flag = false;
    std::string payload_mode, balance_mode;
    std::uint64_t run_seed = 0;
    run->add_option("--config", config_path, "JSON run configuration")->required();
    run->add_option("--out-dir", out_dir, "output directory");
    run->add_flag("--overlap", overlap_flag, "force the overlapped schedule on");
    run->add_flag("--no-overlap", no_overlap_flag, "force the overlapped schedule off");
    run->add_option("--payload-mode", payload_mode, "reduction payload mode (f64|u64|i32x12)");
    run->add_option("--balance-mode", balance_mode,
                    "load balance mode (off|ring-corrected|ring-literal)");
    auto* seed_opt = run->add_option("--seed", run_seed, "override the config seed");

    auto* bfft = app.add_subcommand("bench-fft", "distributed DFT benchmark");
    std::vector<int> mesh{12, 18, 12};
    std::vector<int> topo{2, 3, 2};
    std::string bf_mode = "u64";
    int iterations = 10;
    std::uint64_t bf_seed = 7;
    std::string bf_out;
    bfft->add_option("--mesh", mesh, "mesh dims")->expected(3);
    bfft->add_option("--topology", topo, "node grid dims")->expected(3);
    bfft->add_option("--payload-mode", bf_mode, "f64|u64|i32x12");
    bfft->add_option("--iterations", iterations, "transform repetitions");
    bfft->add_option("--seed", bf_seed, "input seed");
    bfft->add_option("--out", bf_out, "CSV output path (stdout when omitted)");

    auto* bbal = app.add_subcommand("bench-balance", "ring load-balance benchmark");
    int bb_nodes = 12, bb_steps = 20, bb_jitter = 8;
    std::string bb_mode = "ring-corrected", bb_strategy = "ghost-expansion", bb_out;
    std::uint64_t bb_seed = 11;
    bbal->add_option("--nodes", bb_nodes, "ring length");
    bbal->add_option("--steps", bb_steps, "number of synthetic distributions");
    bbal->add_option("--jitter", bb_jitter, "count jitter around 47 atoms/node (0 = uniform)");
    bbal->add_option("--balance-mode", bb_mode, "ring-corrected|ring-literal");
    bbal->add_option("--strategy", bb_strategy, "ghost-expansion|forwarding");
    bbal->add_option("--seed", bb_seed, "distribution seed");
    bbal->add_option("--out", bb_out, "CSV output path (stdout when omitted)");

    auto* val = app.add_subcommand("validate", "run the oracle-agreement suite");
    std::string val_config, val_out = "validate.json";
    val->add_option("--config", val_config, "optional config (defaults to 32 waters)");
    val->add_option("--out", val_out, "verdict JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen(waters, edge, {replicate[0], replicate[1], replicate[2]}, seed,
                           out_path, extxyz, temperature);
        if (run->parsed()) {
            std::vector<std::string> overrides;
            if (*seed_opt) overrides.push_back("seed=" + std::to_string(run_seed));
            if (overlap_flag) overrides.push_back("overlap=on");
            if (no_overlap_flag) overrides.push_back("overlap=off");
            if (!payload_mode.empty()) overrides.push_back("payload=" + payload_mode);
            if (!balance_mode.empty()) overrides.push_back("balance=" + balance_mode);
            return cmd_run(config_path, out_dir, overrides);
        }
        if (bfft->parsed())
            return cmd_bench_fft({mesh[0], mesh[1], mesh[2]}, {topo[0], topo[1], topo[2]},
                                 bf_mode, iterations, bf_seed, bf_out);
        if (bbal->parsed())
            return cmd_bench_balance(bb_nodes, bb_steps, bb_jitter, bb_mode, bb_strategy,
                                     bb_seed, bb_out);
        if (val->parsed()) return cmd_validate(val_config, val_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
