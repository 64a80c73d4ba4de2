#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "ringmd/ewald.hpp"
#include "ringmd/pppm.hpp"
#include "ringmd/rng.hpp"
#include "ringmd/system.hpp"

using namespace ringmd;

namespace {

System random_waters(int n, double edge, std::uint64_t seed) {
    WaterGenParams p;
    p.waters = n;
    p.edge = {edge, edge, edge};
    Rng rng(seed);
    System sys = generate_water_system(p, rng);
    // small random WC displacements so the WC term is non-trivial
    Rng rng2(seed ^ 0xabcdef);
    for (auto& w : sys.wcs)
        w.displacement = {0.05 * rng2.uniform(-1, 1), 0.05 * rng2.uniform(-1, 1),
                          0.05 * rng2.uniform(-1, 1)};
    return sys;
}

EwaldParams params32() {
    EwaldParams p;
    p.beta = 0.47;
    p.kcut = 0.6;
    p.mesh = {32, 32, 32};
    p.order = 4;
    return p;
}

// textbook real-arithmetic Ewald k-space sum (independent route: separate
// cosine/sine accumulators, no std::complex)
double ewald_oracle(const ChargeView& charges, const SimulationBox& box, double beta,
                    double kcut) {
    const double pi = std::numbers::pi;
    double energy = 0.0;
    for (const Int3& mi : enumerate_kmodes(box, kcut)) {
        const Vec3 m{mi.x / box.lengths.x, mi.y / box.lengths.y, mi.z / box.lengths.z};
        const double m2 = m.norm2();
        double c = 0.0, s = 0.0;
        for (std::size_t j = 0; j < charges.size(); ++j) {
            const double ph = 2.0 * pi * m.dot(charges.positions[j]);
            c += charges.charges[j] * std::cos(ph);
            s += charges.charges[j] * std::sin(ph);
        }
        energy += std::exp(-pi * pi * m2 / (beta * beta)) / m2 * (c * c + s * s);
    }
    return energy / (2.0 * pi * box.volume());
}

struct GridSetup {
    KGrid kgrid;
    Network net;
    DistributedDft dft;
    Pppm pppm;
    ChargeView charges;
    std::vector<std::vector<int>> owners;

    GridSetup(const System& sys, const EwaldParams& params, const Int3& nodes = {1, 1, 1})
        : kgrid(params.mesh, nodes, sys.box.lengths, params.kcut),
          net(NodeTopology(nodes, sys.box)),
          dft(kgrid, net),
          pppm(kgrid, params, dft, net),
          charges(collect_charges(sys)) {
        NodeTopology topo(nodes, sys.box);
        Decomposition d = decompose(sys, topo);
        owners.resize(static_cast<std::size_t>(topo.node_count()));
        for (int node = 0; node < topo.node_count(); ++node) {
            for (int ai : d.atoms_of_node[static_cast<std::size_t>(node)])
                owners[static_cast<std::size_t>(node)].push_back(ai);
            for (int wi : d.wcs_of_node[static_cast<std::size_t>(node)])
                owners[static_cast<std::size_t>(node)].push_back(
                    static_cast<int>(sys.atoms.size()) + wi);
        }
    }
};

}  // namespace

TEST_CASE("structure factor: empty, single charge, high-precision oracle") {
    ChargeView empty;
    CHECK(std::abs(structure_factor({0.1, 0.2, 0.3}, empty)) == 0.0);

    ChargeView single;
    single.n_atoms = 1;
    single.positions.push_back({0, 0, 0});
    single.charges.push_back(1.0);
    for (double mx : {0.1, 0.7, -0.4})
        CHECK(std::abs(structure_factor({mx, 2 * mx, -mx}, single) -
                       std::complex<double>{1.0, 0.0}) < 1e-15);

    // S(-m) = conj(S(m)) and agreement with 128-bit accumulation
    System sys = random_waters(16, 10.0, 3);
    ChargeView view = collect_charges(sys);
    Rng rng(5);
    for (int t = 0; t < 25; ++t) {
        Vec3 m{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        auto s = structure_factor(m, view);
        auto sm = structure_factor(-1.0 * m, view);
        CHECK(std::abs(sm - std::conj(s)) < 1e-12);

        __float128 re = 0, im = 0;
        for (std::size_t j = 0; j < view.size(); ++j) {
            const double ph = -2.0 * std::numbers::pi * m.dot(view.positions[j]);
            re += static_cast<__float128>(view.charges[j]) * std::cos(ph);
            im += static_cast<__float128>(view.charges[j]) * std::sin(ph);
        }
        CHECK(std::abs(s.real() - static_cast<double>(re)) < 1e-13 * view.size());
        CHECK(std::abs(s.imag() - static_cast<double>(im)) < 1e-13 * view.size());
    }
}

TEST_CASE("direct energy: zero charges, quadratic charge scaling") {
    System sys = random_waters(8, 10.0, 7);
    EwaldParams params = params32();
    ChargeView view = collect_charges(sys);

    ChargeView zeros = view;
    for (auto& q : zeros.charges) q = 0.0;
    CHECK(ewald_energy_direct(zeros, sys.box, params) == 0.0);

    const double e1 = ewald_energy_direct(view, sys.box, params);
    ChargeView doubled = view;
    for (auto& q : doubled.charges) q *= 2.0;
    const double e4 = ewald_energy_direct(doubled, sys.box, params);
    CHECK(e4 == doctest::Approx(4.0 * e1).epsilon(1e-14));

    ChargeView lam = view;
    for (auto& q : lam.charges) q *= 1.7;
    CHECK(ewald_energy_direct(lam, sys.box, params) ==
          doctest::Approx(1.7 * 1.7 * e1).epsilon(1e-14));
}

TEST_CASE("direct energy: +- Gaussian pair matches the textbook oracle") {
    SimulationBox box(9.0);
    EwaldParams params;
    params.beta = 0.5;
    params.kcut = 0.7;
    params.mesh = {32, 32, 32};
    ChargeView pair;
    pair.n_atoms = 2;
    pair.positions = {{2.0, 4.5, 4.5}, {5.3, 4.5, 4.5}};
    pair.charges = {1.0, -1.0};
    const double got = ewald_energy_direct(pair, box, params);
    const double want = ewald_oracle(pair, box, params.beta, params.kcut);
    CHECK(std::abs(got - want) / std::abs(want) < 1e-10);
}

TEST_CASE("direct forces: symmetry and zero-charge edge") {
    SimulationBox box(10.0);
    EwaldParams params = params32();
    ChargeView pair;
    pair.n_atoms = 2;
    pair.positions = {{4.0, 5.0, 5.0}, {6.0, 5.0, 5.0}};  // mirror images about x=5
    pair.charges = {1.0, 1.0};
    auto grads = ewald_forces_direct(pair, box, params);
    // equal and opposite forces by symmetry
    CHECK((grads.ion_grad[0] + grads.ion_grad[1]).norm() < 1e-12);
    CHECK(std::abs(grads.ion_grad[0].x) > 1e-6);

    ChargeView zeros = pair;
    zeros.charges = {0.0, 0.0};
    auto zg = ewald_forces_direct(zeros, box, params);
    CHECK(zg.ion_grad[0].norm() == 0.0);
    CHECK(zg.energy == 0.0);
}

TEST_CASE("direct forces match central finite differences") {
    System sys = random_waters(8, 10.0, 11);
    EwaldParams params = params32();
    ChargeView view = collect_charges(sys);
    auto grads = ewald_forces_direct(view, sys.box, params);
    CHECK(grads.energy == doctest::Approx(ewald_energy_direct(view, sys.box, params)));

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t j = 0; j < view.size(); j += 3) {  // sample of ions and WCs
        for (int a = 0; a < 3; ++a) {
            ChargeView plus = view, minus = view;
            plus.positions[j][a] += h;
            minus.positions[j][a] -= h;
            const double fd = (ewald_energy_direct(plus, sys.box, params) -
                               ewald_energy_direct(minus, sys.box, params)) /
                              (2.0 * h);
            const Vec3 grad = j < view.n_atoms ? grads.ion_grad[j]
                                               : grads.wc_grad[j - view.n_atoms];
            worst = std::max(worst, std::abs(grad[a] - fd));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("B-spline values: closed forms and partition of unity") {
    // M2 is the hat function
    CHECK(bspline_value(2, 1.0) == doctest::Approx(1.0));
    CHECK(bspline_value(2, 0.5) == doctest::Approx(0.5));
    // M4 closed form on [0,1): u^3/6
    for (double u : {0.2, 0.7, 0.99})
        CHECK(bspline_value(4, u) == doctest::Approx(u * u * u / 6.0).epsilon(1e-12));
    // M4 on [1,2): (-3u^3 + 12u^2 - 12u + 4)/6
    for (double u : {1.2, 1.8})
        CHECK(bspline_value(4, u) ==
              doctest::Approx((-3 * u * u * u + 12 * u * u - 12 * u + 4) / 6.0).epsilon(1e-12));

    // partition of unity for all supported orders
    Rng rng(13);
    for (int p = 2; p <= 6; ++p)
        for (int t = 0; t < 50; ++t) {
            double u = rng.uniform(10.0, 11.0);
            double w[8];
            bspline_weights(p, u, w);
            double sum = 0.0;
            for (int k = 0; k < p; ++k) sum += w[k];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("spread: on-node charge with p=2, charge conservation") {
    System sys;
    sys.box = SimulationBox(8.0);
    sys.atoms.push_back({0, Species::O, {2.0, 4.0, 6.0}, {}, 3.0});  // exactly on a mesh node
    EwaldParams params;
    params.beta = 0.6;
    params.kcut = 0.4;
    params.mesh = {8, 8, 8};
    params.order = 2;
    GridSetup g(sys, params);
    auto bricks = g.pppm.spread(g.charges, g.owners);
    CHECK(bricks[0].at(2, 4, 6).real() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(g.pppm.total_mesh_charge(bricks) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("spread conserves charge for random configurations") {
    System sys = random_waters(16, 10.0, 17);
    EwaldParams params = params32();
    GridSetup g(sys, params);
    auto bricks = g.pppm.spread(g.charges, g.owners);
    double total = 0.0;
    for (double q : g.charges.charges) total += q;
    CHECK(std::abs(g.pppm.total_mesh_charge(bricks) - total) < 1e-10);
}

TEST_CASE("poisson solve: zero mesh in, zero out") {
    System sys = random_waters(4, 10.0, 19);
    EwaldParams params = params32();
    GridSetup g(sys, params);
    auto bricks = g.dft.empty_bricks();
    auto result = g.pppm.solve(std::move(bricks));
    CHECK(result.energy == 0.0);
    for (int axis = 0; axis < 3; ++axis)
        for (const auto& b : result.field[axis])
            for (const auto& z : b.data) CHECK(std::abs(z) == 0.0);
}

TEST_CASE("single Gaussian charge: grid energy approaches the direct sum") {
    System sys;
    sys.box = SimulationBox(10.0);
    sys.atoms.push_back({0, Species::O, {4.321, 5.6, 2.2}, {}, 2.0});
    EwaldParams params;
    params.beta = 0.47;
    params.kcut = 0.6;
    params.mesh = {40, 40, 40};
    params.order = 4;
    const double direct = ewald_energy_direct(collect_charges(sys), sys.box, params);
    GridSetup g(sys, params);
    auto result = g.pppm.solve(g.pppm.spread(g.charges, g.owners));
    CHECK(std::abs(result.energy - direct) / std::abs(direct) < 1e-4);
}

TEST_CASE("field meshes match derivatives of the spectral potential") {
    System sys = random_waters(8, 10.0, 23);
    EwaldParams params;
    params.beta = 0.47;
    params.kcut = 0.6;
    params.mesh = {24, 24, 24};
    GridSetup g(sys, params);
    auto result = g.pppm.solve(g.pppm.spread(g.charges, g.owners), /*want_potential=*/true);

    Grid3 pot = g.dft.assemble(result.potential);
    Grid3 fx = g.dft.assemble(result.field[0]);

    // differentiate the band-limited interpolant numerically at grid points:
    // phi(r) = sum_m phihat(m) exp(2 pi i m . r / L) (values are real)
    Grid3 pothat_bricks(params.mesh);
    // recover phihat via a forward transform of the potential grid / N
    Grid3 pothat = serial_dft_3d(pot, DftDirection::forward);
    const double n_total = 24.0 * 24.0 * 24.0;
    for (auto& z : pothat.data) z /= n_total;

    auto phi_at = [&](const Vec3& r) {
        std::complex<double> acc{0, 0};
        for (int kz = 0; kz < 24; ++kz)
            for (int ky = 0; ky < 24; ++ky)
                for (int kx = 0; kx < 24; ++kx) {
                    const Vec3 m{g.kgrid.recip(0, kx), g.kgrid.recip(1, ky),
                                 g.kgrid.recip(2, kz)};
                    const double ph = 2.0 * std::numbers::pi * m.dot(r);
                    acc += pothat.at(kx, ky, kz) *
                           std::complex<double>{std::cos(ph), std::sin(ph)};
                }
        return acc.real();
    };

    double fmax = 0.0;
    for (const auto& z : fx.data) fmax = std::max(fmax, std::abs(z.real()));
    const double eps = 1e-4;
    for (auto [x, y, z] : {std::array<int, 3>{0, 0, 0}, {5, 7, 3}, {12, 1, 20}}) {
        const Vec3 r{x * 10.0 / 24, y * 10.0 / 24, z * 10.0 / 24};
        const double cd =
            (phi_at({r.x + eps, r.y, r.z}) - phi_at({r.x - eps, r.y, r.z})) / (2 * eps);
        // field = -dphi/dx
        CHECK(std::abs(-cd - fx.at(x, y, z).real()) < 1e-6 * std::max(1.0, fmax));
    }
}

TEST_CASE("grid path agrees with the direct sum on 32 waters; ladder is monotone") {
    System sys = random_waters(32, 10.0, 29);
    EwaldParams params = params32();
    auto direct = ewald_forces_direct(collect_charges(sys), sys.box, params);
    double fmax = 0.0;
    for (const auto& v : direct.ion_grad) fmax = std::max(fmax, max_abs_component(v));

    double prev_e_err = 1e9, prev_f_err = 1e9;
    for (int mesh : {24, 32, 40}) {
        EwaldParams p = params;
        p.mesh = {mesh, mesh, mesh};
        GridSetup g(sys, p);
        auto result = g.pppm.solve(g.pppm.spread(g.charges, g.owners));
        auto grads = g.pppm.gather(result, g.charges, g.owners);

        const double e_err = std::abs(result.energy - direct.energy) / std::abs(direct.energy);
        double f_err = 0.0;
        for (std::size_t i = 0; i < grads.ion_grad.size(); ++i)
            f_err = std::max(f_err, max_abs_component(grads.ion_grad[i] - direct.ion_grad[i]));
        for (std::size_t w = 0; w < grads.wc_grad.size(); ++w)
            f_err = std::max(f_err, max_abs_component(grads.wc_grad[w] - direct.wc_grad[w]));

        CHECK(e_err < prev_e_err);
        CHECK(f_err < prev_f_err);
        prev_e_err = e_err;
        prev_f_err = f_err;
        if (mesh == 40) {
            CHECK(e_err < 1e-4);
            CHECK(f_err < 1e-4);
        }
    }

    // translational invariance of the gathered forces
    EwaldParams p40 = params;
    p40.mesh = {40, 40, 40};
    GridSetup g(sys, p40);
    auto result = g.pppm.solve(g.pppm.spread(g.charges, g.owners));
    auto grads = g.pppm.gather(result, g.charges, g.owners);
    Vec3 net_force{};
    for (const auto& v : grads.ion_grad) net_force += v;
    for (const auto& v : grads.wc_grad) net_force += v;
    CHECK(net_force.norm() < 1e-9);
}

TEST_CASE("gather with zero fields returns zero forces") {
    System sys = random_waters(4, 10.0, 31);
    EwaldParams params = params32();
    GridSetup g(sys, params);
    Pppm::Result empty;
    for (int axis = 0; axis < 3; ++axis) empty.field[axis] = g.dft.empty_bricks();
    auto grads = g.pppm.gather(empty, g.charges, g.owners);
    for (const auto& v : grads.ion_grad) CHECK(v.norm() == 0.0);
    for (const auto& v : grads.wc_grad) CHECK(v.norm() == 0.0);
}

TEST_CASE("grid path distributed over 2x2x2 equals the single-node path") {
    System sys = random_waters(32, 10.0, 37);
    EwaldParams params;
    params.beta = 0.47;
    params.kcut = 0.6;
    params.mesh = {32, 32, 32};
    GridSetup single(sys, params, {1, 1, 1});
    GridSetup multi(sys, params, {2, 2, 2});

    auto r1 = single.pppm.solve(single.pppm.spread(single.charges, single.owners));
    auto r2 = multi.pppm.solve(multi.pppm.spread(multi.charges, multi.owners));
    CHECK(std::abs(r1.energy - r2.energy) <= 1e-12 * std::abs(r1.energy));

    auto g1 = single.pppm.gather(r1, single.charges, single.owners);
    auto g2 = multi.pppm.gather(r2, multi.charges, multi.owners);
    double fscale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < g1.ion_grad.size(); ++i) {
        fscale = std::max(fscale, max_abs_component(g1.ion_grad[i]));
        worst = std::max(worst, max_abs_component(g1.ion_grad[i] - g2.ion_grad[i]));
    }
    CHECK(worst <= 1e-12 * std::max(1.0, fscale));
}

TEST_CASE("spread rejects non-finite positions") {
    System sys = random_waters(2, 10.0, 41);
    EwaldParams params = params32();
    GridSetup g(sys, params);
    ChargeView bad = g.charges;
    bad.positions[0].x = std::nan("");
    CHECK_THROWS_AS(g.pppm.spread(bad, g.owners), std::runtime_error);
}
