#include "ringmd/potential.hpp"

#include <cmath>
#include <stdexcept>

#include "ringmd/rng.hpp"

namespace ringmd {

double switch_fn(double r, double rc) {
    if (r >= rc) return 0.0;
    const double x = r / rc;
    const double t = 1.0 - x * x;
    return t * t;
}

double switch_fn_deriv(double r, double rc) {
    if (r >= rc) return 0.0;
    const double x = r / rc;
    return -4.0 * r / (rc * rc) * (1.0 - x * x);
}

ShortRangeModel::ShortRangeModel(Kind kind, double cutoff, PairParams pair, MlpParams mlp)
    : kind_(kind), cutoff_(cutoff), pair_(pair), mlp_params_(mlp) {
    if (!(cutoff > 0.0)) throw std::invalid_argument("ShortRangeModel: cutoff must be positive");
    if (kind_ == Kind::pair_analytic && !(pair.sigma < cutoff))
        throw std::invalid_argument("ShortRangeModel: sigma must sit inside the cutoff");
    if (kind_ == Kind::toy_mlp) {
        // radial descriptor centers spread over (0.8, cutoff)
        radial_centers_.resize(static_cast<std::size_t>(mlp.n_radial));
        for (int k = 0; k < mlp.n_radial; ++k)
            radial_centers_[static_cast<std::size_t>(k)] =
                0.8 + (cutoff - 0.8) * (k + 0.5) / mlp.n_radial;

        net_.dims = {mlp.n_radial, mlp.widths[0], mlp.widths[1], mlp.widths[2], 1};
        Rng rng(mlp.seed);
        for (std::size_t l = 0; l + 1 < net_.dims.size(); ++l) {
            const int in = net_.dims[l], out = net_.dims[l + 1];
            const double scale = std::sqrt(2.0 / (in + out));
            std::vector<double> w(static_cast<std::size_t>(in) * out);
            for (double& x : w) x = scale * rng.normal();
            net_.weights.push_back(std::move(w));
            net_.biases.emplace_back(static_cast<std::size_t>(out), 0.0);
        }
    }
}

// Gaussian core + Gaussian well, tapered by the cutoff switch: bounded
// everywhere, repulsive at contact, single minimum near sigma.
namespace {
constexpr double kCoreHeight = 4.0;
constexpr double kCoreWidth = 0.5;   // fraction of sigma
constexpr double kWellWidth = 0.29;  // fraction of sigma
}  // namespace

double ShortRangeModel::pair_energy(double r) const {
    const double rc = cutoff_, sigma = pair_.sigma;
    if (r >= rc) return 0.0;
    const double c = kCoreWidth * sigma, w = kWellWidth * sigma;
    const double core = kCoreHeight * std::exp(-(r * r) / (c * c));
    const double well = std::exp(-(r - sigma) * (r - sigma) / (w * w));
    return pair_.epsilon * (core - well) * switch_fn(r, rc);
}

double ShortRangeModel::pair_energy_deriv(double r) const {
    const double rc = cutoff_, sigma = pair_.sigma;
    if (r >= rc) return 0.0;
    const double c = kCoreWidth * sigma, w = kWellWidth * sigma;
    const double core = kCoreHeight * std::exp(-(r * r) / (c * c));
    const double well = std::exp(-(r - sigma) * (r - sigma) / (w * w));
    const double dcore = core * (-2.0 * r / (c * c));
    const double dwell = well * (-2.0 * (r - sigma) / (w * w));
    return pair_.epsilon * ((dcore - dwell) * switch_fn(r, rc) +
                            (core - well) * switch_fn_deriv(r, rc));
}

double ShortRangeModel::evaluate_atom(int i, const System& system, const NeighborList& nlist,
                                      std::vector<Vec3>& forces) const {
    if (kind_ == Kind::toy_mlp) return mlp_atom(i, system, nlist, &forces);

    // half of each pair energy is credited to this atom
    double energy = 0.0;
    const Vec3 ri = system.atoms[static_cast<std::size_t>(i)].position;
    const Vec3 len = system.box.lengths;
    for (const NeighborEntry& e : nlist.neighbors[static_cast<std::size_t>(i)]) {
        const Atom& aj = system.atoms[static_cast<std::size_t>(e.index)];
        const Vec3 rij = aj.position +
                         Vec3{e.shift.x * len.x, e.shift.y * len.y, e.shift.z * len.z} - ri;
        const double r = rij.norm();
        if (r >= cutoff_ || r == 0.0) continue;
        energy += 0.5 * pair_energy(r);
        const double dv = pair_energy_deriv(r);
        // F_i = -dV/dr * d r/d R_i = +dV/dr * rhat; apply half from each side
        const Vec3 f = rij * (0.5 * dv / r);
        forces[static_cast<std::size_t>(i)] += f;
        forces[static_cast<std::size_t>(e.index)] -= f;
    }
    return energy;
}

double ShortRangeModel::evaluate(const System& system, const NeighborList& nlist,
                                 std::vector<Vec3>& forces) const {
    double energy = 0.0;
    for (int i = 0; i < static_cast<int>(system.atoms.size()); ++i)
        energy += evaluate_atom(i, system, nlist, forces);
    return energy;
}

double ShortRangeModel::mlp_atom(int i, const System& system, const NeighborList& nlist,
                                 std::vector<Vec3>* forces) const {
    const Vec3 ri = system.atoms[static_cast<std::size_t>(i)].position;
    const Vec3 len = system.box.lengths;
    const auto& entries = nlist.neighbors[static_cast<std::size_t>(i)];
    const int nk = mlp_params_.n_radial;

    // radial descriptors G_k = sum_j exp(-eta (r - mu_k)^2) s(r)
    std::vector<double> g(static_cast<std::size_t>(nk), 0.0);
    std::vector<double> r_cache(entries.size());
    std::vector<Vec3> rij_cache(entries.size());
    for (std::size_t t = 0; t < entries.size(); ++t) {
        const NeighborEntry& e = entries[t];
        const Vec3 rij = system.atoms[static_cast<std::size_t>(e.index)].position +
                         Vec3{e.shift.x * len.x, e.shift.y * len.y, e.shift.z * len.z} - ri;
        const double r = rij.norm();
        r_cache[t] = r;
        rij_cache[t] = rij;
        if (r >= cutoff_ || r == 0.0) continue;
        const double s = switch_fn(r, cutoff_);
        for (int k = 0; k < nk; ++k) {
            const double d = r - radial_centers_[static_cast<std::size_t>(k)];
            g[static_cast<std::size_t>(k)] += std::exp(-radial_eta_ * d * d) * s;
        }
    }

    // forward pass, caching activations for backprop
    std::vector<std::vector<double>> acts;
    acts.push_back(g);
    for (std::size_t l = 0; l < net_.weights.size(); ++l) {
        const int in = net_.dims[l], out = net_.dims[l + 1];
        std::vector<double> z(static_cast<std::size_t>(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double acc = net_.biases[l][static_cast<std::size_t>(o)];
            for (int q = 0; q < in; ++q)
                acc += net_.weights[l][static_cast<std::size_t>(o) * in + q] *
                       acts.back()[static_cast<std::size_t>(q)];
            z[static_cast<std::size_t>(o)] =
                (l + 1 == net_.weights.size()) ? acc : std::tanh(acc);
        }
        acts.push_back(std::move(z));
    }
    const double energy = acts.back()[0];
    if (!forces) return energy;

    // backprop dE/dG
    std::vector<double> grad = {1.0};
    for (std::size_t l = net_.weights.size(); l-- > 0;) {
        const int in = net_.dims[l], out = net_.dims[l + 1];
        std::vector<double> gin(static_cast<std::size_t>(in), 0.0);
        for (int o = 0; o < out; ++o) {
            double go = grad[static_cast<std::size_t>(o)];
            if (l + 1 != net_.weights.size()) {
                const double a = acts[l + 1][static_cast<std::size_t>(o)];
                go *= 1.0 - a * a;  // tanh'
            }
            for (int q = 0; q < in; ++q)
                gin[static_cast<std::size_t>(q)] +=
                    go * net_.weights[l][static_cast<std::size_t>(o) * in + q];
        }
        grad = std::move(gin);
    }

    // chain through the descriptors to positions
    for (std::size_t t = 0; t < entries.size(); ++t) {
        const double r = r_cache[t];
        if (r >= cutoff_ || r == 0.0) continue;
        const double s = switch_fn(r, cutoff_);
        const double ds = switch_fn_deriv(r, cutoff_);
        double de_dr = 0.0;
        for (int k = 0; k < nk; ++k) {
            const double d = r - radial_centers_[static_cast<std::size_t>(k)];
            const double e = std::exp(-radial_eta_ * d * d);
            de_dr += grad[static_cast<std::size_t>(k)] * (e * ds - 2.0 * radial_eta_ * d * e * s);
        }
        const Vec3 f = rij_cache[t] * (de_dr / r);  // dE/dR_j
        (*forces)[static_cast<std::size_t>(entries[t].index)] -= f;
        (*forces)[static_cast<std::size_t>(i)] += f;
    }
    return energy;
}

Vec3 dw_forward(int atom_index, const System& system, const NeighborList& nlist,
                const WannierModel& model) {
    const Vec3 ri = system.atoms[static_cast<std::size_t>(atom_index)].position;
    const Vec3 len = system.box.lengths;
    Vec3 delta{};
    for (const NeighborEntry& e : nlist.neighbors[static_cast<std::size_t>(atom_index)]) {
        const Vec3 rij = system.atoms[static_cast<std::size_t>(e.index)].position +
                         Vec3{e.shift.x * len.x, e.shift.y * len.y, e.shift.z * len.z} - ri;
        const double r = rij.norm();
        if (r >= model.cutoff || r == 0.0) continue;
        delta += rij * (switch_fn(r, model.cutoff) / r);
    }
    return delta * model.amplitude;
}

WannierJacobian dw_jacobian(int atom_index, const System& system, const NeighborList& nlist,
                            const WannierModel& model) {
    WannierJacobian jac;
    jac.atom_index = atom_index;
    const Vec3 ri = system.atoms[static_cast<std::size_t>(atom_index)].position;
    const Vec3 len = system.box.lengths;
    for (const NeighborEntry& e : nlist.neighbors[static_cast<std::size_t>(atom_index)]) {
        const Vec3 rij = system.atoms[static_cast<std::size_t>(e.index)].position +
                         Vec3{e.shift.x * len.x, e.shift.y * len.y, e.shift.z * len.z} - ri;
        const double r = rij.norm();
        if (r >= model.cutoff || r == 0.0) continue;
        const double s = switch_fn(r, model.cutoff);
        const double ds = switch_fn_deriv(r, model.cutoff);
        // d(s * rhat)/d r_j = ds * rhat rhat^T + (s/r)(I - rhat rhat^T)
        const Vec3 rhat = rij / r;
        std::array<double, 9> block;
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                const double outer = rhat[a] * rhat[b];
                const double id = a == b ? 1.0 : 0.0;
                block[static_cast<std::size_t>(a * 3 + b)] =
                    model.amplitude * (ds * outer + s / r * (id - outer));
            }
        }
        for (int t = 0; t < 9; ++t) jac.self_block[static_cast<std::size_t>(t)] -= block[static_cast<std::size_t>(t)];
        jac.neighbor_index.push_back(e.index);
        jac.neighbor_block.push_back(block);
    }
    return jac;
}

void dw_backward(const WannierJacobian& jac, const Vec3& g, std::vector<Vec3>& forces) {
    auto apply = [&](const std::array<double, 9>& m, int target) {
        // contribution -g^T dDelta/dR_target
        Vec3 f;
        for (int b = 0; b < 3; ++b)
            f[b] = -(g.x * m[static_cast<std::size_t>(b)] + g.y * m[static_cast<std::size_t>(3 + b)] +
                     g.z * m[static_cast<std::size_t>(6 + b)]);
        forces[static_cast<std::size_t>(target)] += f;
    };
    apply(jac.self_block, jac.atom_index);
    for (std::size_t t = 0; t < jac.neighbor_index.size(); ++t)
        apply(jac.neighbor_block[t], jac.neighbor_index[t]);
}

std::vector<Vec3> assemble_forces(const System& system, const ForceBreakdown& terms) {
    const std::size_t n = system.atoms.size();
    if (terms.f_short.size() != n || terms.ion_grad.size() != n || terms.f_chain.size() != n ||
        terms.wc_grad.size() != system.wcs.size())
        throw std::invalid_argument("assemble_forces: missing or mis-sized term");

    std::vector<Vec3> total(n);
    for (std::size_t i = 0; i < n; ++i)
        total[i] = terms.f_short[i] - terms.ion_grad[i] + terms.f_chain[i];
    for (std::size_t w = 0; w < system.wcs.size(); ++w) {
        const int ai = system.atom_index(system.wcs[w].binding_atom_id);
        total[static_cast<std::size_t>(ai)] -= terms.wc_grad[w];
    }
    return total;
}

}  // namespace ringmd
