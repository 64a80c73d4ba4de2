#include "ringmd/ewald.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ringmd {

void EwaldParams::validate(const SimulationBox& box) const {
    if (!(beta > 0.0)) throw std::invalid_argument("EwaldParams: beta must be positive");
    if (!(kcut > 0.0)) throw std::invalid_argument("EwaldParams: kcut must be positive");
    if (order < 2 || order > 6)
        throw std::invalid_argument("EwaldParams: spline order must be in [2,6]");
    for (int a = 0; a < 3; ++a) {
        // strict Nyquist margin: the sign-ambiguous mesh mode N/2 must stay
        // outside the cutoff sphere
        const double max_mode = kcut * box.lengths[a];
        if (!(max_mode < mesh[a] / 2.0))
            throw std::invalid_argument(
                "EwaldParams: mesh axis " + std::to_string(a) + " (" + std::to_string(mesh[a]) +
                ") cannot resolve kcut " + std::to_string(kcut) + " for box edge " +
                std::to_string(box.lengths[a]));
    }
}

ChargeView collect_charges(const System& system) {
    std::vector<Vec3> wc_pos(system.wcs.size());
    for (std::size_t w = 0; w < system.wcs.size(); ++w)
        wc_pos[w] = system.wc_position(system.wcs[w]);
    return collect_charges(system, wc_pos);
}

ChargeView collect_charges(const System& system, const std::vector<Vec3>& wc_positions) {
    if (wc_positions.size() != system.wcs.size())
        throw std::invalid_argument("collect_charges: WC position count mismatch");
    ChargeView view;
    view.n_atoms = system.atoms.size();
    view.positions.reserve(system.atoms.size() + system.wcs.size());
    view.charges.reserve(view.positions.capacity());
    for (const auto& a : system.atoms) {
        view.positions.push_back(a.position);
        view.charges.push_back(a.charge);
    }
    for (std::size_t w = 0; w < system.wcs.size(); ++w) {
        view.positions.push_back(wc_positions[w]);
        view.charges.push_back(system.wcs[w].charge);
    }
    return view;
}

std::vector<Int3> enumerate_kmodes(const SimulationBox& box, double kcut) {
    std::vector<Int3> modes;
    const Int3 nmax{static_cast<int>(std::floor(kcut * box.lengths.x)),
                    static_cast<int>(std::floor(kcut * box.lengths.y)),
                    static_cast<int>(std::floor(kcut * box.lengths.z))};
    for (int mx = -nmax.x; mx <= nmax.x; ++mx) {
        for (int my = -nmax.y; my <= nmax.y; ++my) {
            for (int mz = -nmax.z; mz <= nmax.z; ++mz) {
                if (mx == 0 && my == 0 && mz == 0) continue;
                const Vec3 m{mx / box.lengths.x, my / box.lengths.y, mz / box.lengths.z};
                if (m.norm2() <= kcut * kcut) modes.push_back({mx, my, mz});
            }
        }
    }
    return modes;
}

std::complex<double> structure_factor(const Vec3& m_recip, const ChargeView& charges) {
    std::complex<double> s{0.0, 0.0};
    for (std::size_t j = 0; j < charges.size(); ++j) {
        const double phase = -2.0 * std::numbers::pi * m_recip.dot(charges.positions[j]);
        s += charges.charges[j] * std::complex<double>{std::cos(phase), std::sin(phase)};
    }
    return s;
}

double ewald_energy_direct(const ChargeView& charges, const SimulationBox& box,
                           const EwaldParams& params) {
    const double v = box.volume();
    double energy = 0.0;
    for (const Int3& mi : enumerate_kmodes(box, params.kcut)) {
        const Vec3 m{mi.x / box.lengths.x, mi.y / box.lengths.y, mi.z / box.lengths.z};
        const double m2 = m.norm2();
        const double g = std::exp(-std::numbers::pi * std::numbers::pi * m2 /
                                  (params.beta * params.beta)) /
                         m2;
        energy += g * std::norm(structure_factor(m, charges));
    }
    return energy / (2.0 * std::numbers::pi * v);
}

KSpaceGradients ewald_forces_direct(const ChargeView& charges, const SimulationBox& box,
                                    const EwaldParams& params) {
    const double v = box.volume();
    KSpaceGradients out;
    out.ion_grad.assign(charges.n_atoms, Vec3{});
    out.wc_grad.assign(charges.size() - charges.n_atoms, Vec3{});

    std::vector<std::complex<double>> phases(charges.size());
    for (const Int3& mi : enumerate_kmodes(box, params.kcut)) {
        const Vec3 m{mi.x / box.lengths.x, mi.y / box.lengths.y, mi.z / box.lengths.z};
        const double m2 = m.norm2();
        const double g = std::exp(-std::numbers::pi * std::numbers::pi * m2 /
                                  (params.beta * params.beta)) /
                         m2;
        std::complex<double> s{0.0, 0.0};
        for (std::size_t j = 0; j < charges.size(); ++j) {
            const double phase = -2.0 * std::numbers::pi * m.dot(charges.positions[j]);
            phases[j] = {std::cos(phase), std::sin(phase)};
            s += charges.charges[j] * phases[j];
        }
        out.energy += g * std::norm(s);
        // dE/dr_j = (2/V) g q_j Im(conj(S) e^{-2 pi i m r_j}) m
        const double pref = 2.0 * g / v;
        for (std::size_t j = 0; j < charges.size(); ++j) {
            const double im = std::imag(std::conj(s) * phases[j]);
            const Vec3 grad = m * (pref * charges.charges[j] * im);
            if (j < charges.n_atoms)
                out.ion_grad[j] += grad;
            else
                out.wc_grad[j - charges.n_atoms] += grad;
        }
    }
    out.energy /= 2.0 * std::numbers::pi * v;
    return out;
}

}  // namespace ringmd
