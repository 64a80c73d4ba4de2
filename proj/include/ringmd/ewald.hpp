#pragma once

#include <complex>
#include <vector>

#include "ringmd/system.hpp"
#include "ringmd/vec.hpp"

namespace ringmd {

// Parameters of the k-space electrostatics for Gaussian charges.
struct EwaldParams {
    double beta = 0.47;          // Gaussian width parameter, 1/Angstrom
    double kcut = 0.6;           // k-space cutoff L, 1/Angstrom
    Int3 mesh{32, 32, 32};       // PPPM mesh
    int order = 4;               // B-spline interpolation order p

    // also checks that the mesh resolves kcut strictly below Nyquist
    void validate(const SimulationBox& box) const;
};

// Point charge locations entering the structure factor: all ions plus all
// resolved Wannier centroid positions, in a fixed (atoms, then WCs) order.
struct ChargeView {
    std::vector<Vec3> positions;
    std::vector<double> charges;
    std::size_t n_atoms = 0;  // positions[0..n_atoms) are ions

    std::size_t size() const { return positions.size(); }
};

ChargeView collect_charges(const System& system);
ChargeView collect_charges(const System& system, const std::vector<Vec3>& wc_positions);

// integer k-modes with 0 < |m| <= kcut (m mapped by m_int/box_lengths)
std::vector<Int3> enumerate_kmodes(const SimulationBox& box, double kcut);

// S(m) = sum_j q_j exp(-2 pi i m . r_j) over ions and WCs
std::complex<double> structure_factor(const Vec3& m_recip, const ChargeView& charges);

// E_Gt = 1/(2 pi V) sum_{m != 0, |m| <= L} exp(-pi^2 m^2/beta^2)/m^2 |S(m)|^2
double ewald_energy_direct(const ChargeView& charges, const SimulationBox& box,
                           const EwaldParams& params);

// Gradients of the direct sum: dE/dR_i for ions (at fixed WC positions) and
// dE/dW_n for WCs. Forces are the negatives; assembly applies Eq.-of-motion
// signs downstream.
struct KSpaceGradients {
    double energy = 0.0;
    std::vector<Vec3> ion_grad;  // size n_atoms
    std::vector<Vec3> wc_grad;   // size n_wcs
};

KSpaceGradients ewald_forces_direct(const ChargeView& charges, const SimulationBox& box,
                                    const EwaldParams& params);

}  // namespace ringmd
