#pragma once

#include <array>
#include <vector>

#include "ringmd/neighbor.hpp"
#include "ringmd/system.hpp"

namespace ringmd {

// C1 switching function used by both short-range surrogates and the Wannier
// model: s(r) = (1 - (r/rc)^2)^2 inside the cutoff, 0 outside.
double switch_fn(double r, double rc);
double switch_fn_deriv(double r, double rc);

// Short-range interaction surrogate. pair_analytic is a smooth bounded pair
// potential with a single minimum (soft core, compact support); toy_mlp runs
// a small seeded MLP over radial descriptors so inference/backprop cost has a
// realistic shape. Both expose exact analytic gradients.
//
// The default core height (4 * epsilon) must dominate the deepest
// electrostatic pair well at the generator's charge magnitudes, otherwise
// opposite charges collapse onto each other; this mirrors what the trained
// short-range model absorbs in the reference workflow.
struct PairParams {
    double epsilon = 0.6;  // well depth, energy units
    double sigma = 2.4;    // minimum location scale, Angstrom
};

struct MlpParams {
    std::array<int, 3> widths{24, 24, 24};
    int n_radial = 8;
    std::uint64_t seed = 2024;
};

class ShortRangeModel {
  public:
    enum class Kind { pair_analytic, toy_mlp };

    ShortRangeModel(Kind kind, double cutoff, PairParams pair = {}, MlpParams mlp = {});

    Kind kind() const { return kind_; }
    double cutoff() const { return cutoff_; }
    const PairParams& pair() const { return pair_; }

    // pair potential and its radial derivative (pair_analytic kind)
    double pair_energy(double r) const;
    double pair_energy_deriv(double r) const;

    // E_sr plus exact forces -dE/dR accumulated into `forces` (sized to the
    // atom count by the caller). Deterministic: atoms in index order.
    double evaluate(const System& system, const NeighborList& nlist,
                    std::vector<Vec3>& forces) const;

    // per-atom evaluation used by the per-node compute paths; force
    // contributions are written to the atom itself and its neighbors
    double evaluate_atom(int i, const System& system, const NeighborList& nlist,
                         std::vector<Vec3>& forces) const;

  private:
    struct MlpNet {
        std::vector<std::vector<double>> weights;  // per layer, row-major
        std::vector<std::vector<double>> biases;
        std::vector<int> dims;  // layer sizes incl. input and scalar output
    };

    double mlp_atom(int i, const System& system, const NeighborList& nlist,
                    std::vector<Vec3>* forces) const;

    Kind kind_;
    double cutoff_;
    PairParams pair_;
    MlpParams mlp_params_;
    MlpNet net_;
    std::vector<double> radial_centers_;
    double radial_eta_ = 4.0;
};

// Wannier displacement surrogate: Delta_n = a * sum_j s(|r_ij|) * rhat_ij
// over the oxygen's neighbors.
struct WannierModel {
    double amplitude = 0.05;  // Angstrom
    double cutoff = 6.0;
};

Vec3 dw_forward(int atom_index, const System& system, const NeighborList& nlist,
                const WannierModel& model);

// d(Delta)/dR blocks for one oxygen: 3x3 matrices for the atom itself and
// each neighbor, to be contracted with dE/dW during force assembly.
struct WannierJacobian {
    int atom_index = 0;
    std::array<double, 9> self_block{};            // d Delta / d R_i
    std::vector<int> neighbor_index;
    std::vector<std::array<double, 9>> neighbor_block;  // d Delta / d R_j
};

WannierJacobian dw_jacobian(int atom_index, const System& system, const NeighborList& nlist,
                            const WannierModel& model);

// vector-Jacobian product: contributions of -g^T dDelta/dR to each atom
void dw_backward(const WannierJacobian& jac, const Vec3& g, std::vector<Vec3>& forces);

// Eq.-of-motion force assembly from the term breakdown.
struct ForceBreakdown {
    std::vector<Vec3> f_short;      // -dE_sr/dR per atom
    std::vector<Vec3> ion_grad;     // dE_Gt/dR per atom (fixed W)
    std::vector<Vec3> wc_grad;      // dE_Gt/dW per WC
    std::vector<Vec3> f_chain;      // chain-rule contributions per atom
};

// F_i = f_short - ion_grad - wc_grad(binding) + f_chain
std::vector<Vec3> assemble_forces(const System& system, const ForceBreakdown& terms);

}  // namespace ringmd
