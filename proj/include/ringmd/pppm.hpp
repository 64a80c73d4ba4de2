#pragma once

#include <vector>

#include "ringmd/dft.hpp"
#include "ringmd/ewald.hpp"
#include "ringmd/netsim.hpp"

namespace ringmd {

// cardinal B-spline M_p evaluated at u (support (0, p))
double bspline_value(int order, double u);

// the p assignment weights of a particle at fractional mesh coordinate u
// (grid units); weights[t] belongs to mesh point floor(u) - order + 1 + t
void bspline_weights(int order, double u, double* weights);

// PPPM over the distributed mesh: B-spline charge assignment, Poisson solve
// in k-space through the distributed DFT (one forward transform), and ik
// differentiation (three inverse transforms) for the field meshes.
class Pppm {
  public:
    Pppm(const KGrid& kgrid, const EwaldParams& params, DistributedDft& dft, Network& net);

    // charge-view indices each node spreads/gathers (atoms and WCs of the
    // node's subdomain); the fixed (node, index) order keeps mesh sums
    // deterministic
    std::vector<Brick> spread(const ChargeView& charges,
                              const std::vector<std::vector<int>>& owned) const;

    struct Result {
        double energy = 0.0;
        std::vector<Brick> field[3];   // real-space field meshes (real parts)
        std::vector<Brick> potential;  // filled only when requested
        double sim_time = 0.0;         // simulated lane time of the solve
    };

    // consumes the charge mesh; set want_potential for the ik-consistency
    // diagnostics (one extra inverse transform)
    Result solve(std::vector<Brick> charge_bricks, bool want_potential = false);

    // interpolate the fields back to the particles; returns dE/dR and dE/dW
    // (same sign convention as the direct-sum path)
    KSpaceGradients gather(const Result& result, const ChargeView& charges,
                           const std::vector<std::vector<int>>& owned) const;

    double total_mesh_charge(const std::vector<Brick>& bricks) const;
    const KGrid& kgrid() const { return kgrid_; }

  private:
    double green(int kx, int ky, int kz) const;  // G(m) |B(m)|^2 with cutoff mask

    KGrid kgrid_;
    EwaldParams params_;
    DistributedDft& dft_;
    Network& net_;
    std::vector<double> bsq_[3];  // |b(m)|^2 per axis, deconvolution factors
};

}  // namespace ringmd
