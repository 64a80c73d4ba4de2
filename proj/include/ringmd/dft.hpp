#pragma once

#include <complex>
#include <span>
#include <vector>

#include "ringmd/netsim.hpp"
#include "ringmd/vec.hpp"

namespace ringmd {

using cplx = std::complex<double>;

enum class DftDirection { forward, inverse };

// Dense twiddle-factor matrix for length-N transforms:
// forward entries exp(-2*pi*i*k*n/N), inverse conjugated. No normalization,
// so inverse(forward(x)) = N * x.
class TwiddleMatrix {
  public:
    TwiddleMatrix(int n, DftDirection direction);
    int size() const { return n_; }
    DftDirection direction() const { return dir_; }
    cplx operator()(int k, int n) const { return entries_[static_cast<std::size_t>(k) * n_ + n]; }

  private:
    int n_;
    DftDirection dir_;
    std::vector<cplx> entries_;
};

// Partial 1D DFT from a subset of input indices: returns F[:,J] * x_J, a
// full-length spectrum. Summing partials over a disjoint index cover of
// [0,N) gives the complete transform.
std::vector<cplx> partial_dft_1d(std::span<const cplx> values, std::span<const int> indices,
                                 const TwiddleMatrix& twiddle);

// Complex field on a 3D index block [lo, lo+size) of the global mesh,
// stored x-fastest.
struct Brick {
    Int3 lo;
    Int3 size;
    std::vector<cplx> data;

    Brick() = default;
    Brick(const Int3& lo_, const Int3& size_)
        : lo(lo_), size(size_),
          data(static_cast<std::size_t>(size_.x) * size_.y * size_.z) {}

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * size.y + y) * size.x + x;
    }
    cplx& at(int x, int y, int z) { return data[index(x, y, z)]; }
    const cplx& at(int x, int y, int z) const { return data[index(x, y, z)]; }
    std::size_t points() const { return data.size(); }
};

// Full-mesh grid (single domain); used by the serial oracle and by
// assembly/scatter helpers.
struct Grid3 {
    Int3 dims;
    std::vector<cplx> data;

    Grid3() = default;
    explicit Grid3(const Int3& d)
        : dims(d), data(static_cast<std::size_t>(d.x) * d.y * d.z) {}

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims.y + y) * dims.x + x;
    }
    cplx& at(int x, int y, int z) { return data[index(x, y, z)]; }
    const cplx& at(int x, int y, int z) const { return data[index(x, y, z)]; }
};

// Verification oracle: direct (non-FFT) transform, dimension by dimension.
Grid3 serial_dft_3d(const Grid3& grid, DftDirection direction);

// Reduction operations a node issues per dimension to publish its brick's
// spectrum slice: real+imaginary scalars per point, lane_capacity per op.
int reduction_count(long points_per_node, PayloadMode mode);

// K-space mesh layout over the node grid. Bricks are equal blocks of
// mesh/node_grid points (divisibility enforced, at least 4 per axis).
struct KGrid {
    Int3 mesh;
    Int3 node_grid;
    Vec3 box_lengths{1.0, 1.0, 1.0};
    double kcut = 0.0;  // 1/Angstrom; <= 0 disables the cutoff mask

    KGrid() = default;
    KGrid(const Int3& mesh_dims, const Int3& nodes, const Vec3& box, double kcut_ = 0.0);

    Int3 brick_size() const {
        return {mesh.x / node_grid.x, mesh.y / node_grid.y, mesh.z / node_grid.z};
    }
    Int3 brick_lo(const Int3& node_coords) const {
        Int3 b = brick_size();
        return {node_coords.x * b.x, node_coords.y * b.y, node_coords.z * b.z};
    }

    // signed mode index for global position k on the given axis
    int signed_mode(int axis, int k) const {
        const int n = mesh[axis];
        return k < (n + 1) / 2 ? k : k - n;
    }
    // reciprocal-space component m_alpha = signed mode / box length
    double recip(int axis, int k) const { return signed_mode(axis, k) / box_lengths[axis]; }
};

struct DftOptions {
    PayloadMode mode = PayloadMode::three_f64;
    QuantSpec quant;
    int per_node_chain_limit = 24;
    // chains per master; 0 = auto (about 12 chains per row when the row is
    // shorter than 12 nodes)
    int chains_per_master = 0;
};

// Distributed 3D DFT: per-node partial DFT along one dimension at a time,
// partial spectra summed across each node row through reduction chains.
// Chains are configured per dimension at construction (three chain groups).
class DistributedDft {
  public:
    using Options = DftOptions;

    DistributedDft(const KGrid& kgrid, Network& net, Options options = {});

    // bricks indexed by node id; transformed in place. Returns the simulated
    // makespan of the three chained dimension passes.
    double transform(std::vector<Brick>& bricks, DftDirection direction);

    const KGrid& kgrid() const { return kgrid_; }
    PayloadMode mode() const { return options_.mode; }

    // bricks <-> assembled grid (tests and single-domain oracles)
    Grid3 assemble(const std::vector<Brick>& bricks) const;
    std::vector<Brick> scatter(const Grid3& grid) const;
    std::vector<Brick> empty_bricks() const;

  private:
    struct Row {
        std::vector<int> members;            // node ids, ascending coordinate
        std::vector<std::vector<int>> chains;  // [master_pos][replica] -> chain id
    };

    double transform_dim(std::vector<Brick>& bricks, int axis, const TwiddleMatrix& twiddle);

    KGrid kgrid_;
    Network& net_;
    Options options_;
    std::vector<std::vector<Row>> rows_;  // [axis][row]
};

}  // namespace ringmd
