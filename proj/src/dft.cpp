#include "ringmd/dft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace ringmd {

TwiddleMatrix::TwiddleMatrix(int n, DftDirection direction) : n_(n), dir_(direction) {
    if (n < 1) throw std::invalid_argument("TwiddleMatrix: N must be >= 1");
    entries_.resize(static_cast<std::size_t>(n) * n);
    const double sign = direction == DftDirection::forward ? -1.0 : 1.0;
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            // reduce k*j mod N first so large products keep full precision
            const long prod = static_cast<long>(k) * j % n;
            const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(prod) / n;
            entries_[static_cast<std::size_t>(k) * n + j] = {std::cos(angle), std::sin(angle)};
        }
    }
}

std::vector<cplx> partial_dft_1d(std::span<const cplx> values, std::span<const int> indices,
                                 const TwiddleMatrix& twiddle) {
    if (values.size() != indices.size())
        throw std::invalid_argument("partial_dft_1d: values/indices size mismatch");
    const int n = twiddle.size();
    std::unordered_set<int> seen;
    for (int j : indices) {
        if (j < 0 || j >= n) throw std::invalid_argument("partial_dft_1d: index out of range");
        if (!seen.insert(j).second)
            throw std::invalid_argument("partial_dft_1d: duplicate index " + std::to_string(j));
    }
    std::vector<cplx> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        for (std::size_t t = 0; t < indices.size(); ++t) acc += twiddle(k, indices[t]) * values[t];
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

namespace {

// in-place dense transform of every line along `axis`
void dft_axis(Grid3& grid, int axis, const TwiddleMatrix& twiddle) {
    const Int3 d = grid.dims;
    const int n = d[axis];
    std::vector<cplx> line(static_cast<std::size_t>(n));
    std::vector<cplx> out(static_cast<std::size_t>(n));

    const int u = axis == 0 ? 1 : 0;
    const int v = axis == 2 ? 1 : 2;
    for (int cv = 0; cv < d[v]; ++cv) {
        for (int cu = 0; cu < d[u]; ++cu) {
            Int3 c;
            c[u] = cu;
            c[v] = cv;
            for (int j = 0; j < n; ++j) {
                c[axis] = j;
                line[static_cast<std::size_t>(j)] = grid.at(c.x, c.y, c.z);
            }
            for (int k = 0; k < n; ++k) {
                cplx acc{0.0, 0.0};
                for (int j = 0; j < n; ++j) acc += twiddle(k, j) * line[static_cast<std::size_t>(j)];
                out[static_cast<std::size_t>(k)] = acc;
            }
            for (int k = 0; k < n; ++k) {
                c[axis] = k;
                grid.at(c.x, c.y, c.z) = out[static_cast<std::size_t>(k)];
            }
        }
    }
}

}  // namespace

Grid3 serial_dft_3d(const Grid3& grid, DftDirection direction) {
    Grid3 out = grid;
    for (int axis = 0; axis < 3; ++axis) {
        TwiddleMatrix twiddle(out.dims[axis], direction);
        dft_axis(out, axis, twiddle);
    }
    return out;
}

int reduction_count(long points_per_node, PayloadMode mode) {
    if (points_per_node < 0) throw std::invalid_argument("reduction_count: negative point count");
    const long values = 2 * points_per_node;  // real + imaginary
    const int cap = lane_capacity(mode);
    return static_cast<int>((values + cap - 1) / cap);
}

KGrid::KGrid(const Int3& mesh_dims, const Int3& nodes, const Vec3& box, double kcut_)
    : mesh(mesh_dims), node_grid(nodes), box_lengths(box), kcut(kcut_) {
    for (int a = 0; a < 3; ++a) {
        if (mesh[a] < 1 || node_grid[a] < 1)
            throw std::invalid_argument("KGrid: dims must be positive");
        if (mesh[a] % node_grid[a] != 0)
            throw std::invalid_argument("KGrid: mesh dim " + std::to_string(mesh[a]) +
                                        " not divisible by node grid " +
                                        std::to_string(node_grid[a]));
        if (mesh[a] / node_grid[a] < 4)
            throw std::invalid_argument(
                "KGrid: fewer than 4 mesh points per node along an axis");
    }
}

DistributedDft::DistributedDft(const KGrid& kgrid, Network& net, Options options)
    : kgrid_(kgrid), net_(net), options_(options) {
    const Int3 ng = kgrid_.node_grid;
    if (net.topology().grid.product() > 1 && !(net.topology().grid == ng))
        throw std::invalid_argument("DistributedDft: node grid disagrees with network topology");

    rows_.resize(3);
    for (int axis = 0; axis < 3; ++axis) {
        const int u = axis == 0 ? 1 : 0;
        const int v = axis == 2 ? 1 : 2;
        const int n = ng[axis];

        if (options_.mode != PayloadMode::three_f64) validate_summand_count(options_.quant, n);

        int mult = options_.chains_per_master;
        if (mult <= 0) mult = std::max(1, 12 / n);

        for (int cv = 0; cv < ng[v]; ++cv) {
            for (int cu = 0; cu < ng[u]; ++cu) {
                Row row;
                for (int c = 0; c < n; ++c) {
                    Int3 coords;
                    coords[axis] = c;
                    coords[u] = cu;
                    coords[v] = cv;
                    row.members.push_back(
                        (coords.z * ng.y + coords.y) * ng.x + coords.x);
                }
                auto chains = configure_chains(row.members, row.members, options_.mode, mult,
                                               options_.per_node_chain_limit);
                row.chains.resize(row.members.size());
                for (std::size_t p = 0; p < row.members.size(); ++p)
                    for (int r = 0; r < mult; ++r)
                        row.chains[p].push_back(net_.add_chain(chains[p * mult + r]));
                rows_[axis].push_back(std::move(row));
            }
        }
    }
}

std::vector<Brick> DistributedDft::empty_bricks() const {
    const Int3 ng = kgrid_.node_grid;
    std::vector<Brick> bricks;
    bricks.reserve(static_cast<std::size_t>(ng.product()));
    for (int node = 0; node < ng.product(); ++node) {
        Int3 coords{node % ng.x, (node / ng.x) % ng.y, node / (ng.x * ng.y)};
        bricks.emplace_back(kgrid_.brick_lo(coords), kgrid_.brick_size());
    }
    return bricks;
}

Grid3 DistributedDft::assemble(const std::vector<Brick>& bricks) const {
    Grid3 grid(kgrid_.mesh);
    for (const Brick& b : bricks)
        for (int z = 0; z < b.size.z; ++z)
            for (int y = 0; y < b.size.y; ++y)
                for (int x = 0; x < b.size.x; ++x)
                    grid.at(b.lo.x + x, b.lo.y + y, b.lo.z + z) = b.at(x, y, z);
    return grid;
}

std::vector<Brick> DistributedDft::scatter(const Grid3& grid) const {
    if (!(grid.dims == kgrid_.mesh))
        throw std::invalid_argument("DistributedDft::scatter: grid dims mismatch");
    std::vector<Brick> bricks = empty_bricks();
    for (Brick& b : bricks)
        for (int z = 0; z < b.size.z; ++z)
            for (int y = 0; y < b.size.y; ++y)
                for (int x = 0; x < b.size.x; ++x)
                    b.at(x, y, z) = grid.at(b.lo.x + x, b.lo.y + y, b.lo.z + z);
    return bricks;
}

double DistributedDft::transform(std::vector<Brick>& bricks, DftDirection direction) {
    if (bricks.size() != static_cast<std::size_t>(kgrid_.node_grid.product()))
        throw std::invalid_argument("DistributedDft::transform: one brick per node required");
    double makespan = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        TwiddleMatrix twiddle(kgrid_.mesh[axis], direction);
        makespan += transform_dim(bricks, axis, twiddle);
    }
    return makespan;
}

double DistributedDft::transform_dim(std::vector<Brick>& bricks, int axis,
                                     const TwiddleMatrix& twiddle) {
    const int u = axis == 0 ? 1 : 0;
    const int v = axis == 2 ? 1 : 2;
    const int n_global = kgrid_.mesh[axis];
    const Int3 bsize = kgrid_.brick_size();
    const int blen = bsize[axis];
    const int n_lines = bsize[u] * bsize[v];
    const int cap = lane_capacity(options_.mode);
    const bool quantized = options_.mode != PayloadMode::three_f64;

    net_.reset_chain_schedule();
    double pass_makespan = 0.0;

    for (const Row& row : rows_[axis]) {
        const int ring = static_cast<int>(row.members.size());

        // every member's partial spectrum for every line of the shared block
        // partials[member][line * n_global + k]
        std::vector<std::vector<cplx>> partials(static_cast<std::size_t>(ring));
        std::vector<int> global_j(static_cast<std::size_t>(blen));
        std::vector<cplx> line_vals(static_cast<std::size_t>(blen));
        for (int mpos = 0; mpos < ring; ++mpos) {
            const Brick& b = bricks[static_cast<std::size_t>(row.members[mpos])];
            for (int j = 0; j < blen; ++j) global_j[static_cast<std::size_t>(j)] = b.lo[axis] + j;
            auto& dst = partials[static_cast<std::size_t>(mpos)];
            dst.resize(static_cast<std::size_t>(n_lines) * n_global);
            for (int l = 0; l < n_lines; ++l) {
                Int3 c;
                c[u] = l % bsize[u];
                c[v] = l / bsize[u];
                for (int j = 0; j < blen; ++j) {
                    c[axis] = j;
                    line_vals[static_cast<std::size_t>(j)] = b.at(c.x, c.y, c.z);
                }
                auto spectrum = partial_dft_1d(line_vals, global_j, twiddle);
                std::copy(spectrum.begin(), spectrum.end(),
                          dst.begin() + static_cast<std::size_t>(l) * n_global);
            }
        }

        // shared amplitude bound for the quantized payload modes: one small
        // allgather of each member's largest |component|
        double amp = 1.0;
        if (quantized) {
            std::vector<double> local_max(static_cast<std::size_t>(ring), 0.0);
            for (int mpos = 0; mpos < ring; ++mpos)
                for (const cplx& z : partials[static_cast<std::size_t>(mpos)])
                    local_max[static_cast<std::size_t>(mpos)] =
                        std::max({local_max[static_cast<std::size_t>(mpos)], std::abs(z.real()),
                                  std::abs(z.imag())});
            auto all = net_.allgather(row.members, std::move(local_max));
            amp = *std::max_element(all.begin(), all.end());
            if (amp == 0.0) amp = 1.0;
        }

        // ring position of each member for every master's chain order
        for (int dpos = 0; dpos < ring; ++dpos) {
            const int dest_node = row.members[static_cast<std::size_t>(dpos)];
            Brick& dest = bricks[static_cast<std::size_t>(dest_node)];
            const int k_lo = dest.lo[axis];

            const ReductionChain& chain0 = net_.chain(row.chains[static_cast<std::size_t>(dpos)][0]);
            // contribution order along the chain: master first, then relays
            std::vector<int> order(static_cast<std::size_t>(ring));
            order[0] = dpos;
            for (std::size_t r = 0; r < chain0.relays.size(); ++r) {
                auto it = std::find(row.members.begin(), row.members.end(), chain0.relays[r]);
                order[r + 1] = static_cast<int>(it - row.members.begin());
            }

            const long total_values = 2L * blen * n_lines;
            const int n_ops = static_cast<int>((total_values + cap - 1) / cap);
            std::vector<double> chunk(static_cast<std::size_t>(cap));
            std::vector<Payload> contributions(static_cast<std::size_t>(ring));
            std::vector<double> decoded;
            decoded.reserve(static_cast<std::size_t>(total_values));

            auto value_of = [&](int mpos, long value_idx) {
                // values ordered [line][k in slice][re, im]
                const long point = value_idx / 2;
                const int l = static_cast<int>(point / blen);
                const int k = k_lo + static_cast<int>(point % blen);
                const cplx& z =
                    partials[static_cast<std::size_t>(mpos)][static_cast<std::size_t>(l) * n_global + k];
                return value_idx % 2 == 0 ? z.real() : z.imag();
            };

            if (ring == 1) {
                // single-member row: nothing to reduce across the network;
                // the payload codec still applies so numeric behavior does
                // not depend on the node count
                for (long v = 0; v < total_values; ++v) decoded.push_back(value_of(0, v));
                if (quantized) {
                    for (double& x : decoded) {
                        const std::uint32_t lane = quantize_lane(x / amp, options_.quant);
                        x = (static_cast<double>(static_cast<std::int64_t>(lane) -
                                                 static_cast<std::int64_t>(options_.quant.bias)) /
                             options_.quant.scale) *
                            amp;
                    }
                }
            } else {
                for (int op = 0; op < n_ops; ++op) {
                    const long begin = static_cast<long>(op) * cap;
                    const long end = std::min(total_values, begin + cap);
                    const std::size_t count = static_cast<std::size_t>(end - begin);
                    for (int rpos = 0; rpos < ring; ++rpos) {
                        const int mpos = order[static_cast<std::size_t>(rpos)];
                        chunk.resize(count);
                        for (std::size_t t = 0; t < count; ++t)
                            chunk[t] = value_of(mpos, begin + static_cast<long>(t));
                        if (!quantized) {
                            contributions[static_cast<std::size_t>(rpos)] = Payload::doubles(chunk);
                        } else {
                            std::vector<double> scaled(count);
                            for (std::size_t t = 0; t < count; ++t) scaled[t] = chunk[t] / amp;
                            contributions[static_cast<std::size_t>(rpos)] =
                                Payload::u64(quantize_pack(scaled, options_.quant), options_.mode);
                        }
                    }
                    const int chain_id =
                        row.chains[static_cast<std::size_t>(dpos)]
                                  [static_cast<std::size_t>(op) %
                                   row.chains[static_cast<std::size_t>(dpos)].size()];
                    auto result = net_.chain_reduce(chain_id, contributions, 0.0);
                    pass_makespan = std::max(pass_makespan, result.finish_time);
                    if (!quantized) {
                        decoded.insert(decoded.end(), result.value.f64.begin(),
                                       result.value.f64.end());
                    } else {
                        auto values =
                            unpack_dequantize(result.value.words, count, ring, options_.quant);
                        for (double& x : values) x *= amp;
                        decoded.insert(decoded.end(), values.begin(), values.end());
                    }
                }
            }

            // write the summed slice into the destination brick
            for (int l = 0; l < n_lines; ++l) {
                Int3 c;
                c[u] = l % bsize[u];
                c[v] = l / bsize[u];
                for (int k = 0; k < blen; ++k) {
                    c[axis] = k;
                    const std::size_t base = 2 * (static_cast<std::size_t>(l) * blen + k);
                    dest.at(c.x, c.y, c.z) = {decoded[base], decoded[base + 1]};
                }
            }
        }
    }
    return pass_makespan;
}

}  // namespace ringmd
