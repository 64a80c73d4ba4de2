#include "ringmd/pppm.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace ringmd {

double bspline_value(int order, double u) {
    if (u <= 0.0 || u >= order) return 0.0;
    // iterate M_1 -> M_order over the shifted arguments u - j
    double m[8] = {0.0};
    for (int j = 0; j < order; ++j) {
        const double uj = u - j;
        m[j] = (uj >= 0.0 && uj < 1.0) ? 1.0 : 0.0;
    }
    for (int p = 2; p <= order; ++p)
        for (int j = 0; j <= order - p; ++j)
            m[j] = ((u - j) * m[j] + (p - (u - j)) * m[j + 1]) / (p - 1);
    return m[0];
}

void bspline_weights(int order, double u, double* weights) {
    const double base = std::floor(u);
    for (int t = 0; t < order; ++t) weights[t] = bspline_value(order, u - (base - order + 1 + t));
}

Pppm::Pppm(const KGrid& kgrid, const EwaldParams& params, DistributedDft& dft, Network& net)
    : kgrid_(kgrid), params_(params), dft_(dft), net_(net) {
    if (!(kgrid.mesh == params.mesh))
        throw std::invalid_argument("Pppm: KGrid mesh disagrees with EwaldParams mesh");
    params_.validate(SimulationBox(kgrid.box_lengths));

    // per-axis deconvolution factors |b(m)|^2 with
    // b(m) = e^{2 pi i (p-1) m / N} / sum_j M_p(j+1) e^{2 pi i m j / N}
    const int p = params_.order;
    for (int axis = 0; axis < 3; ++axis) {
        const int n = kgrid_.mesh[axis];
        bsq_[axis].resize(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            std::complex<double> denom{0.0, 0.0};
            for (int j = 0; j <= p - 2; ++j) {
                const double angle = 2.0 * std::numbers::pi * k * j / n;
                denom += bspline_value(p, j + 1.0) *
                         std::complex<double>{std::cos(angle), std::sin(angle)};
            }
            const double d2 = std::norm(denom);
            // a vanishing denominator can only occur beyond the cutoff mask
            bsq_[axis][static_cast<std::size_t>(k)] = d2 > 0.0 ? 1.0 / d2 : 0.0;
        }
    }
}

double Pppm::green(int kx, int ky, int kz) const {
    const Vec3 m{kgrid_.recip(0, kx), kgrid_.recip(1, ky), kgrid_.recip(2, kz)};
    const double m2 = m.norm2();
    if (m2 == 0.0 || m2 > params_.kcut * params_.kcut) return 0.0;
    const double v = kgrid_.box_lengths.x * kgrid_.box_lengths.y * kgrid_.box_lengths.z;
    const double g = std::exp(-std::numbers::pi * std::numbers::pi * m2 /
                              (params_.beta * params_.beta)) /
                     (2.0 * std::numbers::pi * v * m2);
    return g * bsq_[0][static_cast<std::size_t>(kx)] * bsq_[1][static_cast<std::size_t>(ky)] *
           bsq_[2][static_cast<std::size_t>(kz)];
}

std::vector<Brick> Pppm::spread(const ChargeView& charges,
                                const std::vector<std::vector<int>>& owned) const {
    std::vector<Brick> bricks = dft_.empty_bricks();
    const int p = params_.order;
    const Int3 n = kgrid_.mesh;
    const Int3 bsize = kgrid_.brick_size();
    const Vec3 len = kgrid_.box_lengths;
    const SimulationBox box(len);

    // brick id of a wrapped global mesh index
    auto brick_of = [&](const Int3& cell) {
        const Int3 nc{cell.x / bsize.x, cell.y / bsize.y, cell.z / bsize.z};
        return (nc.z * kgrid_.node_grid.y + nc.y) * kgrid_.node_grid.x + nc.x;
    };

    double wx[8], wy[8], wz[8];
    std::map<std::pair<int, int>, std::size_t> halo_cells;  // (src node, dst brick) -> cells

    for (std::size_t node = 0; node < owned.size(); ++node) {
        for (int idx : owned[node]) {
            const Vec3 pos = box.wrap(charges.positions[static_cast<std::size_t>(idx)]);
            if (!(pos.x >= 0.0 && pos.x < len.x && pos.y >= 0.0 && pos.y < len.y &&
                  pos.z >= 0.0 && pos.z < len.z))
                throw std::runtime_error("Pppm::spread: particle outside box after wrap");
            const double q = charges.charges[static_cast<std::size_t>(idx)];
            // spline support centered on the particle: weight of cell k is
            // M_p(v - k) with v = u + p/2
            const Vec3 v{pos.x / len.x * n.x + 0.5 * p, pos.y / len.y * n.y + 0.5 * p,
                         pos.z / len.z * n.z + 0.5 * p};
            bspline_weights(p, v.x, wx);
            bspline_weights(p, v.y, wy);
            bspline_weights(p, v.z, wz);
            const Int3 base{static_cast<int>(std::floor(v.x)), static_cast<int>(std::floor(v.y)),
                            static_cast<int>(std::floor(v.z))};
            for (int tz = 0; tz < p; ++tz) {
                const int cz = ((base.z - p + 1 + tz) % n.z + n.z) % n.z;
                for (int ty = 0; ty < p; ++ty) {
                    const int cy = ((base.y - p + 1 + ty) % n.y + n.y) % n.y;
                    const double wyz = wy[ty] * wz[tz];
                    for (int tx = 0; tx < p; ++tx) {
                        const int cx = ((base.x - p + 1 + tx) % n.x + n.x) % n.x;
                        const int b = brick_of({cx, cy, cz});
                        Brick& brick = bricks[static_cast<std::size_t>(b)];
                        brick.at(cx - brick.lo.x, cy - brick.lo.y, cz - brick.lo.z) +=
                            q * wx[tx] * wyz;
                        if (b != static_cast<int>(node))
                            ++halo_cells[{static_cast<int>(node), b}];
                    }
                }
            }
        }
    }
    // one batched halo-accumulation message per (node, neighbour brick) pair
    for (const auto& [key, cells] : halo_cells) net_.count_message(cells * sizeof(double) * 2);
    return bricks;
}

double Pppm::total_mesh_charge(const std::vector<Brick>& bricks) const {
    double q = 0.0;
    for (const Brick& b : bricks)
        for (const cplx& z : b.data) q += z.real();
    return q;
}

Pppm::Result Pppm::solve(std::vector<Brick> charge_bricks, bool want_potential) {
    Result result;
    result.sim_time += dft_.transform(charge_bricks, DftDirection::forward);
    const std::vector<Brick>& rho = charge_bricks;

    const int nodes = kgrid_.node_grid.product();
    std::vector<double> local_energy(static_cast<std::size_t>(nodes), 0.0);
    std::vector<Brick> span_potential = dft_.empty_bricks();
    for (int axis = 0; axis < 3; ++axis) result.field[axis] = dft_.empty_bricks();

    for (int node = 0; node < nodes; ++node) {
        const Brick& rb = rho[static_cast<std::size_t>(node)];
        Brick& pb = span_potential[static_cast<std::size_t>(node)];
        for (int z = 0; z < rb.size.z; ++z) {
            for (int y = 0; y < rb.size.y; ++y) {
                for (int x = 0; x < rb.size.x; ++x) {
                    const int kx = rb.lo.x + x, ky = rb.lo.y + y, kz = rb.lo.z + z;
                    const double gh = green(kx, ky, kz);
                    if (gh == 0.0) continue;
                    const cplx r = rb.at(x, y, z);
                    local_energy[static_cast<std::size_t>(node)] += gh * std::norm(r);
                    const cplx phi_hat = 2.0 * gh * r;
                    pb.at(x, y, z) = phi_hat;
                    const Vec3 m{kgrid_.recip(0, kx), kgrid_.recip(1, ky), kgrid_.recip(2, kz)};
                    for (int axis = 0; axis < 3; ++axis) {
                        // field = -grad(potential): multiply by -2 pi i m_a
                        result.field[axis][static_cast<std::size_t>(node)].at(x, y, z) =
                            cplx{0.0, -2.0 * std::numbers::pi * m[axis]} * phi_hat;
                    }
                }
            }
        }
    }

    // energy partials combined across nodes in fixed node order
    std::vector<int> all_nodes(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i) all_nodes[static_cast<std::size_t>(i)] = i;
    auto gathered = net_.allgather(all_nodes, std::move(local_energy));
    for (double e : gathered) result.energy += e;

    for (int axis = 0; axis < 3; ++axis)
        result.sim_time += dft_.transform(result.field[axis], DftDirection::inverse);
    if (want_potential) {
        result.potential = std::move(span_potential);
        result.sim_time += dft_.transform(result.potential, DftDirection::inverse);
    }
    return result;
}

KSpaceGradients Pppm::gather(const Result& result, const ChargeView& charges,
                             const std::vector<std::vector<int>>& owned) const {
    KSpaceGradients out;
    out.energy = result.energy;
    out.ion_grad.assign(charges.n_atoms, Vec3{});
    out.wc_grad.assign(charges.size() - charges.n_atoms, Vec3{});

    const int p = params_.order;
    const Int3 n = kgrid_.mesh;
    const Int3 bsize = kgrid_.brick_size();
    const Vec3 len = kgrid_.box_lengths;
    const SimulationBox box(len);

    auto brick_of = [&](const Int3& cell) {
        const Int3 nc{cell.x / bsize.x, cell.y / bsize.y, cell.z / bsize.z};
        return (nc.z * kgrid_.node_grid.y + nc.y) * kgrid_.node_grid.x + nc.x;
    };

    double wx[8], wy[8], wz[8];
    std::map<std::pair<int, int>, std::size_t> halo_cells;

    for (std::size_t node = 0; node < owned.size(); ++node) {
        for (int idx : owned[node]) {
            const Vec3 pos = box.wrap(charges.positions[static_cast<std::size_t>(idx)]);
            const double q = charges.charges[static_cast<std::size_t>(idx)];
            const Vec3 v{pos.x / len.x * n.x + 0.5 * p, pos.y / len.y * n.y + 0.5 * p,
                         pos.z / len.z * n.z + 0.5 * p};
            bspline_weights(p, v.x, wx);
            bspline_weights(p, v.y, wy);
            bspline_weights(p, v.z, wz);
            const Int3 base{static_cast<int>(std::floor(v.x)), static_cast<int>(std::floor(v.y)),
                            static_cast<int>(std::floor(v.z))};
            Vec3 field{};
            for (int tz = 0; tz < p; ++tz) {
                const int cz = ((base.z - p + 1 + tz) % n.z + n.z) % n.z;
                for (int ty = 0; ty < p; ++ty) {
                    const int cy = ((base.y - p + 1 + ty) % n.y + n.y) % n.y;
                    const double wyz = wy[ty] * wz[tz];
                    for (int tx = 0; tx < p; ++tx) {
                        const int cx = ((base.x - p + 1 + tx) % n.x + n.x) % n.x;
                        const int b = brick_of({cx, cy, cz});
                        const double w = wx[tx] * wyz;
                        const Int3 local{cx - result.field[0][static_cast<std::size_t>(b)].lo.x,
                                         cy - result.field[0][static_cast<std::size_t>(b)].lo.y,
                                         cz - result.field[0][static_cast<std::size_t>(b)].lo.z};
                        for (int axis = 0; axis < 3; ++axis)
                            field[axis] += w * result.field[axis][static_cast<std::size_t>(b)]
                                                   .at(local.x, local.y, local.z)
                                                   .real();
                        if (b != static_cast<int>(node))
                            ++halo_cells[{static_cast<int>(node), b}];
                    }
                }
            }
            // force = q * field; the returned quantity is the gradient dE/dr
            const Vec3 grad = -q * field;
            if (static_cast<std::size_t>(idx) < charges.n_atoms)
                out.ion_grad[static_cast<std::size_t>(idx)] += grad;
            else
                out.wc_grad[static_cast<std::size_t>(idx) - charges.n_atoms] += grad;
        }
    }
    for (const auto& [key, cells] : halo_cells)
        net_.count_message(cells * sizeof(double) * 3);
    return out;
}

}  // namespace ringmd
