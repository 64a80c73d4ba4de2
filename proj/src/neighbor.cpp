#include "ringmd/neighbor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ringmd {

namespace {

struct CellGrid {
    Int3 dims;
    std::vector<std::vector<int>> cells;

    int cell_of(const Vec3& wrapped, const Vec3& box_len) const {
        int cx = std::min(dims.x - 1, static_cast<int>(wrapped.x / box_len.x * dims.x));
        int cy = std::min(dims.y - 1, static_cast<int>(wrapped.y / box_len.y * dims.y));
        int cz = std::min(dims.z - 1, static_cast<int>(wrapped.z / box_len.z * dims.z));
        return (cz * dims.y + cy) * dims.x + cx;
    }
};

}  // namespace

NeighborList build_neighbor_list(const System& system, double cutoff, double skin,
                                 int rebuild_interval) {
    const double reach = cutoff + skin;
    if (!(reach > 0.0)) throw std::invalid_argument("build_neighbor_list: reach must be positive");
    if (reach >= 0.5 * system.box.min_edge())
        throw std::invalid_argument(
            "build_neighbor_list: cutoff + skin must be below half the smallest box edge");

    NeighborList list;
    list.cutoff = cutoff;
    list.skin = skin;
    list.rebuild_interval = rebuild_interval;

    const int n = static_cast<int>(system.atoms.size());
    list.neighbors.resize(n);
    for (int i = 0; i < n; ++i)
        list.neighbors[i].reserve(system.atoms[i].species == Species::O ? kNeighborReserveO
                                                                        : kNeighborReserveH);
    if (n < 2) return list;

    const Vec3 len = system.box.lengths;
    CellGrid grid;
    for (int a = 0; a < 3; ++a) grid.dims[a] = std::max(1, static_cast<int>(len[a] / reach));
    grid.cells.resize(static_cast<std::size_t>(grid.dims.product()));

    std::vector<Vec3> wrapped(n);
    for (int i = 0; i < n; ++i) {
        wrapped[i] = system.box.wrap(system.atoms[i].position);
        grid.cells[grid.cell_of(wrapped[i], len)].push_back(i);
    }

    const double reach2 = reach * reach;
    auto visit_pair = [&](int i, int j) {
        if (j <= i) return;
        Vec3 d = system.box.min_image(wrapped[j] - wrapped[i]);
        if (d.norm2() >= reach2) return;
        // shift such that wrapped[j] + shift*L is the nearest image of j to i
        Int3 shift;
        for (int a = 0; a < 3; ++a)
            shift[a] = static_cast<int>(std::lround((d[a] - (wrapped[j][a] - wrapped[i][a])) / len[a]));
        list.neighbors[i].push_back({j, shift});
        list.neighbors[j].push_back({i, {-shift.x, -shift.y, -shift.z}});
    };

    // With fewer than 3 cells per axis the 27-stencil would visit a cell twice,
    // so fall back to the direct double loop in that regime.
    if (grid.dims.x < 3 || grid.dims.y < 3 || grid.dims.z < 3) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) visit_pair(i, j);
    } else {
        for (int cz = 0; cz < grid.dims.z; ++cz) {
            for (int cy = 0; cy < grid.dims.y; ++cy) {
                for (int cx = 0; cx < grid.dims.x; ++cx) {
                    const auto& home = grid.cells[(cz * grid.dims.y + cy) * grid.dims.x + cx];
                    if (home.empty()) continue;
                    for (int dz = -1; dz <= 1; ++dz) {
                        int nz = (cz + dz + grid.dims.z) % grid.dims.z;
                        for (int dy = -1; dy <= 1; ++dy) {
                            int ny = (cy + dy + grid.dims.y) % grid.dims.y;
                            for (int dx = -1; dx <= 1; ++dx) {
                                int nx = (cx + dx + grid.dims.x) % grid.dims.x;
                                const auto& other =
                                    grid.cells[(nz * grid.dims.y + ny) * grid.dims.x + nx];
                                for (int i : home)
                                    for (int j : other) visit_pair(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    // deterministic ordering independent of cell traversal
    for (auto& l : list.neighbors)
        std::sort(l.begin(), l.end(), [](const NeighborEntry& a, const NeighborEntry& b) {
            if (a.index != b.index) return a.index < b.index;
            if (a.shift.x != b.shift.x) return a.shift.x < b.shift.x;
            if (a.shift.y != b.shift.y) return a.shift.y < b.shift.y;
            return a.shift.z < b.shift.z;
        });
    return list;
}

}  // namespace ringmd
