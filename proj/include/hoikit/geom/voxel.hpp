#pragma once

#include <cstdint>
#include <vector>

#include "hoikit/geom/winding.hpp"

namespace hoikit::geom {

/// Dense occupancy grid in millimeters.
struct VoxelGrid {
    Vec3 origin{};
    double voxel_size = 1.0;
    std::array<std::uint32_t, 3> dims{1, 1, 1};
    std::vector<bool> occupancy;

    std::size_t cell_count() const {
        return std::size_t(dims[0]) * dims[1] * dims[2];
    }
    std::size_t linear(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return (std::size_t(k) * dims[1] + j) * dims[0] + i;
    }
    Vec3 center(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return origin + Vec3{(i + 0.5) * voxel_size, (j + 0.5) * voxel_size,
                             (k + 0.5) * voxel_size};
    }
};

inline constexpr std::size_t kDefaultVoxelBudget = 1u << 27;

/// Solid-voxelizes a watertight mesh over its bounding box: a cell is
/// occupied when its center lies inside the surface.
inline VoxelGrid voxelize_solid(const TriMesh& mesh, double voxel_size,
                                std::size_t cell_budget = kDefaultVoxelBudget) {
    mesh.require_watertight();
    if (!(voxel_size > 0.0)) throw Error("voxel size must be positive");
    const Aabb box = mesh.bounds();
    const Vec3 ext = box.extent();
    VoxelGrid grid;
    grid.origin = box.lo;
    grid.voxel_size = voxel_size;
    for (int a = 0; a < 3; ++a) {
        const double e = a == 0 ? ext.x : a == 1 ? ext.y : ext.z;
        grid.dims[a] = std::max<std::uint32_t>(1, std::uint32_t(std::ceil(e / voxel_size - 1e-9)));
    }
    if (grid.cell_count() > cell_budget) throw Error("grid too large");
    grid.occupancy.assign(grid.cell_count(), false);
    for (std::uint32_t k = 0; k < grid.dims[2]; ++k)
        for (std::uint32_t j = 0; j < grid.dims[1]; ++j)
            for (std::uint32_t i = 0; i < grid.dims[0]; ++i)
                if (winding_number(mesh, grid.center(i, j, k)) > 0.5)
                    grid.occupancy[grid.linear(i, j, k)] = true;
    return grid;
}

/// Volume of the container that lies inside the probe, in cm^3: counts
/// container-occupied voxel centers that also fall inside the probe surface.
inline double voxelize_and_inside_volume(const TriMesh& container, const TriMesh& probe,
                                         double voxel_size,
                                         std::size_t cell_budget = kDefaultVoxelBudget) {
    container.require_watertight();
    probe.require_watertight();
    const VoxelGrid grid = voxelize_solid(container, voxel_size, cell_budget);
    const Aabb probe_box = probe.bounds();
    std::size_t inside = 0;
    for (std::uint32_t k = 0; k < grid.dims[2]; ++k)
        for (std::uint32_t j = 0; j < grid.dims[1]; ++j)
            for (std::uint32_t i = 0; i < grid.dims[0]; ++i) {
                if (!grid.occupancy[grid.linear(i, j, k)]) continue;
                const Vec3 c = grid.center(i, j, k);
                if (!probe_box.contains(c)) continue;
                if (winding_number(probe, c) > 0.5) ++inside;
            }
    const double mm3 = double(inside) * voxel_size * voxel_size * voxel_size;
    return mm3 / 1000.0;
}

}  // namespace hoikit::geom
