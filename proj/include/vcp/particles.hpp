#ifndef VCP_PARTICLES_HPP
#define VCP_PARTICLES_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vcp/volume.hpp"

namespace vcp {

enum class SizeClass { micro, macro };

struct Particle {
    int id = 0;  // dense from 1, ordered by first voxel in z-major scan
    std::uint64_t voxel_count = 0;
    double volume_um3 = 0;
    std::array<double, 3> centroid_um{};  // voxel-center coordinates
    double d_eq_um = 0;                   // (6V/pi)^(1/3)
    SizeClass size_class = SizeClass::micro;
    bool athero = false;
    std::optional<int> cluster_id;    // set for clustered micros only
    double sparse_fraction = 0;       // macros only; micros keep 0
    double dense_fraction = 0;
    // bounding box, inclusive, in voxel indices
    int x0 = 0, y0 = 0, z0 = 0, x1 = -1, y1 = -1, z1 = -1;
};

struct ParticleSet {
    std::vector<Particle> particles;
    double spacing_um = 3.0;
    int nx = 0, ny = 0, nz = 0;
    double size_threshold_um = 500.0;
    int min_volume_voxels = 8;
    int connectivity = 26;  // 26 or 6
    std::vector<std::int32_t> labels;  // per voxel, 0 = background

    const Particle* find(int id) const {
        for (const auto& p : particles)
            if (p.id == id) return &p;
        return nullptr;
    }
};

/// Labels connected components of the mask (26-connectivity by default;
/// 6 also supported). Labels are dense from 1 and ordered by each
/// component's first voxel in z-major scan order. Centroids use voxel
/// centers at (i + 0.5) * spacing.
ParticleSet connected_components(const BinaryMask& mask, double spacing_um,
                                 int connectivity = 26);

/// Drops particles below min_volume_voxels; survivor ids are unchanged and
/// their labels stay in the grid (removed labels are zeroed).
ParticleSet filter_min_volume(ParticleSet set);

/// Assigns micro/macro from the equivalent diameter: d_eq < threshold is
/// micro (strict), everything else macro.
void classify_size(ParticleSet& set);

/// Writes one row per particle: id, voxel_count, volume_um3, d_eq_um,
/// centroid, size_class, and the phenotype columns filled in downstream.
void write_particle_csv(const ParticleSet& set, const std::string& path);

}  // namespace vcp

#endif
