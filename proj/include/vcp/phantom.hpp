#ifndef VCP_PHANTOM_HPP
#define VCP_PHANTOM_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcp/phenotype.hpp"
#include "vcp/volume.hpp"

namespace vcp {

// Planted geometry is specified in voxel units; intensities follow the fixed
// model: background 0.05, tissue 0.45, lipid 0.30 (blurred boundary),
// calcification 0.95, holder 0.45.

struct LipidPoolSpec {
    std::array<double, 3> center;     // voxels
    std::array<double, 3> semi_axes;  // voxels
    double blur_sigma = 1.5;          // voxels
};

struct MicroSpec {
    std::array<double, 3> center;  // voxels
    double radius = 4.0;           // voxels
    int cluster = 0;               // 0 = isolated, else planted cluster number
};

struct SpikeSpec {
    std::array<double, 3> direction;  // need not be normalized
    double length = 20.0;             // voxels beyond the core surface
    double radius = 2.5;              // voxels
};

struct MacroSpec {
    std::array<double, 3> center;  // voxels
    double core_radius = 23.0;     // voxels; 0 with a shell gives a hollow macro
    std::vector<SpikeSpec> spikes;
    bool porous_shell = false;
    double shell_radius = 0.0;     // voxels
    double shell_thickness = 0.0;  // voxels
};

struct RingArtifactSpec {
    double amplitude = 0.0;
    double cx = 0.0, cy = 0.0;  // voxels; defaults to the volume center
    double period = 14.0;       // voxels between rings
};

struct StreakArtifactSpec {
    int rays_per_macro = 0;
    double intensity = 0.08;
    double length = 90.0;  // voxels
};

struct HolderSpec {
    bool enabled = false;
    // axis-aligned bar spanning all z
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
};

struct CollagenZoneSpec {
    std::array<double, 3> center;  // voxels
    double radius = 22.0;          // voxels
};

struct CollagenSpec {
    bool enabled = false;
    double high_fill = 0.45;  // Bernoulli fill fraction inside tissue
    double low_fill = 0.05;
    std::vector<CollagenZoneSpec> low_zones;
};

struct PhantomSpec {
    int nx = 256, ny = 256, nz = 256;
    double spacing_um = 12.0;
    // annular tube along z with a wobbling center path
    double tube_cx = 128.0, tube_cy = 128.0;
    double inner_radius = 20.0, outer_radius = 104.0;  // voxels
    double path_amplitude = 5.0;  // voxels
    double path_turns = 1.5;
    std::vector<LipidPoolSpec> lipid_pools;
    std::vector<MicroSpec> micros;
    std::vector<MacroSpec> macros;
    double noise_sigma = 0.0;
    RingArtifactSpec ring;
    StreakArtifactSpec streaks;
    HolderSpec holder;
    CollagenSpec collagen;
    double size_threshold_um = 500.0;
    std::uint64_t seed = 1;

    std::array<double, 2> tube_center(int z) const {
        const double t = 6.283185307179586 * path_turns * z / std::max(1, nz);
        return {tube_cx + path_amplitude * std::sin(t),
                tube_cy + path_amplitude * std::cos(t)};
    }
};

nlohmann::json phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

/// One planted calcification, ordered to match the label order
/// connected_components assigns (first voxel in z-major scan).
struct PlantedParticle {
    std::uint64_t voxel_count = 0;
    std::array<double, 3> centroid_um{};
    bool is_macro = false;
    bool athero = false;
    int cluster = 0;               // 0 = isolated
    double sparse_fraction = 0;    // macros: spike/shell share of the volume
    std::uint8_t c_label = 0;      // 1 = low-collagen zone, 2 = high; 0 = n/a
};

struct PhantomTruth {
    VoxelVolume volume;  // rendered grayscale, artifacts applied
    BinaryMask sample, lipid, calc;
    BinaryMask collagen;  // empty mask when collagen is disabled
    std::vector<PlantedParticle> planted;
    PhenotypeReport report;  // derived from planted geometry, timings zero
    int planted_clusters = 0;
    std::vector<int> annotated_z;  // 25 uniformly distributed slices
};

/// Renders the phantom and its ground truth. Deterministic per seed; errors
/// when a planted structure leaves the tissue, violates its size class, or
/// touches another structure.
PhantomTruth generate(const PhantomSpec& spec);

/// Ground-truth manual marking for one slice, cut from the truth masks.
SliceAnnotation annotation_at(const PhantomTruth& truth, int z);

/// The artifact-laden phantom used by the verification suite: ring + streak
/// + noise + holder, 2 macros with spikes, 7 micro clusters, 2 lipid pools,
/// collagen low-density zones over the cluster sites.
PhantomSpec standard_phantom_spec();

}  // namespace vcp

#endif
