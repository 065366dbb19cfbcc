#ifndef VCP_PHENOTYPE_HPP
#define VCP_PHENOTYPE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcp/metrics.hpp"
#include "vcp/particles.hpp"
#include "vcp/volume.hpp"

namespace vcp {

struct ClusterParams {
    double eps_um = 150.0;  // neighborhood radius
    int min_pts = 3;        // minimum neighbors including self
};

struct TopologyParams {
    double opening_radius_um = 150.0;
};

/// Density-based clustering over points in micrometers. Core point: at least
/// min_pts points within eps (including itself). Returns one label per point:
/// -1 for isolated (noise), otherwise cluster ids dense from 0 ordered by
/// each cluster's minimal member index.
std::vector<int> dbscan(const std::vector<std::array<double, 3>>& points,
                        const ClusterParams& params);

/// Runs dbscan over micro centroids only; clustered micros receive a
/// cluster_id (1-based), isolated micros none. Macros are untouched.
void classify_micro_distribution(ParticleSet& set, const ClusterParams& params);

/// Morphological opening with a digitized ball of the given radius, exact
/// via squared Euclidean distance transforms. Out-of-volume voxels count as
/// background.
BinaryMask binary_opening(const BinaryMask& mask, double radius_um, double spacing_um);

struct TopologyResult {
    BinaryMask dense;  // voxels surviving the opening
    double sparse_fraction = 0;
    double dense_fraction = 0;
};

/// Splits one macro particle into dense (survives opening) and sparse
/// (removed by opening) voxels. Errors when the radius is below the voxel
/// resolution.
TopologyResult classify_macro_topology(const BinaryMask& particle,
                                       const TopologyParams& params, double spacing_um);

/// Applies classify_macro_topology to every macro in the set, filling
/// sparse/dense fractions. Optionally writes per-voxel dense flags into
/// dense_out (same dims as the set).
void classify_all_macro_topology(ParticleSet& set, const TopologyParams& params,
                                 BinaryMask* dense_out = nullptr);

enum class ColocalizeMode { voxel_overlap, centroid };

/// Marks a particle athero when at least overlap_fraction of its voxels lie
/// inside the lipid mask (or when its centroid does, in centroid mode).
void colocalize(ParticleSet& set, const BinaryMask& lipid,
                double overlap_fraction = 0.5,
                ColocalizeMode mode = ColocalizeMode::voxel_overlap);

enum class Phenotype : int {
    athero_isolated_micro = 0,
    athero_clustered_micro,
    athero_sparse_macro,
    athero_dense_macro,
    nonathero_isolated_micro,
    nonathero_clustered_micro,
    nonathero_sparse_macro,
    nonathero_dense_macro,
};
constexpr int kPhenotypeCount = 8;

const char* phenotype_name(Phenotype p);

/// Maps a fully classified particle to its phenotype. Macro dominance is by
/// majority voxel fraction; ties go to dense.
Phenotype assign_phenotype(const Particle& p);

/// Two-way volume split within a particle group; empty is flagged when the
/// group has no volume.
struct GroupFractions {
    double first = 0;   // sparse (macros) / isolated (micros)
    double second = 0;  // dense (macros) / clustered (micros)
    bool empty = true;
};

struct PhenotypeReport {
    double tissue_um3 = 0, lipid_um3 = 0, calc_um3 = 0;
    double lipid_to_tissue = 0, calc_to_tissue = 0;
    double athero_to_calc = 0, macro_to_calc = 0, clustered_micro_to_calc = 0;
    bool calc_empty = true;  // flags the three *_to_calc ratios
    GroupFractions athero_macro, nonathero_macro;  // sparse / dense
    GroupFractions athero_micro, nonathero_micro;  // isolated / clustered
    std::array<std::uint64_t, kPhenotypeCount> phenotype_counts{};
    std::uint64_t particle_count = 0;
    StageTimings timings;
};

/// Builds the full quantitative report from the masks and the classified
/// particle set. Errors on zero tissue volume.
PhenotypeReport build_report(const BinaryMask& tissue, const BinaryMask& lipid,
                             const ParticleSet& calcs);

nlohmann::json report_to_json(const PhenotypeReport& r);

/// Per-voxel phenotype codes: 0 background, otherwise phenotype index + 1.
std::vector<std::uint8_t> phenotype_label_volume(const ParticleSet& set);

}  // namespace vcp

#endif
