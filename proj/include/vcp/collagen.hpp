#ifndef VCP_COLLAGEN_HPP
#define VCP_COLLAGEN_HPP

#include <cstdint>
#include <vector>

#include "vcp/particles.hpp"
#include "vcp/volume.hpp"

namespace vcp {

/// Collagen volume fraction per cubic window on a downsampled grid. Edge
/// windows use their actual (smaller) voxel counts as denominators.
struct DensityField {
    double window_um = 60.0;
    int window_vox = 0;
    int gx = 0, gy = 0, gz = 0;  // ceil(volume dims / window_vox)
    std::vector<double> cells;   // fraction in [0,1], z-major

    std::size_t cell_index(int cx, int cy, int cz) const {
        return (static_cast<std::size_t>(cz) * gy + cy) * gx + cx;
    }
};

DensityField local_density(const BinaryMask& collagen, double window_um,
                           double spacing_um);

/// Two-level split of the density field: the exact 1-D two-class partition
/// minimizing total within-class variance (the 2-means objective), with ties
/// broken toward the lower threshold. A constant field is flagged and lands
/// entirely in the low class.
struct TwoLevelSplit {
    std::vector<std::uint8_t> cell_high;  // per cell: 1 = high density
    double low_center = 0, high_center = 0;
    double threshold = 0;  // highest value assigned to the low class
    bool constant_field = false;

    bool voxel_high(const DensityField& f, int x, int y, int z) const {
        return cell_high[f.cell_index(x / f.window_vox, y / f.window_vox,
                                      z / f.window_vox)] != 0;
    }
};

TwoLevelSplit split_two_level(const DensityField& field);

// C-labels: 1 = centroid in a low-density collagen cell, 2 = high.
std::vector<std::uint8_t> label_by_collagen(const ParticleSet& calcs,
                                            const DensityField& field,
                                            const TwoLevelSplit& split);

struct CouplingConfig {
    std::vector<double> eps_grid_um;  // empty selects 20 log-spaced 10..1000
    int min_pts = 3;
    bool micros_only = false;  // restrict the agreement denominator to micros
};

std::vector<double> default_eps_grid();

struct CouplingResult {
    double best_eps_um = 0;
    double agreement = 0;
    bool converged = false;  // agreement >= 0.8
    std::vector<std::uint8_t> c_labels;  // 1/2 per particle
    std::vector<std::uint8_t> d_labels;  // 1 = isolated, 2 = clustered, at best eps
};

/// Sweeps the eps grid, clustering all calcification centroids at each eps.
/// Clustered particles (D2) are expected in low-collagen regions (C1) and
/// isolated ones (D1) in high-collagen regions (C2); agreement is the
/// fraction of particles matching that pairing. Returns the eps maximizing
/// agreement (ties toward smaller eps).
CouplingResult search_density_threshold(const ParticleSet& calcs,
                                        const std::vector<std::uint8_t>& c_labels,
                                        const CouplingConfig& cfg);

}  // namespace vcp

#endif
