#include "vcp/collagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vcp/phenotype.hpp"

namespace vcp {

DensityField local_density(const BinaryMask& collagen, double window_um,
                           double spacing_um) {
    if (spacing_um <= 0) throw std::runtime_error("spacing_um must be positive");
    const int wv = static_cast<int>(std::round(window_um / spacing_um));
    if (wv < 1) throw std::runtime_error("window must cover at least one voxel");

    DensityField f;
    f.window_um = window_um;
    f.window_vox = wv;
    f.gx = (collagen.nx + wv - 1) / wv;
    f.gy = (collagen.ny + wv - 1) / wv;
    f.gz = (collagen.nz + wv - 1) / wv;
    f.cells.assign(static_cast<std::size_t>(f.gx) * f.gy * f.gz, 0.0);

    std::vector<std::uint64_t> hits(f.cells.size(), 0), totals(f.cells.size(), 0);
    for (int z = 0; z < collagen.nz; ++z)
        for (int y = 0; y < collagen.ny; ++y)
            for (int x = 0; x < collagen.nx; ++x) {
                const std::size_t c = f.cell_index(x / wv, y / wv, z / wv);
                ++totals[c];
                hits[c] += collagen.at(x, y, z) ? 1 : 0;
            }
    for (std::size_t i = 0; i < f.cells.size(); ++i)
        f.cells[i] = static_cast<double>(hits[i]) / static_cast<double>(totals[i]);
    return f;
}

TwoLevelSplit split_two_level(const DensityField& field) {
    if (field.cells.empty()) throw std::runtime_error("empty density field");
    TwoLevelSplit s;
    s.cell_high.assign(field.cells.size(), 0);

    std::vector<double> sorted(field.cells);
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) {
        s.constant_field = true;
        s.low_center = s.high_center = sorted.front();
        s.threshold = sorted.front();
        return s;
    }

    // Exact 1-D 2-means: optimal clusters are intervals, so scan all
    // threshold positions with prefix sums and keep the split minimizing the
    // total within-class sum of squares (ties -> lower threshold).
    const std::size_t n = sorted.size();
    std::vector<double> pref(n + 1, 0.0), pref2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        pref[i + 1] = pref[i] + sorted[i];
        pref2[i + 1] = pref2[i] + sorted[i] * sorted[i];
    }
    auto sse = [&](std::size_t lo, std::size_t hi) {  // [lo,hi)
        const double cnt = static_cast<double>(hi - lo);
        const double sum = pref[hi] - pref[lo];
        return (pref2[hi] - pref2[lo]) - sum * sum / cnt;
    };
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 1;
    for (std::size_t k = 1; k < n; ++k) {  // low class = sorted[0..k)
        if (sorted[k - 1] == sorted[k]) continue;  // not a valid boundary
        const double obj = sse(0, k) + sse(k, n);
        if (obj < best) {
            best = obj;
            best_k = k;
        }
    }
    s.threshold = sorted[best_k - 1];
    s.low_center = (pref[best_k] - pref[0]) / static_cast<double>(best_k);
    s.high_center = (pref[n] - pref[best_k]) / static_cast<double>(n - best_k);
    for (std::size_t i = 0; i < field.cells.size(); ++i)
        s.cell_high[i] = field.cells[i] > s.threshold ? 1 : 0;
    return s;
}

std::vector<std::uint8_t> label_by_collagen(const ParticleSet& calcs,
                                            const DensityField& field,
                                            const TwoLevelSplit& split) {
    std::vector<std::uint8_t> labels(calcs.particles.size(), 1);
    for (std::size_t i = 0; i < calcs.particles.size(); ++i) {
        const auto& c = calcs.particles[i].centroid_um;
        const int vx = static_cast<int>(c[0] / calcs.spacing_um);
        const int vy = static_cast<int>(c[1] / calcs.spacing_um);
        const int vz = static_cast<int>(c[2] / calcs.spacing_um);
        if (vx < 0 || vy < 0 || vz < 0 || vx >= calcs.nx || vy >= calcs.ny ||
            vz >= calcs.nz)
            throw std::runtime_error("label_by_collagen: centroid outside grid");
        labels[i] = split.voxel_high(field, vx, vy, vz) ? 2 : 1;
    }
    return labels;
}

std::vector<double> default_eps_grid() {
    std::vector<double> grid(20);
    const double lo = std::log(10.0), hi = std::log(1000.0);
    for (int i = 0; i < 20; ++i)
        grid[i] = std::exp(lo + (hi - lo) * i / 19.0);
    return grid;
}

CouplingResult search_density_threshold(const ParticleSet& calcs,
                                        const std::vector<std::uint8_t>& c_labels,
                                        const CouplingConfig& cfg) {
    const std::size_t n = calcs.particles.size();
    if (n < 2) throw std::runtime_error("need at least 2 particles");
    if (c_labels.size() != n) throw std::runtime_error("C-label count mismatch");
    const std::vector<double> grid =
        cfg.eps_grid_um.empty() ? default_eps_grid() : cfg.eps_grid_um;
    if (grid.empty()) throw std::runtime_error("empty eps grid");

    std::vector<std::array<double, 3>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = calcs.particles[i].centroid_um;

    CouplingResult best;
    best.c_labels = c_labels;
    best.agreement = -1;
    for (double eps : grid) {
        ClusterParams cp;
        cp.eps_um = eps;
        cp.min_pts = cfg.min_pts;
        const std::vector<int> cl = dbscan(pts, cp);
        std::vector<std::uint8_t> d(n);
        std::size_t matches = 0, denom = 0;
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = cl[i] >= 0 ? 2 : 1;  // D2 clustered, D1 isolated
            if (cfg.micros_only && calcs.particles[i].size_class != SizeClass::micro)
                continue;
            ++denom;
            // clustered pairs with low collagen, isolated with high
            const bool match = (d[i] == 2 && c_labels[i] == 1) ||
                               (d[i] == 1 && c_labels[i] == 2);
            matches += match ? 1 : 0;
        }
        const double agreement =
            denom == 0 ? 0.0
                       : static_cast<double>(matches) / static_cast<double>(denom);
        if (agreement > best.agreement) {  // ties keep the smaller (earlier) eps
            best.agreement = agreement;
            best.best_eps_um = eps;
            best.d_labels = std::move(d);
        }
    }
    best.converged = best.agreement >= 0.8;
    return best;
}

}  // namespace vcp
