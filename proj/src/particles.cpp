#include "vcp/particles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace vcp {

namespace {

// union-find over provisional labels with path compression
struct DisjointSet {
    std::vector<std::int32_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::int32_t>(i);
    }
    std::int32_t root(std::int32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = root(a);
        b = root(b);
        if (a == b) return;
        if (a < b) parent[b] = a; else parent[a] = b;
    }
};

}  // namespace

ParticleSet connected_components(const BinaryMask& mask, double spacing_um,
                                 int connectivity) {
    if (connectivity != 26 && connectivity != 6)
        throw std::runtime_error("connectivity must be 6 or 26");
    if (spacing_um <= 0) throw std::runtime_error("spacing_um must be positive");

    const int nx = mask.nx, ny = mask.ny, nz = mask.nz;
    ParticleSet set;
    set.spacing_um = spacing_um;
    set.nx = nx;
    set.ny = ny;
    set.nz = nz;
    set.connectivity = connectivity;
    set.labels.assign(mask.bits.size(), 0);

    // neighbor offsets strictly preceding the current voxel in scan order
    std::vector<std::array<int, 3>> offs;
    if (connectivity == 6) {
        offs = {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
    } else {
        for (int dz = -1; dz <= 0; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
                    offs.push_back({dx, dy, dz});
                }
    }

    // pass 1: provisional labels + equivalences
    std::int32_t next = 1;
    DisjointSet ds(1);
    ds.parent.reserve(1024);
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const std::size_t idx = mask.index(x, y, z);
                if (!mask.bits[idx]) continue;
                std::int32_t lab = 0;
                for (const auto& o : offs) {
                    const int px = x + o[0], py = y + o[1], pz = z + o[2];
                    if (px < 0 || py < 0 || pz < 0 || px >= nx || py >= ny) continue;
                    const std::int32_t nl = set.labels[mask.index(px, py, pz)];
                    if (nl == 0) continue;
                    if (lab == 0) lab = nl;
                    else if (nl != lab) ds.unite(lab, nl);
                }
                if (lab == 0) {
                    lab = next++;
                    ds.parent.push_back(lab);
                }
                set.labels[idx] = lab;
            }
        }
    }

    // pass 2: compress to dense labels ordered by first voxel in scan order
    std::vector<std::int32_t> dense(static_cast<std::size_t>(next), 0);
    std::int32_t count = 0;
    for (std::size_t i = 0; i < set.labels.size(); ++i) {
        if (set.labels[i] == 0) continue;
        const std::int32_t r = ds.root(set.labels[i]);
        if (dense[r] == 0) dense[r] = ++count;
        set.labels[i] = dense[r];
    }

    // particle statistics
    set.particles.assign(count, Particle{});
    std::vector<std::array<double, 3>> sums(count, {0, 0, 0});
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const std::int32_t lab = set.labels[mask.index(x, y, z)];
                if (lab == 0) continue;
                Particle& p = set.particles[lab - 1];
                if (p.voxel_count == 0) {
                    p.id = lab;
                    p.x0 = p.x1 = x;
                    p.y0 = p.y1 = y;
                    p.z0 = p.z1 = z;
                } else {
                    p.x0 = std::min(p.x0, x); p.x1 = std::max(p.x1, x);
                    p.y0 = std::min(p.y0, y); p.y1 = std::max(p.y1, y);
                    p.z0 = std::min(p.z0, z); p.z1 = std::max(p.z1, z);
                }
                ++p.voxel_count;
                sums[lab - 1][0] += x;
                sums[lab - 1][1] += y;
                sums[lab - 1][2] += z;
            }

    const double vox_um3 = spacing_um * spacing_um * spacing_um;
    for (std::int32_t i = 0; i < count; ++i) {
        Particle& p = set.particles[i];
        p.volume_um3 = static_cast<double>(p.voxel_count) * vox_um3;
        p.d_eq_um = std::cbrt(6.0 * p.volume_um3 / std::numbers::pi);
        const double n = static_cast<double>(p.voxel_count);
        for (int a = 0; a < 3; ++a)
            p.centroid_um[a] = (sums[i][a] / n + 0.5) * spacing_um;
    }
    return set;
}

ParticleSet filter_min_volume(ParticleSet set) {
    if (set.min_volume_voxels < 1)
        throw std::runtime_error("min_volume_voxels must be >= 1");
    std::vector<std::uint8_t> keep;
    std::int32_t max_id = 0;
    for (const auto& p : set.particles) max_id = std::max(max_id, p.id);
    keep.assign(static_cast<std::size_t>(max_id) + 1, 0);

    std::vector<Particle> kept;
    kept.reserve(set.particles.size());
    for (auto& p : set.particles) {
        if (p.voxel_count >= static_cast<std::uint64_t>(set.min_volume_voxels)) {
            keep[p.id] = 1;
            kept.push_back(p);
        }
    }
    if (kept.size() != set.particles.size()) {
        for (auto& lab : set.labels)
            if (lab != 0 && !keep[lab]) lab = 0;
    }
    set.particles = std::move(kept);
    return set;
}

void classify_size(ParticleSet& set) {
    for (auto& p : set.particles)
        p.size_class =
            p.d_eq_um < set.size_threshold_um ? SizeClass::micro : SizeClass::macro;
}

void write_particle_csv(const ParticleSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "id,voxel_count,volume_um3,d_eq_um,centroid_x_um,centroid_y_um,"
           "centroid_z_um,size_class,athero,cluster_id,sparse_fraction,dense_fraction\n";
    for (const auto& p : set.particles) {
        out << p.id << ',' << p.voxel_count << ',' << p.volume_um3 << ',' << p.d_eq_um
            << ',' << p.centroid_um[0] << ',' << p.centroid_um[1] << ','
            << p.centroid_um[2] << ','
            << (p.size_class == SizeClass::micro ? "micro" : "macro") << ','
            << (p.athero ? 1 : 0) << ',';
        if (p.cluster_id) out << *p.cluster_id;
        out << ',' << p.sparse_fraction << ',' << p.dense_fraction << '\n';
    }
}

}  // namespace vcp
