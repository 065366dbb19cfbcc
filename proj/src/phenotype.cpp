#include "vcp/phenotype.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

using nlohmann::json;

namespace vcp {

std::vector<int> dbscan(const std::vector<std::array<double, 3>>& points,
                        const ClusterParams& params) {
    if (!(params.eps_um > 0)) throw std::runtime_error("dbscan: eps_um must be > 0");
    if (params.min_pts < 2) throw std::runtime_error("dbscan: min_pts must be >= 2");
    const std::size_t n = points.size();
    for (const auto& p : points)
        for (double c : p)
            if (!std::isfinite(c)) throw std::runtime_error("dbscan: non-finite point");

    const double eps2 = params.eps_um * params.eps_um;
    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = points[i][0] - points[j][0];
            const double dy = points[i][1] - points[j][1];
            const double dz = points[i][2] - points[j][2];
            if (dx * dx + dy * dy + dz * dz <= eps2) out.push_back(j);
        }
        return out;  // includes i itself
    };

    constexpr int kUnvisited = -2;
    std::vector<int> label(n, kUnvisited);
    int next_cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        auto nb = neighbors(i);
        if (static_cast<int>(nb.size()) < params.min_pts) {
            label[i] = -1;  // noise for now; may become a border point later
            continue;
        }
        const int cid = next_cluster++;
        label[i] = cid;
        std::deque<std::size_t> queue(nb.begin(), nb.end());
        while (!queue.empty()) {
            const std::size_t q = queue.front();
            queue.pop_front();
            if (label[q] == -1) label[q] = cid;  // border point
            if (label[q] != kUnvisited) continue;
            label[q] = cid;
            auto qn = neighbors(q);
            if (static_cast<int>(qn.size()) >= params.min_pts)
                queue.insert(queue.end(), qn.begin(), qn.end());
        }
    }

    // relabel clusters by minimal member index
    std::vector<int> order(next_cluster, -1);
    int dense_id = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (label[i] >= 0 && order[label[i]] < 0) order[label[i]] = dense_id++;
    for (std::size_t i = 0; i < n; ++i)
        if (label[i] >= 0) label[i] = order[label[i]];
    return label;
}

void classify_micro_distribution(ParticleSet& set, const ClusterParams& params) {
    std::vector<std::size_t> micro_idx;
    std::vector<std::array<double, 3>> pts;
    for (std::size_t i = 0; i < set.particles.size(); ++i) {
        if (set.particles[i].size_class == SizeClass::micro) {
            micro_idx.push_back(i);
            pts.push_back(set.particles[i].centroid_um);
        }
    }
    if (pts.empty()) return;
    const std::vector<int> labels = dbscan(pts, params);
    for (std::size_t k = 0; k < micro_idx.size(); ++k) {
        Particle& p = set.particles[micro_idx[k]];
        if (labels[k] >= 0) p.cluster_id = labels[k] + 1;
        else p.cluster_id.reset();
    }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher 1D squared distance transform
void dt1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
          std::vector<double>& zbound, int n) {
    int k = 0;
    v[0] = 0;
    zbound[0] = -kInf;
    zbound[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int p = v[k];
            s = ((f[q] + q * static_cast<double>(q)) - (f[p] + p * static_cast<double>(p))) /
                (2.0 * (q - p));
            if (s > zbound[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        zbound[k] = s;
        zbound[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (zbound[k + 1] < q) ++k;
        const double dq = q - static_cast<double>(v[k]);
        d[q] = dq * dq + f[v[k]];
    }
}

// squared Euclidean distance to the nearest source voxel (sources where
// src[i] != 0); exact integer values computed in doubles
std::vector<double> squared_edt(const std::vector<std::uint8_t>& src, int nx, int ny,
                                int nz) {
    std::vector<double> dist(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) dist[i] = src[i] ? 0.0 : kInf;

    const int nmax = std::max({nx, ny, nz});
    std::vector<double> f(nmax), d(nmax), zb(nmax + 1);
    std::vector<int> v(nmax);
    auto idx = [nx, ny](int x, int y, int z) {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    };

    for (int z = 0; z < nz; ++z)  // x pass
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) f[x] = dist[idx(x, y, z)];
            dt1d(f, d, v, zb, nx);
            for (int x = 0; x < nx; ++x) dist[idx(x, y, z)] = d[x];
        }
    for (int z = 0; z < nz; ++z)  // y pass
        for (int x = 0; x < nx; ++x) {
            for (int y = 0; y < ny; ++y) f[y] = dist[idx(x, y, z)];
            dt1d(f, d, v, zb, ny);
            for (int y = 0; y < ny; ++y) dist[idx(x, y, z)] = d[y];
        }
    for (int y = 0; y < ny; ++y)  // z pass
        for (int x = 0; x < nx; ++x) {
            for (int z = 0; z < nz; ++z) f[z] = dist[idx(x, y, z)];
            dt1d(f, d, v, zb, nz);
            for (int z = 0; z < nz; ++z) dist[idx(x, y, z)] = d[z];
        }
    return dist;
}

}  // namespace

BinaryMask binary_opening(const BinaryMask& mask, double radius_um, double spacing_um) {
    if (spacing_um <= 0) throw std::runtime_error("spacing_um must be positive");
    if (radius_um < spacing_um) throw std::runtime_error("radius below resolution");
    // integer squared radius of the digitized ball, in voxels
    const double rv = radius_um / spacing_um;
    const double r2 = std::floor(rv * rv + 1e-9);

    // pad by one background layer so out-of-volume counts as background
    const int nx = mask.nx + 2, ny = mask.ny + 2, nz = mask.nz + 2;
    std::vector<std::uint8_t> bg(static_cast<std::size_t>(nx) * ny * nz, 1);
    auto idx = [nx, ny](int x, int y, int z) {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    };
    for (int z = 0; z < mask.nz; ++z)
        for (int y = 0; y < mask.ny; ++y)
            for (int x = 0; x < mask.nx; ++x)
                bg[idx(x + 1, y + 1, z + 1)] = mask.at(x, y, z) ? 0 : 1;

    // erosion: keep voxels strictly farther than r from background
    const std::vector<double> d_bg = squared_edt(bg, nx, ny, nz);
    std::vector<std::uint8_t> eroded(bg.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < bg.size(); ++i) {
        eroded[i] = (!bg[i] && d_bg[i] > r2) ? 1 : 0;
        any |= (eroded[i] != 0);
    }

    BinaryMask out(mask.nx, mask.ny, mask.nz);
    if (!any) return out;  // opening removed everything

    // dilation of the eroded set by the same ball
    const std::vector<double> d_er = squared_edt(eroded, nx, ny, nz);
    for (int z = 0; z < mask.nz; ++z)
        for (int y = 0; y < mask.ny; ++y)
            for (int x = 0; x < mask.nx; ++x)
                out.set(x, y, z, d_er[idx(x + 1, y + 1, z + 1)] <= r2);
    return out;
}

TopologyResult classify_macro_topology(const BinaryMask& particle,
                                       const TopologyParams& params, double spacing_um) {
    if (!(params.opening_radius_um > 0))
        throw std::runtime_error("opening_radius_um must be > 0");
    TopologyResult res;
    res.dense = binary_opening(particle, params.opening_radius_um, spacing_um);
    std::uint64_t total = 0, dense = 0;
    for (std::size_t i = 0; i < particle.bits.size(); ++i) {
        if (!particle.bits[i]) continue;
        ++total;
        dense += res.dense.bits[i] ? 1 : 0;
    }
    if (total == 0) throw std::runtime_error("empty particle mask");
    res.dense_fraction = static_cast<double>(dense) / static_cast<double>(total);
    res.sparse_fraction = static_cast<double>(total - dense) / static_cast<double>(total);
    return res;
}

void classify_all_macro_topology(ParticleSet& set, const TopologyParams& params,
                                 BinaryMask* dense_out) {
    if (dense_out) *dense_out = BinaryMask(set.nx, set.ny, set.nz);
    for (auto& p : set.particles) {
        if (p.size_class != SizeClass::macro) {
            p.sparse_fraction = p.dense_fraction = 0;
            continue;
        }
        // extract this particle's voxels on its bounding box
        const int bx = p.x1 - p.x0 + 1, by = p.y1 - p.y0 + 1, bz = p.z1 - p.z0 + 1;
        BinaryMask sub(bx, by, bz);
        for (int z = 0; z < bz; ++z)
            for (int y = 0; y < by; ++y)
                for (int x = 0; x < bx; ++x) {
                    const auto lab =
                        set.labels[(static_cast<std::size_t>(z + p.z0) * set.ny + (y + p.y0)) *
                                       set.nx +
                                   (x + p.x0)];
                    sub.set(x, y, z, lab == p.id);
                }
        TopologyResult tr = classify_macro_topology(sub, params, set.spacing_um);
        p.sparse_fraction = tr.sparse_fraction;
        p.dense_fraction = tr.dense_fraction;
        if (dense_out) {
            for (int z = 0; z < bz; ++z)
                for (int y = 0; y < by; ++y)
                    for (int x = 0; x < bx; ++x)
                        if (tr.dense.at(x, y, z))
                            dense_out->set(x + p.x0, y + p.y0, z + p.z0, true);
        }
    }
}

void colocalize(ParticleSet& set, const BinaryMask& lipid, double overlap_fraction,
                ColocalizeMode mode) {
    if (lipid.nx != set.nx || lipid.ny != set.ny || lipid.nz != set.nz)
        throw std::runtime_error("colocalize: lipid mask dimension mismatch");

    if (mode == ColocalizeMode::centroid) {
        for (auto& p : set.particles) {
            const int cx = static_cast<int>(p.centroid_um[0] / set.spacing_um);
            const int cy = static_cast<int>(p.centroid_um[1] / set.spacing_um);
            const int cz = static_cast<int>(p.centroid_um[2] / set.spacing_um);
            p.athero = cx >= 0 && cy >= 0 && cz >= 0 && cx < set.nx && cy < set.ny &&
                       cz < set.nz && lipid.at(cx, cy, cz);
        }
        return;
    }

    std::int32_t max_id = 0;
    for (const auto& p : set.particles) max_id = std::max(max_id, p.id);
    std::vector<std::uint64_t> inside(static_cast<std::size_t>(max_id) + 1, 0);
    for (std::size_t i = 0; i < set.labels.size(); ++i) {
        const std::int32_t lab = set.labels[i];
        if (lab > 0 && lab <= max_id && lipid.bits[i]) ++inside[lab];
    }
    for (auto& p : set.particles) {
        const double frac =
            static_cast<double>(inside[p.id]) / static_cast<double>(p.voxel_count);
        p.athero = frac >= overlap_fraction;
    }
}

const char* phenotype_name(Phenotype p) {
    switch (p) {
        case Phenotype::athero_isolated_micro: return "athero-isolated-micro";
        case Phenotype::athero_clustered_micro: return "athero-clustered-micro";
        case Phenotype::athero_sparse_macro: return "athero-sparse-macro";
        case Phenotype::athero_dense_macro: return "athero-dense-macro";
        case Phenotype::nonathero_isolated_micro: return "non-athero-isolated-micro";
        case Phenotype::nonathero_clustered_micro: return "non-athero-clustered-micro";
        case Phenotype::nonathero_sparse_macro: return "non-athero-sparse-macro";
        case Phenotype::nonathero_dense_macro: return "non-athero-dense-macro";
    }
    return "?";
}

Phenotype assign_phenotype(const Particle& p) {
    if (p.size_class == SizeClass::micro) {
        if (p.athero)
            return p.cluster_id ? Phenotype::athero_clustered_micro
                                : Phenotype::athero_isolated_micro;
        return p.cluster_id ? Phenotype::nonathero_clustered_micro
                            : Phenotype::nonathero_isolated_micro;
    }
    if (std::fabs(p.sparse_fraction + p.dense_fraction - 1.0) > 1e-9)
        throw std::runtime_error("assign_phenotype: macro topology not assigned");
    const bool sparse = p.sparse_fraction > p.dense_fraction;  // tie goes to dense
    if (p.athero)
        return sparse ? Phenotype::athero_sparse_macro : Phenotype::athero_dense_macro;
    return sparse ? Phenotype::nonathero_sparse_macro : Phenotype::nonathero_dense_macro;
}

PhenotypeReport build_report(const BinaryMask& tissue, const BinaryMask& lipid,
                             const ParticleSet& calcs) {
    PhenotypeReport r;
    const double vox = calcs.spacing_um * calcs.spacing_um * calcs.spacing_um;
    const std::uint64_t tissue_vox = tissue.count_true();
    if (tissue_vox == 0) throw std::runtime_error("build_report: zero tissue volume");
    const std::uint64_t lipid_vox = lipid.count_true();

    std::uint64_t calc_vox = 0, athero_vox = 0, macro_vox = 0, clustered_micro_vox = 0;
    double athero_macro_sparse = 0, athero_macro_total = 0;
    double nonathero_macro_sparse = 0, nonathero_macro_total = 0;
    std::uint64_t athero_micro_iso = 0, athero_micro_total = 0;
    std::uint64_t nonathero_micro_iso = 0, nonathero_micro_total = 0;

    for (const auto& p : calcs.particles) {
        calc_vox += p.voxel_count;
        if (p.athero) athero_vox += p.voxel_count;
        if (p.size_class == SizeClass::macro) {
            macro_vox += p.voxel_count;
            const double v = static_cast<double>(p.voxel_count);
            if (p.athero) {
                athero_macro_total += v;
                athero_macro_sparse += p.sparse_fraction * v;
            } else {
                nonathero_macro_total += v;
                nonathero_macro_sparse += p.sparse_fraction * v;
            }
        } else {
            if (p.cluster_id) clustered_micro_vox += p.voxel_count;
            if (p.athero) {
                athero_micro_total += p.voxel_count;
                if (!p.cluster_id) athero_micro_iso += p.voxel_count;
            } else {
                nonathero_micro_total += p.voxel_count;
                if (!p.cluster_id) nonathero_micro_iso += p.voxel_count;
            }
        }
        ++r.phenotype_counts[static_cast<int>(assign_phenotype(p))];
        ++r.particle_count;
    }

    r.tissue_um3 = static_cast<double>(tissue_vox) * vox;
    r.lipid_um3 = static_cast<double>(lipid_vox) * vox;
    r.calc_um3 = static_cast<double>(calc_vox) * vox;
    r.lipid_to_tissue = static_cast<double>(lipid_vox) / static_cast<double>(tissue_vox);
    r.calc_to_tissue = static_cast<double>(calc_vox) / static_cast<double>(tissue_vox);
    r.calc_empty = (calc_vox == 0);
    if (calc_vox > 0) {
        r.athero_to_calc = static_cast<double>(athero_vox) / static_cast<double>(calc_vox);
        r.macro_to_calc = static_cast<double>(macro_vox) / static_cast<double>(calc_vox);
        r.clustered_micro_to_calc =
            static_cast<double>(clustered_micro_vox) / static_cast<double>(calc_vox);
    }

    auto fill = [](GroupFractions& g, double part, double total) {
        g.empty = (total <= 0);
        if (!g.empty) {
            g.first = part / total;
            g.second = 1.0 - g.first;
        }
    };
    fill(r.athero_macro, athero_macro_sparse, athero_macro_total);
    fill(r.nonathero_macro, nonathero_macro_sparse, nonathero_macro_total);
    fill(r.athero_micro, static_cast<double>(athero_micro_iso),
         static_cast<double>(athero_micro_total));
    fill(r.nonathero_micro, static_cast<double>(nonathero_micro_iso),
         static_cast<double>(nonathero_micro_total));
    return r;
}

json report_to_json(const PhenotypeReport& r) {
    json j;
    j["volumes_um3"] = {{"tissue", r.tissue_um3}, {"lipid", r.lipid_um3},
                        {"calcification", r.calc_um3}};
    j["ratios"] = {{"lipid_to_tissue", r.lipid_to_tissue},
                   {"calc_to_tissue", r.calc_to_tissue},
                   {"athero_to_calc", r.athero_to_calc},
                   {"macro_to_calc", r.macro_to_calc},
                   {"clustered_micro_to_calc", r.clustered_micro_to_calc},
                   {"calc_empty", r.calc_empty}};
    auto group = [](const GroupFractions& g, const char* a, const char* b) {
        return json{{a, g.first}, {b, g.second}, {"empty", g.empty}};
    };
    j["macro_topology"] = {
        {"athero", group(r.athero_macro, "sparse", "dense")},
        {"non_athero", group(r.nonathero_macro, "sparse", "dense")}};
    j["micro_distribution"] = {
        {"athero", group(r.athero_micro, "isolated", "clustered")},
        {"non_athero", group(r.nonathero_micro, "isolated", "clustered")}};
    json counts;
    for (int i = 0; i < kPhenotypeCount; ++i)
        counts[phenotype_name(static_cast<Phenotype>(i))] = r.phenotype_counts[i];
    j["phenotype_counts"] = counts;
    j["particle_count"] = r.particle_count;
    json t;
    for (const auto& [name, secs] : r.timings.entries()) t[name] = secs;
    t["total"] = r.timings.total();
    j["stage_timings_s"] = t;
    return j;
}

std::vector<std::uint8_t> phenotype_label_volume(const ParticleSet& set) {
    std::vector<std::uint8_t> out(set.labels.size(), 0);
    std::int32_t max_id = 0;
    for (const auto& p : set.particles) max_id = std::max(max_id, p.id);
    std::vector<std::uint8_t> code(static_cast<std::size_t>(max_id) + 1, 0);
    for (const auto& p : set.particles)
        code[p.id] = static_cast<std::uint8_t>(static_cast<int>(assign_phenotype(p)) + 1);
    for (std::size_t i = 0; i < set.labels.size(); ++i) {
        const std::int32_t lab = set.labels[i];
        if (lab > 0 && lab <= max_id) out[i] = code[lab];
    }
    return out;
}

}  // namespace vcp
