#include "vcp/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vcp/parallel.hpp"
#include "vcp/rng.hpp"

using nlohmann::json;

namespace vcp {

namespace {

json arr3(const std::array<double, 3>& a) { return json::array({a[0], a[1], a[2]}); }

std::array<double, 3> vec3(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

json phantom_spec_to_json(const PhantomSpec& s) {
    json j;
    j["dims"] = {s.nx, s.ny, s.nz};
    j["spacing_um"] = s.spacing_um;
    j["tube"] = {{"cx", s.tube_cx},
                 {"cy", s.tube_cy},
                 {"inner_radius", s.inner_radius},
                 {"outer_radius", s.outer_radius},
                 {"path_amplitude", s.path_amplitude},
                 {"path_turns", s.path_turns}};
    j["lipid_pools"] = json::array();
    for (const auto& p : s.lipid_pools)
        j["lipid_pools"].push_back({{"center", arr3(p.center)},
                                    {"semi_axes", arr3(p.semi_axes)},
                                    {"blur_sigma", p.blur_sigma}});
    j["micros"] = json::array();
    for (const auto& m : s.micros)
        j["micros"].push_back(
            {{"center", arr3(m.center)}, {"radius", m.radius}, {"cluster", m.cluster}});
    j["macros"] = json::array();
    for (const auto& m : s.macros) {
        json spikes = json::array();
        for (const auto& sp : m.spikes)
            spikes.push_back({{"direction", arr3(sp.direction)},
                              {"length", sp.length},
                              {"radius", sp.radius}});
        j["macros"].push_back({{"center", arr3(m.center)},
                               {"core_radius", m.core_radius},
                               {"spikes", spikes},
                               {"porous_shell", m.porous_shell},
                               {"shell_radius", m.shell_radius},
                               {"shell_thickness", m.shell_thickness}});
    }
    j["noise_sigma"] = s.noise_sigma;
    j["ring"] = {{"amplitude", s.ring.amplitude},
                 {"cx", s.ring.cx},
                 {"cy", s.ring.cy},
                 {"period", s.ring.period}};
    j["streaks"] = {{"rays_per_macro", s.streaks.rays_per_macro},
                    {"intensity", s.streaks.intensity},
                    {"length", s.streaks.length}};
    j["holder"] = {{"enabled", s.holder.enabled},
                   {"x0", s.holder.x0},
                   {"x1", s.holder.x1},
                   {"y0", s.holder.y0},
                   {"y1", s.holder.y1}};
    json zones = json::array();
    for (const auto& z : s.collagen.low_zones)
        zones.push_back({{"center", arr3(z.center)}, {"radius", z.radius}});
    j["collagen"] = {{"enabled", s.collagen.enabled},
                     {"high_fill", s.collagen.high_fill},
                     {"low_fill", s.collagen.low_fill},
                     {"low_zones", zones}};
    j["size_threshold_um"] = s.size_threshold_um;
    j["seed"] = s.seed;
    return j;
}

PhantomSpec phantom_spec_from_json(const json& j) {
    PhantomSpec s;
    if (j.contains("dims")) {
        s.nx = j["dims"][0].get<int>();
        s.ny = j["dims"][1].get<int>();
        s.nz = j["dims"][2].get<int>();
    }
    s.spacing_um = j.value("spacing_um", s.spacing_um);
    if (j.contains("tube")) {
        const auto& t = j["tube"];
        s.tube_cx = t.value("cx", s.tube_cx);
        s.tube_cy = t.value("cy", s.tube_cy);
        s.inner_radius = t.value("inner_radius", s.inner_radius);
        s.outer_radius = t.value("outer_radius", s.outer_radius);
        s.path_amplitude = t.value("path_amplitude", s.path_amplitude);
        s.path_turns = t.value("path_turns", s.path_turns);
    }
    for (const auto& p : j.value("lipid_pools", json::array())) {
        LipidPoolSpec lp;
        lp.center = vec3(p.at("center"));
        lp.semi_axes = vec3(p.at("semi_axes"));
        lp.blur_sigma = p.value("blur_sigma", lp.blur_sigma);
        s.lipid_pools.push_back(lp);
    }
    for (const auto& m : j.value("micros", json::array())) {
        MicroSpec ms;
        ms.center = vec3(m.at("center"));
        ms.radius = m.value("radius", ms.radius);
        ms.cluster = m.value("cluster", 0);
        s.micros.push_back(ms);
    }
    for (const auto& m : j.value("macros", json::array())) {
        MacroSpec mc;
        mc.center = vec3(m.at("center"));
        mc.core_radius = m.value("core_radius", mc.core_radius);
        for (const auto& sp : m.value("spikes", json::array())) {
            SpikeSpec ss;
            ss.direction = vec3(sp.at("direction"));
            ss.length = sp.value("length", ss.length);
            ss.radius = sp.value("radius", ss.radius);
            mc.spikes.push_back(ss);
        }
        mc.porous_shell = m.value("porous_shell", false);
        mc.shell_radius = m.value("shell_radius", 0.0);
        mc.shell_thickness = m.value("shell_thickness", 0.0);
        s.macros.push_back(mc);
    }
    s.noise_sigma = j.value("noise_sigma", 0.0);
    if (j.contains("ring")) {
        const auto& r = j["ring"];
        s.ring.amplitude = r.value("amplitude", 0.0);
        s.ring.cx = r.value("cx", 0.0);
        s.ring.cy = r.value("cy", 0.0);
        s.ring.period = r.value("period", s.ring.period);
    }
    if (j.contains("streaks")) {
        const auto& st = j["streaks"];
        s.streaks.rays_per_macro = st.value("rays_per_macro", 0);
        s.streaks.intensity = st.value("intensity", s.streaks.intensity);
        s.streaks.length = st.value("length", s.streaks.length);
    }
    if (j.contains("holder")) {
        const auto& h = j["holder"];
        s.holder.enabled = h.value("enabled", false);
        s.holder.x0 = h.value("x0", 0);
        s.holder.x1 = h.value("x1", 0);
        s.holder.y0 = h.value("y0", 0);
        s.holder.y1 = h.value("y1", 0);
    }
    if (j.contains("collagen")) {
        const auto& c = j["collagen"];
        s.collagen.enabled = c.value("enabled", false);
        s.collagen.high_fill = c.value("high_fill", s.collagen.high_fill);
        s.collagen.low_fill = c.value("low_fill", s.collagen.low_fill);
        for (const auto& z : c.value("low_zones", json::array())) {
            CollagenZoneSpec cz;
            cz.center = vec3(z.at("center"));
            cz.radius = z.value("radius", cz.radius);
            s.collagen.low_zones.push_back(cz);
        }
    }
    s.size_threshold_um = j.value("size_threshold_um", s.size_threshold_um);
    s.seed = j.value("seed", s.seed);
    return s;
}

namespace {

constexpr double kBackgroundI = 0.05;
constexpr double kTissueI = 0.45;
constexpr double kLipidI = 0.30;
constexpr double kCalcI = 0.95;
constexpr double kHolderI = 0.45;

struct StructureStats {
    std::uint64_t voxels = 0;
    std::uint64_t sparse_voxels = 0;  // spike/shell parts
    std::uint64_t lipid_voxels = 0;
    std::array<double, 3> sum{0, 0, 0};
    std::size_t first_index = SIZE_MAX;  // z-major scan order
    bool is_macro = false;
    int cluster = 0;
};

double point_segment_dist2(double px, double py, double pz, const std::array<double, 3>& a,
                           const std::array<double, 3>& b) {
    const double abx = b[0] - a[0], aby = b[1] - a[1], abz = b[2] - a[2];
    const double apx = px - a[0], apy = py - a[1], apz = pz - a[2];
    const double ab2 = abx * abx + aby * aby + abz * abz;
    double t = ab2 > 0 ? (apx * abx + apy * aby + apz * abz) / ab2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (a[0] + t * abx);
    const double dy = py - (a[1] + t * aby);
    const double dz = pz - (a[2] + t * abz);
    return dx * dx + dy * dy + dz * dz;
}

// separable Gaussian blur in place
void gaussian_blur3(std::vector<float>& field, int nx, int ny, int nz, double sigma) {
    if (sigma <= 0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= ksum;

    auto idx = [nx, ny](int x, int y, int z) {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    };
    std::vector<float> tmp(field.size());
    // x
    parallel_blocks(nz, 1, [&](std::size_t, std::size_t zlo, std::size_t zhi) {
        for (std::size_t z = zlo; z < zhi; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    double acc = 0;
                    for (int i = -radius; i <= radius; ++i) {
                        const int xx = std::clamp(x + i, 0, nx - 1);
                        acc += kernel[i + radius] * field[idx(xx, y, static_cast<int>(z))];
                    }
                    tmp[idx(x, y, static_cast<int>(z))] = static_cast<float>(acc);
                }
    });
    field.swap(tmp);
    // y
    parallel_blocks(nz, 1, [&](std::size_t, std::size_t zlo, std::size_t zhi) {
        for (std::size_t z = zlo; z < zhi; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    double acc = 0;
                    for (int i = -radius; i <= radius; ++i) {
                        const int yy = std::clamp(y + i, 0, ny - 1);
                        acc += kernel[i + radius] * field[idx(x, yy, static_cast<int>(z))];
                    }
                    tmp[idx(x, y, static_cast<int>(z))] = static_cast<float>(acc);
                }
    });
    field.swap(tmp);
    // z
    parallel_blocks(ny, 8, [&](std::size_t, std::size_t ylo, std::size_t yhi) {
        for (std::size_t y = ylo; y < yhi; ++y)
            for (int z = 0; z < nz; ++z)
                for (int x = 0; x < nx; ++x) {
                    double acc = 0;
                    for (int i = -radius; i <= radius; ++i) {
                        const int zz = std::clamp(z + i, 0, nz - 1);
                        acc += kernel[i + radius] * field[idx(x, static_cast<int>(y), zz)];
                    }
                    tmp[idx(x, static_cast<int>(y), z)] = static_cast<float>(acc);
                }
    });
    field.swap(tmp);
}

}  // namespace

PhantomTruth generate(const PhantomSpec& spec) {
    const int nx = spec.nx, ny = spec.ny, nz = spec.nz;
    if (nx <= 0 || ny <= 0 || nz <= 0) throw std::runtime_error("degenerate dimensions");
    if (spec.spacing_um <= 0) throw std::runtime_error("spacing_um must be positive");
    if (spec.inner_radius < 0 || spec.outer_radius <= spec.inner_radius)
        throw std::runtime_error("bad tube radii");

    PhantomTruth t;
    t.sample = BinaryMask(nx, ny, nz);
    t.lipid = BinaryMask(nx, ny, nz);
    t.calc = BinaryMask(nx, ny, nz);
    auto idx = [nx, ny](int x, int y, int z) {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    };

    // tissue annulus around the wobbling center path
    parallel_blocks(nz, 4, [&](std::size_t, std::size_t zlo, std::size_t zhi) {
        for (std::size_t z = zlo; z < zhi; ++z) {
            const auto c = spec.tube_center(static_cast<int>(z));
            const double ri2 = spec.inner_radius * spec.inner_radius;
            const double ro2 = spec.outer_radius * spec.outer_radius;
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const double dx = x - c[0], dy = y - c[1];
                    const double r2 = dx * dx + dy * dy;
                    if (r2 >= ri2 && r2 <= ro2)
                        t.sample.bits[idx(x, y, static_cast<int>(z))] = 1;
                }
        }
    });

    // lipid pools (ellipsoids); must stay inside the tissue
    for (const auto& p : spec.lipid_pools) {
        const int x0 = std::max(0, static_cast<int>(std::floor(p.center[0] - p.semi_axes[0])));
        const int x1 = std::min(nx - 1, static_cast<int>(std::ceil(p.center[0] + p.semi_axes[0])));
        const int y0 = std::max(0, static_cast<int>(std::floor(p.center[1] - p.semi_axes[1])));
        const int y1 = std::min(ny - 1, static_cast<int>(std::ceil(p.center[1] + p.semi_axes[1])));
        const int z0 = std::max(0, static_cast<int>(std::floor(p.center[2] - p.semi_axes[2])));
        const int z1 = std::min(nz - 1, static_cast<int>(std::ceil(p.center[2] + p.semi_axes[2])));
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double ex = (x - p.center[0]) / p.semi_axes[0];
                    const double ey = (y - p.center[1]) / p.semi_axes[1];
                    const double ez = (z - p.center[2]) / p.semi_axes[2];
                    if (ex * ex + ey * ey + ez * ez > 1.0) continue;
                    if (!t.sample.bits[idx(x, y, z)])
                        throw std::runtime_error("planted structure outside tissue: lipid pool");
                    t.lipid.bits[idx(x, y, z)] = 1;
                }
    }

    // calcification structures into an ownership grid
    const std::size_t nstruct = spec.macros.size() + spec.micros.size();
    std::vector<std::int32_t> owner(t.calc.bits.size(), 0);
    std::vector<StructureStats> stats(nstruct);

    auto claim = [&](int x, int y, int z, std::int32_t sid, bool sparse_part) {
        if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz)
            throw std::runtime_error("planted structure outside volume");
        const std::size_t i = idx(x, y, z);
        if (!t.sample.bits[i])
            throw std::runtime_error("planted structure outside tissue: calcification");
        if (owner[i] != 0 && owner[i] != sid)
            throw std::runtime_error("planted calcification structures overlap");
        if (owner[i] == sid) return;
        owner[i] = sid;
        t.calc.bits[i] = 1;
        StructureStats& st = stats[sid - 1];
        ++st.voxels;
        if (sparse_part) ++st.sparse_voxels;
        if (t.lipid.bits[i]) ++st.lipid_voxels;
        st.sum[0] += x;
        st.sum[1] += y;
        st.sum[2] += z;
        st.first_index = std::min(st.first_index, i);
    };

    std::int32_t sid = 0;
    for (const auto& m : spec.macros) {
        ++sid;
        stats[sid - 1].is_macro = true;
        const double reach = std::max(m.core_radius, m.shell_radius + m.shell_thickness);
        double spike_reach = 0;
        for (const auto& sp : m.spikes)
            spike_reach = std::max(spike_reach, m.core_radius + sp.length + sp.radius);
        const double r = std::max(reach, spike_reach) + 1;
        const int x0 = static_cast<int>(std::floor(m.center[0] - r));
        const int x1 = static_cast<int>(std::ceil(m.center[0] + r));
        const int y0 = static_cast<int>(std::floor(m.center[1] - r));
        const int y1 = static_cast<int>(std::ceil(m.center[1] + r));
        const int z0 = static_cast<int>(std::floor(m.center[2] - r));
        const int z1 = static_cast<int>(std::ceil(m.center[2] + r));

        std::vector<std::array<std::array<double, 3>, 2>> spike_segs;
        for (const auto& sp : m.spikes) {
            double n = std::sqrt(sp.direction[0] * sp.direction[0] +
                                 sp.direction[1] * sp.direction[1] +
                                 sp.direction[2] * sp.direction[2]);
            if (n <= 0) throw std::runtime_error("zero spike direction");
            const std::array<double, 3> d{sp.direction[0] / n, sp.direction[1] / n,
                                          sp.direction[2] / n};
            const double start = std::max(0.0, m.core_radius * 0.6);
            spike_segs.push_back(
                {std::array<double, 3>{m.center[0] + d[0] * start, m.center[1] + d[1] * start,
                                       m.center[2] + d[2] * start},
                 std::array<double, 3>{m.center[0] + d[0] * (m.core_radius + sp.length),
                                       m.center[1] + d[1] * (m.core_radius + sp.length),
                                       m.center[2] + d[2] * (m.core_radius + sp.length)}});
        }

        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double dx = x - m.center[0], dy = y - m.center[1],
                                 dz = z - m.center[2];
                    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
                    bool core = m.core_radius > 0 && d <= m.core_radius;
                    bool shell = m.porous_shell &&
                                 std::fabs(d - m.shell_radius) <= m.shell_thickness * 0.5;
                    bool spike = false;
                    if (!core && !shell) {
                        for (std::size_t k = 0; k < spike_segs.size(); ++k) {
                            const double r2 = m.spikes[k].radius * m.spikes[k].radius;
                            if (point_segment_dist2(x, y, z, spike_segs[k][0],
                                                    spike_segs[k][1]) <= r2) {
                                spike = true;
                                break;
                            }
                        }
                    }
                    if (core || shell || spike) claim(x, y, z, sid, shell || spike);
                }
    }
    for (const auto& m : spec.micros) {
        ++sid;
        stats[sid - 1].cluster = m.cluster;
        const int r = static_cast<int>(std::ceil(m.radius)) + 1;
        for (int z = static_cast<int>(m.center[2]) - r; z <= m.center[2] + r; ++z)
            for (int y = static_cast<int>(m.center[1]) - r; y <= m.center[1] + r; ++y)
                for (int x = static_cast<int>(m.center[0]) - r; x <= m.center[0] + r; ++x) {
                    const double dx = x - m.center[0], dy = y - m.center[1],
                                 dz = z - m.center[2];
                    if (dx * dx + dy * dy + dz * dz <= m.radius * m.radius)
                        claim(x, y, z, sid, false);
                }
    }

    // no two structures may touch under 26-connectivity, or the planted
    // counts would not survive connected-component labeling
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const std::int32_t a = owner[idx(x, y, z)];
                if (a == 0) continue;
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xx = x + dx, yy = y + dy, zz = z + dz;
                            if (xx < 0 || yy < 0 || zz < 0 || xx >= nx || yy >= ny ||
                                zz >= nz)
                                continue;
                            const std::int32_t b = owner[idx(xx, yy, zz)];
                            if (b != 0 && b != a)
                                throw std::runtime_error(
                                    "planted calcification structures touch");
                        }
            }

    // planted particle list, ordered like connected_components labels
    std::vector<std::size_t> order(nstruct);
    for (std::size_t i = 0; i < nstruct; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return stats[a].first_index < stats[b].first_index;
    });
    const double vox_um3 = spec.spacing_um * spec.spacing_um * spec.spacing_um;
    for (std::size_t oi = 0; oi < nstruct; ++oi) {
        const StructureStats& st = stats[order[oi]];
        if (st.voxels == 0) throw std::runtime_error("planted structure rendered empty");
        PlantedParticle p;
        p.voxel_count = st.voxels;
        p.is_macro = st.is_macro;
        p.cluster = st.cluster;
        const double n = static_cast<double>(st.voxels);
        for (int a = 0; a < 3; ++a)
            p.centroid_um[a] = (st.sum[a] / n + 0.5) * spec.spacing_um;
        p.athero = static_cast<double>(st.lipid_voxels) / n >= 0.5;
        p.sparse_fraction = st.is_macro ? static_cast<double>(st.sparse_voxels) / n : 0.0;
        const double d_eq = std::cbrt(6.0 * n * vox_um3 / std::numbers::pi);
        if (st.is_macro && d_eq < spec.size_threshold_um)
            throw std::runtime_error("planted macro renders below the size threshold");
        if (!st.is_macro && d_eq >= spec.size_threshold_um)
            throw std::runtime_error("planted micro renders above the size threshold");
        if (spec.collagen.enabled) {
            bool low = false;
            const double cx = p.centroid_um[0] / spec.spacing_um - 0.5;
            const double cy = p.centroid_um[1] / spec.spacing_um - 0.5;
            const double cz = p.centroid_um[2] / spec.spacing_um - 0.5;
            for (const auto& zn : spec.collagen.low_zones) {
                const double dx = cx - zn.center[0], dy = cy - zn.center[1],
                             dz = cz - zn.center[2];
                if (dx * dx + dy * dy + dz * dz <= zn.radius * zn.radius) {
                    low = true;
                    break;
                }
            }
            p.c_label = low ? 1 : 2;
        }
        t.planted.push_back(p);
    }

    int max_cluster = 0;
    for (const auto& p : t.planted) max_cluster = std::max(max_cluster, p.cluster);
    t.planted_clusters = max_cluster;

    // ---- truth report from planted geometry ----
    {
        PhenotypeReport& r = t.report;
        const std::uint64_t tissue_vox = t.sample.count_true();
        if (tissue_vox == 0) throw std::runtime_error("phantom has no tissue");
        const std::uint64_t lipid_vox = t.lipid.count_true();
        std::uint64_t calc_vox = 0, athero_vox = 0, macro_vox = 0, clustered_vox = 0;
        double am_sparse = 0, am_total = 0, nm_sparse = 0, nm_total = 0;
        std::uint64_t ai_iso = 0, ai_total = 0, ni_iso = 0, ni_total = 0;
        for (const auto& p : t.planted) {
            calc_vox += p.voxel_count;
            if (p.athero) athero_vox += p.voxel_count;
            const double v = static_cast<double>(p.voxel_count);
            int pheno;
            if (p.is_macro) {
                macro_vox += p.voxel_count;
                if (p.athero) {
                    am_total += v;
                    am_sparse += p.sparse_fraction * v;
                } else {
                    nm_total += v;
                    nm_sparse += p.sparse_fraction * v;
                }
                const bool sparse = p.sparse_fraction > 0.5;
                pheno = p.athero ? (sparse ? 2 : 3) : (sparse ? 6 : 7);
            } else {
                if (p.cluster > 0) clustered_vox += p.voxel_count;
                if (p.athero) {
                    ai_total += p.voxel_count;
                    if (p.cluster == 0) ai_iso += p.voxel_count;
                } else {
                    ni_total += p.voxel_count;
                    if (p.cluster == 0) ni_iso += p.voxel_count;
                }
                pheno = p.athero ? (p.cluster > 0 ? 1 : 0) : (p.cluster > 0 ? 5 : 4);
            }
            ++r.phenotype_counts[pheno];
            ++r.particle_count;
        }
        r.tissue_um3 = static_cast<double>(tissue_vox) * vox_um3;
        r.lipid_um3 = static_cast<double>(lipid_vox) * vox_um3;
        r.calc_um3 = static_cast<double>(calc_vox) * vox_um3;
        r.lipid_to_tissue = static_cast<double>(lipid_vox) / static_cast<double>(tissue_vox);
        r.calc_to_tissue = static_cast<double>(calc_vox) / static_cast<double>(tissue_vox);
        r.calc_empty = calc_vox == 0;
        if (calc_vox > 0) {
            r.athero_to_calc =
                static_cast<double>(athero_vox) / static_cast<double>(calc_vox);
            r.macro_to_calc = static_cast<double>(macro_vox) / static_cast<double>(calc_vox);
            r.clustered_micro_to_calc =
                static_cast<double>(clustered_vox) / static_cast<double>(calc_vox);
        }
        auto fill = [](GroupFractions& g, double part, double total) {
            g.empty = total <= 0;
            if (!g.empty) {
                g.first = part / total;
                g.second = 1.0 - g.first;
            }
        };
        fill(r.athero_macro, am_sparse, am_total);
        fill(r.nonathero_macro, nm_sparse, nm_total);
        fill(r.athero_micro, static_cast<double>(ai_iso), static_cast<double>(ai_total));
        fill(r.nonathero_micro, static_cast<double>(ni_iso), static_cast<double>(ni_total));
    }

    // ---- grayscale rendering ----
    t.volume = VoxelVolume(nx, ny, nz, spec.spacing_um, static_cast<float>(kBackgroundI));
    for (std::size_t i = 0; i < t.sample.bits.size(); ++i)
        if (t.sample.bits[i]) t.volume.intensities[i] = static_cast<float>(kTissueI);

    if (!spec.lipid_pools.empty()) {
        std::vector<float> w(t.lipid.bits.size(), 0.0f);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = t.lipid.bits[i] ? 1.0f : 0.0f;
        double sigma = 0;
        for (const auto& p : spec.lipid_pools) sigma = std::max(sigma, p.blur_sigma);
        gaussian_blur3(w, nx, ny, nz, sigma);
        for (std::size_t i = 0; i < w.size(); ++i)
            if (t.sample.bits[i])
                t.volume.intensities[i] = static_cast<float>(
                    kTissueI * (1.0 - w[i]) + kLipidI * w[i]);
    }

    for (std::size_t i = 0; i < t.calc.bits.size(); ++i)
        if (t.calc.bits[i]) t.volume.intensities[i] = static_cast<float>(kCalcI);

    if (spec.holder.enabled) {
        for (int z = 0; z < nz; ++z)
            for (int y = std::max(0, spec.holder.y0); y <= std::min(ny - 1, spec.holder.y1); ++y)
                for (int x = std::max(0, spec.holder.x0); x <= std::min(nx - 1, spec.holder.x1); ++x) {
                    const std::size_t i = idx(x, y, z);
                    if (!t.sample.bits[i])
                        t.volume.intensities[i] = static_cast<float>(kHolderI);
                }
    }

    // ring artifact: concentric sinusoid about its center, same on all slices
    if (spec.ring.amplitude != 0) {
        const double cx = spec.ring.cx > 0 ? spec.ring.cx : nx / 2.0;
        const double cy = spec.ring.cy > 0 ? spec.ring.cy : ny / 2.0;
        std::vector<float> ring(static_cast<std::size_t>(nx) * ny);
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double r = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy));
                ring[static_cast<std::size_t>(y) * nx + x] = static_cast<float>(
                    spec.ring.amplitude *
                    std::sin(2.0 * std::numbers::pi * r / spec.ring.period));
            }
        parallel_blocks(nz, 4, [&](std::size_t, std::size_t zlo, std::size_t zhi) {
            for (std::size_t z = zlo; z < zhi; ++z)
                for (int y = 0; y < ny; ++y)
                    for (int x = 0; x < nx; ++x)
                        t.volume.intensities[idx(x, y, static_cast<int>(z))] +=
                            ring[static_cast<std::size_t>(y) * nx + x];
        });
    }

    // streaks: bright/dark rays from each macro center
    if (spec.streaks.rays_per_macro > 0) {
        Rng rng(spec.seed ^ 0x5357524bULL);
        for (const auto& m : spec.macros) {
            const int span = static_cast<int>(std::max(m.core_radius, m.shell_radius) + 12);
            const int zc = static_cast<int>(m.center[2]);
            for (int ray = 0; ray < spec.streaks.rays_per_macro; ++ray) {
                const double theta = rng.uniform(0, 2.0 * std::numbers::pi);
                const double sign = ray % 2 == 0 ? 1.0 : -1.0;
                const double ct = std::cos(theta), stheta = std::sin(theta);
                for (int z = std::max(0, zc - span); z <= std::min(nz - 1, zc + span); ++z) {
                    const double fade_z =
                        1.0 - std::fabs(z - m.center[2]) / (span + 1.0);
                    for (double step = 0; step < spec.streaks.length; step += 0.5) {
                        const int px = static_cast<int>(std::lround(m.center[0] + ct * step));
                        const int py =
                            static_cast<int>(std::lround(m.center[1] + stheta * step));
                        if (px < 0 || py < 0 || px >= nx || py >= ny) break;
                        const double fade = 1.0 - step / spec.streaks.length;
                        t.volume.intensities[idx(px, py, z)] += static_cast<float>(
                            sign * spec.streaks.intensity * fade * fade_z);
                    }
                }
            }
        }
    }

    if (spec.noise_sigma > 0) {
        parallel_blocks(nz, 1, [&](std::size_t, std::size_t zlo, std::size_t zhi) {
            for (std::size_t z = zlo; z < zhi; ++z) {
                Rng rng(spec.seed * 0x9E3779B97F4A7C15ULL + z);
                float* row = &t.volume.intensities[idx(0, 0, static_cast<int>(z))];
                const std::size_t n = static_cast<std::size_t>(nx) * ny;
                for (std::size_t i = 0; i < n; ++i)
                    row[i] += static_cast<float>(spec.noise_sigma * rng.gaussian());
            }
        });
    }

    for (auto& v : t.volume.intensities) v = std::clamp(v, 0.0f, 1.0f);

    // ---- collagen channel ----
    if (spec.collagen.enabled) {
        t.collagen = BinaryMask(nx, ny, nz);
        parallel_blocks(nz, 1, [&](std::size_t, std::size_t zlo, std::size_t zhi) {
            for (std::size_t z = zlo; z < zhi; ++z) {
                Rng rng(spec.seed * 0xC2B2AE3D27D4EB4FULL + z + 17);
                for (int y = 0; y < ny; ++y)
                    for (int x = 0; x < nx; ++x) {
                        const std::size_t i = idx(x, y, static_cast<int>(z));
                        const double u = rng.uniform();  // drawn for every voxel
                        if (!t.sample.bits[i] || t.calc.bits[i]) continue;
                        bool low = false;
                        for (const auto& zn : spec.collagen.low_zones) {
                            const double dx = x - zn.center[0], dy = y - zn.center[1],
                                         dz = static_cast<double>(z) - zn.center[2];
                            if (dx * dx + dy * dy + dz * dz <= zn.radius * zn.radius) {
                                low = true;
                                break;
                            }
                        }
                        const double fill =
                            low ? spec.collagen.low_fill : spec.collagen.high_fill;
                        if (u < fill) t.collagen.bits[i] = 1;
                    }
            }
        });
    }

    t.annotated_z.resize(25);
    for (int k = 0; k < 25; ++k)
        t.annotated_z[k] = static_cast<int>(std::lround(k * (nz - 1) / 24.0));

    return t;
}

SliceAnnotation annotation_at(const PhantomTruth& truth, int z) {
    if (z < 0 || z >= truth.sample.nz) throw std::runtime_error("annotation z out of range");
    SliceAnnotation a;
    a.z = z;
    a.nx = truth.sample.nx;
    a.ny = truth.sample.ny;
    const std::size_t n = static_cast<std::size_t>(a.nx) * a.ny;
    const std::size_t off = static_cast<std::size_t>(z) * n;
    a.sample_mask.assign(truth.sample.bits.begin() + off,
                         truth.sample.bits.begin() + off + n);
    a.lipid_mask.assign(truth.lipid.bits.begin() + off,
                        truth.lipid.bits.begin() + off + n);
    return a;
}

PhantomSpec standard_phantom_spec() {
    PhantomSpec s;
    s.nx = s.ny = s.nz = 256;
    s.spacing_um = 12.0;
    s.tube_cx = s.tube_cy = 128.0;
    s.inner_radius = 20.0;
    s.outer_radius = 104.0;
    s.path_amplitude = 5.0;
    s.path_turns = 1.5;
    s.seed = 20240915;

    auto polar = [&](double angle_deg, double radius, double z) {
        const double a = angle_deg * std::numbers::pi / 180.0;
        return std::array<double, 3>{128.0 + radius * std::cos(a),
                                     128.0 + radius * std::sin(a), z};
    };

    // two lipid pools in the wall
    LipidPoolSpec poolA;
    poolA.center = polar(40, 60, 78);
    poolA.semi_axes = {27, 27, 62};
    poolA.blur_sigma = 1.5;
    LipidPoolSpec poolB;
    poolB.center = polar(200, 58, 170);
    poolB.semi_axes = {26, 26, 55};
    poolB.blur_sigma = 1.5;
    s.lipid_pools = {poolA, poolB};

    // macro 1: athero, centered in pool A; dense core with thin spikes kept
    // tangential/axial so they stay inside the wall
    MacroSpec m1;
    m1.center = poolA.center;
    m1.core_radius = 23;
    {
        const double a = 40 * std::numbers::pi / 180.0;
        m1.spikes = {{{0, 0, 1}, 18, 2.5},
                     {{0, 0, -1}, 18, 2.5},
                     {{-std::sin(a), std::cos(a), 0}, 16, 2.5}};
    }
    // macro 2: non-athero, dense core with spikes
    MacroSpec m2;
    m2.center = polar(290, 60, 200);
    m2.core_radius = 23;
    {
        const double a = 290 * std::numbers::pi / 180.0;
        m2.spikes = {{{0, 0, 1}, 18, 2.5},
                     {{0, 0, -1}, 18, 2.5},
                     {{-std::sin(a), std::cos(a), 0}, 16, 2.5}};
    }
    s.macros = {m1, m2};

    // seven micro clusters of four members each plus eight isolated micros
    auto add_cluster = [&](int cluster, std::array<double, 3> c) {
        const std::array<std::array<double, 3>, 4> offs{
            {{0, 0, 0}, {9, 0, 0}, {0, 9, 0}, {0, 0, 9}}};
        for (const auto& o : offs)
            s.micros.push_back({{c[0] + o[0], c[1] + o[1], c[2] + o[2]}, 4.0, cluster});
    };
    add_cluster(1, {poolA.center[0], poolA.center[1], poolA.center[2] - 42});  // athero
    add_cluster(2, {poolB.center[0], poolB.center[1], poolB.center[2] - 32});  // athero
    add_cluster(3, {poolB.center[0], poolB.center[1], poolB.center[2] + 28});  // athero
    add_cluster(4, polar(100, 62, 60));
    add_cluster(5, polar(140, 62, 120));
    add_cluster(6, polar(260, 62, 60));
    add_cluster(7, polar(330, 62, 230));
    // isolated: two athero (inside pools), six in plain tissue
    s.micros.push_back({{poolA.center[0], poolA.center[1], poolA.center[2] + 45}, 4.0, 0});
    s.micros.push_back({{poolB.center[0], poolB.center[1], poolB.center[2] - 2}, 4.0, 0});
    s.micros.push_back({polar(80, 58, 40), 4.0, 0});
    s.micros.push_back({polar(170, 64, 95), 4.0, 0});
    s.micros.push_back({polar(220, 60, 110), 4.0, 0});
    s.micros.push_back({polar(300, 66, 145), 4.0, 0});
    s.micros.push_back({polar(350, 58, 215), 4.0, 0});
    s.micros.push_back({polar(10, 62, 135), 4.0, 0});

    // artifacts
    s.noise_sigma = 0.02;
    s.ring.amplitude = 0.08;
    s.ring.cx = 120;
    s.ring.cy = 136;
    s.ring.period = 14;
    s.streaks.rays_per_macro = 6;
    s.streaks.intensity = 0.08;
    s.streaks.length = 90;
    s.holder.enabled = true;
    s.holder.x0 = 0;
    s.holder.x1 = 17;
    s.holder.y0 = 125;
    s.holder.y1 = 127;

    // collagen: low-density zones over the micro-cluster sites
    s.collagen.enabled = true;
    s.collagen.high_fill = 0.45;
    s.collagen.low_fill = 0.05;
    for (int c = 1; c <= 7; ++c) {
        // zone centered on the cluster's centroid (members at +9/2 offsets)
        const auto& first = s.micros[static_cast<std::size_t>((c - 1) * 4)];
        s.collagen.low_zones.push_back(
            {{first.center[0] + 4.5, first.center[1] + 4.5, first.center[2] + 4.5}, 22.0});
    }
    return s;
}

}  // namespace vcp
