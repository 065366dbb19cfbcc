#include "vcp/volume.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace vcp {

VoxelVolume::VoxelVolume(int nx_, int ny_, int nz_, double spacing, float fill)
    : nx(nx_), ny(ny_), nz(nz_), spacing_um(spacing) {
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw std::runtime_error("degenerate dimensions");
    if (spacing_um <= 0.0) throw std::runtime_error("spacing_um must be positive");
    intensities.assign(static_cast<std::size_t>(nx) * ny * nz, fill);
}

BinaryMask::BinaryMask(int nx_, int ny_, int nz_, std::uint8_t fill)
    : nx(nx_), ny(ny_), nz(nz_) {
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw std::runtime_error("degenerate dimensions");
    bits.assign(static_cast<std::size_t>(nx) * ny * nz, fill);
}

std::size_t BinaryMask::count_true() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += (b != 0);
    return n;
}

void SliceAnnotation::validate(int vol_nx, int vol_ny, int vol_nz) const {
    if (z < 0 || z >= vol_nz) throw std::runtime_error("annotation z out of range");
    if (nx != vol_nx || ny != vol_ny)
        throw std::runtime_error("annotation dimensions do not match volume");
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    if (sample_mask.size() != n || lipid_mask.size() != n)
        throw std::runtime_error("annotation mask size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (lipid_mask[i] && !sample_mask[i])
            throw std::runtime_error("lipid annotation outside sample annotation");
}

namespace {

struct Sidecar {
    int nx, ny, nz;
    std::string dtype;
    double spacing_um;
};

Sidecar read_sidecar(const std::string& raw_path) {
    const std::string side = raw_path + ".json";
    std::ifstream in(side);
    if (!in) throw std::runtime_error("missing sidecar: " + side);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("bad sidecar JSON in " + side + ": " + e.what());
    }
    for (const char* field : {"nx", "ny", "nz", "dtype", "spacing_um"})
        if (!j.contains(field))
            throw std::runtime_error("missing sidecar field '" + std::string(field) +
                                     "' in " + side);
    Sidecar s;
    s.nx = j["nx"].get<int>();
    s.ny = j["ny"].get<int>();
    s.nz = j["nz"].get<int>();
    s.dtype = j["dtype"].get<std::string>();
    if (j["spacing_um"].is_array()) {
        auto arr = j["spacing_um"].get<std::vector<double>>();
        if (arr.size() != 3 || arr[0] != arr[1] || arr[1] != arr[2])
            throw std::runtime_error("anisotropic spacing unsupported");
        s.spacing_um = arr[0];
    } else {
        s.spacing_um = j["spacing_um"].get<double>();
    }
    if (s.nx <= 0 || s.ny <= 0 || s.nz <= 0)
        throw std::runtime_error("degenerate dimensions in sidecar");
    if (s.spacing_um <= 0.0) throw std::runtime_error("spacing_um must be positive");
    return s;
}

void write_sidecar(const std::string& raw_path, int nx, int ny, int nz,
                   const std::string& dtype, double spacing_um) {
    json j;
    j["nx"] = nx;
    j["ny"] = ny;
    j["nz"] = nz;
    j["dtype"] = dtype;
    j["spacing_um"] = spacing_um;
    std::ofstream out(raw_path + ".json");
    if (!out) throw std::runtime_error("cannot write sidecar for " + raw_path);
    out << j.dump(2) << "\n";
}

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "u8") return 1;
    if (dtype == "u16") return 2;
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    throw std::runtime_error("unsupported dtype: " + dtype);
}

std::vector<char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff len = in.tellg();
    in.seekg(0);
    std::vector<char> buf(static_cast<std::size_t>(len));
    if (len > 0) in.read(buf.data(), len);
    if (!in) throw std::runtime_error("short read on " + path);
    return buf;
}

// decodes little-endian raw samples into doubles
void decode_raw(const std::vector<char>& buf, const std::string& dtype,
                std::vector<double>& out) {
    const std::size_t n = buf.size() / dtype_size(dtype);
    out.resize(n);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (dtype == "u8") {
        for (std::size_t i = 0; i < n; ++i) out[i] = p[i];
    } else if (dtype == "u16") {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = static_cast<double>(p[2 * i] | (p[2 * i + 1] << 8));
    } else if (dtype == "f32") {
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, p + 4 * i, 4);
            out[i] = f;
        }
    } else {  // f64
        for (std::size_t i = 0; i < n; ++i) {
            double d;
            std::memcpy(&d, p + 8 * i, 8);
            out[i] = d;
        }
    }
}

void normalize_in_place(std::vector<double>& raw, std::vector<float>& out) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    out.resize(raw.size());
    if (!(hi > lo)) {  // constant stack maps to 0
        std::fill(out.begin(), out.end(), 0.0f);
        return;
    }
    const double scale = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < raw.size(); ++i)
        out[i] = static_cast<float>((raw[i] - lo) * scale);
}

// Binary PGM (P5). 16-bit samples are big-endian per the format.
void read_pgm(const std::string& path, int& w, int& h, std::vector<double>& px) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("not a binary PGM: " + path);
    auto next_token = [&in, &path]() {
        int tok;
        for (;;) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            if (!(in >> tok)) throw std::runtime_error("bad PGM header: " + path);
            return tok;
        }
    };
    w = next_token();
    h = next_token();
    const int maxval = next_token();
    in.get();  // single whitespace after maxval
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("bad PGM header: " + path);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    px.resize(n);
    if (maxval < 256) {
        std::vector<unsigned char> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!in) throw std::runtime_error("short PGM payload: " + path);
        for (std::size_t i = 0; i < n; ++i) px[i] = buf[i];
    } else {
        std::vector<unsigned char> buf(2 * n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
        if (!in) throw std::runtime_error("short PGM payload: " + path);
        for (std::size_t i = 0; i < n; ++i)
            px[i] = static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
}

VoxelVolume load_slice_directory(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".pgm") files.push_back(e.path().string());
    }
    if (files.empty()) throw std::runtime_error("no .pgm slices in " + dir);
    std::sort(files.begin(), files.end());

    double spacing = 3.0;
    const std::string meta = (fs::path(dir) / "stack.json").string();
    if (fs::exists(meta)) {
        std::ifstream in(meta);
        json j;
        in >> j;
        if (j.contains("spacing_um")) spacing = j["spacing_um"].get<double>();
        if (spacing <= 0.0) throw std::runtime_error("spacing_um must be positive");
    }

    int nx = 0, ny = 0;
    std::vector<double> raw;
    for (std::size_t z = 0; z < files.size(); ++z) {
        int w, h;
        std::vector<double> px;
        read_pgm(files[z], w, h, px);
        if (z == 0) {
            nx = w;
            ny = h;
            raw.reserve(static_cast<std::size_t>(nx) * ny * files.size());
        } else if (w != nx || h != ny) {
            throw std::runtime_error("slice dimension mismatch: " + files[z]);
        }
        raw.insert(raw.end(), px.begin(), px.end());
    }

    VoxelVolume vol;
    vol.nx = nx;
    vol.ny = ny;
    vol.nz = static_cast<int>(files.size());
    vol.spacing_um = spacing;
    normalize_in_place(raw, vol.intensities);
    return vol;
}

}  // namespace

VoxelVolume load_stack(const std::string& path) {
    if (fs::is_directory(path)) return load_slice_directory(path);

    const Sidecar s = read_sidecar(path);
    const std::vector<char> buf = read_all(path);
    const std::size_t expected =
        static_cast<std::size_t>(s.nx) * s.ny * s.nz * dtype_size(s.dtype);
    if (buf.size() != expected)
        throw std::runtime_error("voxel count mismatch: " + path + " holds " +
                                 std::to_string(buf.size() / dtype_size(s.dtype)) +
                                 " samples, sidecar declares " +
                                 std::to_string(static_cast<std::size_t>(s.nx) * s.ny * s.nz));

    std::vector<double> raw;
    decode_raw(buf, s.dtype, raw);

    VoxelVolume vol;
    vol.nx = s.nx;
    vol.ny = s.ny;
    vol.nz = s.nz;
    vol.spacing_um = s.spacing_um;
    normalize_in_place(raw, vol.intensities);
    return vol;
}

void save_volume(const VoxelVolume& vol, const std::string& path) {
    if (vol.nx <= 0 || vol.ny <= 0 || vol.nz <= 0)
        throw std::runtime_error("degenerate dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(vol.intensities.data()),
              static_cast<std::streamsize>(vol.intensities.size() * 4));
    if (!out) throw std::runtime_error("short write on " + path);
    write_sidecar(path, vol.nx, vol.ny, vol.nz, "f32", vol.spacing_um);
}

void save_mask(const BinaryMask& mask, double spacing_um, const std::string& path) {
    if (mask.nx <= 0 || mask.ny <= 0 || mask.nz <= 0)
        throw std::runtime_error("degenerate dimensions");
    std::vector<unsigned char> bytes(mask.bits.size());
    for (std::size_t i = 0; i < mask.bits.size(); ++i) bytes[i] = mask.bits[i] ? 255 : 0;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write on " + path);
    write_sidecar(path, mask.nx, mask.ny, mask.nz, "u8", spacing_um);
}

BinaryMask load_mask(const std::string& path, double* spacing_um) {
    const Sidecar s = read_sidecar(path);
    if (s.dtype != "u8") throw std::runtime_error("mask dtype must be u8: " + path);
    const std::vector<char> buf = read_all(path);
    const std::size_t expected = static_cast<std::size_t>(s.nx) * s.ny * s.nz;
    if (buf.size() != expected)
        throw std::runtime_error("voxel count mismatch: " + path);
    BinaryMask m(s.nx, s.ny, s.nz);
    for (std::size_t i = 0; i < expected; ++i)
        m.bits[i] = buf[i] != 0 ? 1 : 0;
    if (spacing_um) *spacing_um = s.spacing_um;
    return m;
}

std::vector<SliceAnnotation> load_annotations(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open annotation manifest " + manifest_path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("bad annotation manifest: ") + e.what());
    }
    if (!j.contains("slices") || !j["slices"].is_array())
        throw std::runtime_error("annotation manifest missing 'slices' array");

    const fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&base](const std::string& p) {
        fs::path q(p);
        return q.is_absolute() ? q.string() : (base / q).string();
    };

    std::vector<SliceAnnotation> out;
    for (const auto& e : j["slices"]) {
        for (const char* field : {"z", "sample", "lipid"})
            if (!e.contains(field))
                throw std::runtime_error("annotation entry missing '" + std::string(field) + "'");
        SliceAnnotation a;
        a.z = e["z"].get<int>();
        BinaryMask sm = load_mask(resolve(e["sample"].get<std::string>()));
        BinaryMask lm = load_mask(resolve(e["lipid"].get<std::string>()));
        if (sm.nz != 1 || lm.nz != 1)
            throw std::runtime_error("annotation masks must be single-slice");
        if (sm.nx != lm.nx || sm.ny != lm.ny)
            throw std::runtime_error("annotation mask size mismatch at z=" + std::to_string(a.z));
        a.nx = sm.nx;
        a.ny = sm.ny;
        a.sample_mask = std::move(sm.bits);
        a.lipid_mask = std::move(lm.bits);
        out.push_back(std::move(a));
    }
    std::sort(out.begin(), out.end(),
              [](const SliceAnnotation& a, const SliceAnnotation& b) { return a.z < b.z; });
    return out;
}

void save_annotations(const std::vector<SliceAnnotation>& slices, double spacing_um,
                      const std::string& manifest_path) {
    const fs::path base = fs::path(manifest_path).parent_path();
    json arr = json::array();
    for (const auto& a : slices) {
        BinaryMask sm(a.nx, a.ny, 1), lm(a.nx, a.ny, 1);
        sm.bits = a.sample_mask;
        lm.bits = a.lipid_mask;
        const std::string sname = "ann_z" + std::to_string(a.z) + "_sample.raw";
        const std::string lname = "ann_z" + std::to_string(a.z) + "_lipid.raw";
        save_mask(sm, spacing_um, (base / sname).string());
        save_mask(lm, spacing_um, (base / lname).string());
        arr.push_back({{"z", a.z}, {"sample", sname}, {"lipid", lname}});
    }
    json j;
    j["slices"] = arr;
    std::ofstream out(manifest_path);
    if (!out) throw std::runtime_error("cannot write " + manifest_path);
    out << j.dump(2) << "\n";
}

}  // namespace vcp
