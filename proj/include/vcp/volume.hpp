#ifndef VCP_VOLUME_HPP
#define VCP_VOLUME_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace vcp {

/// Dense 3D grayscale grid. Intensities are stored z-major (x fastest, then
/// y, then z) and are normalized to [0,1] when loaded from disk.
struct VoxelVolume {
    int nx = 0, ny = 0, nz = 0;
    double spacing_um = 3.0;  // isotropic voxel edge length
    std::vector<float> intensities;

    VoxelVolume() = default;
    VoxelVolume(int nx_, int ny_, int nz_, double spacing = 3.0, float fill = 0.0f);

    std::size_t size() const { return intensities.size(); }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }
    float at(int x, int y, int z) const { return intensities[index(x, y, z)]; }
    float& at(int x, int y, int z) { return intensities[index(x, y, z)]; }
};

/// Per-voxel boolean labeling, same layout as its parent volume.
struct BinaryMask {
    int nx = 0, ny = 0, nz = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int nx_, int ny_, int nz_, std::uint8_t fill = 0);

    std::size_t size() const { return bits.size(); }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }
    bool at(int x, int y, int z) const { return bits[index(x, y, z)] != 0; }
    void set(int x, int y, int z, bool v) { bits[index(x, y, z)] = v ? 1 : 0; }
    std::size_t count_true() const;
    bool same_dims(const BinaryMask& o) const {
        return nx == o.nx && ny == o.ny && nz == o.nz;
    }
};

/// Manual markings for one slice: sample (tissue) region and the lipid pools
/// inside it. lipid_mask must be a subset of sample_mask.
struct SliceAnnotation {
    int z = 0;
    int nx = 0, ny = 0;
    std::vector<std::uint8_t> sample_mask;  // nx*ny, row-major (x fastest)
    std::vector<std::uint8_t> lipid_mask;

    void validate(int vol_nx, int vol_ny, int vol_nz) const;
};

// ---- file I/O ----------------------------------------------------------
//
// Raw volume convention: little-endian samples, x fastest, then y, then z,
// with a JSON sidecar {nx, ny, nz, dtype, spacing_um} at <path>.json.
// Supported dtypes: u8, u16, f32, f64. A directory path is instead read as a
// stack of binary PGM (P5) slice images, z-ordered by filename.

/// Loads a stack from a raw file (+sidecar) or a directory of PGM slices and
/// min-max normalizes intensities over the whole stack. A constant stack maps
/// to all zeros.
VoxelVolume load_stack(const std::string& path);

/// Writes the volume as raw f32 plus sidecar. load_stack(save_volume(v))
/// round-trips dims and spacing; intensities round-trip bit-exactly when the
/// volume is already normalized.
void save_volume(const VoxelVolume& vol, const std::string& path);

/// Writes one byte per voxel (0/255) plus sidecar (dtype u8).
void save_mask(const BinaryMask& mask, double spacing_um, const std::string& path);

/// Reads a mask written by save_mask. Any nonzero byte is true.
BinaryMask load_mask(const std::string& path, double* spacing_um = nullptr);

// Annotation manifest: JSON {"slices":[{"z":..,"sample":..,"lipid":..},...]}
// where sample/lipid name single-slice masks written by save_mask. Relative
// paths resolve against the manifest directory.
std::vector<SliceAnnotation> load_annotations(const std::string& manifest_path);
void save_annotations(const std::vector<SliceAnnotation>& slices, double spacing_um,
                      const std::string& manifest_path);

}  // namespace vcp

#endif
