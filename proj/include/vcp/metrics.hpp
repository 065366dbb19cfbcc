#ifndef VCP_METRICS_HPP
#define VCP_METRICS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vcp/volume.hpp"

namespace vcp {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::uint64_t total() const { return tp + fp + fn + tn; }
};

/// Voxelwise confusion counts; masks must have equal dimensions.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth);

/// Slice-restricted variant (2D masks of nx*ny, x fastest).
ConfusionCounts confusion_slice(const std::vector<std::uint8_t>& pred,
                                const std::vector<std::uint8_t>& truth);

/// Dice: 2TP/(2TP+FP+FN). Both-empty is defined as 1; *empty_flag reports it.
double dsc(const ConfusionCounts& c, bool* empty_flag = nullptr);

/// Jaccard: TP/(TP+FP+FN). Same empty convention as dsc.
double jsc(const ConfusionCounts& c, bool* empty_flag = nullptr);

/// Mean and sample standard deviation (n-1). n==1 yields std 0 with the flag
/// set. Empty input is an error.
std::pair<double, double> aggregate_scores(const std::vector<double>& scores,
                                           bool* single_flag = nullptr);

/// Wall-clock seconds per pipeline stage, in a fixed reporting order.
struct StageTimings {
    double segmentation_sample = 0;
    double segmentation_lipid = 0;
    double segmentation_calcification = 0;
    double particle_identification = 0;
    double clustering = 0;
    double topology = 0;
    double colocalization = 0;
    double report = 0;

    double total() const;
    // (name, seconds) pairs in reporting order
    std::vector<std::pair<std::string, double>> entries() const;
};

}  // namespace vcp

#endif
