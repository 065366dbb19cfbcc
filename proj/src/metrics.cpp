#include "vcp/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace vcp {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
    if (!pred.same_dims(truth))
        throw std::runtime_error("confusion: mask dimension mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        const bool p = pred.bits[i] != 0;
        const bool t = truth.bits[i] != 0;
        c.tp += (p && t);
        c.fp += (p && !t);
        c.fn += (!p && t);
        c.tn += (!p && !t);
    }
    return c;
}

ConfusionCounts confusion_slice(const std::vector<std::uint8_t>& pred,
                                const std::vector<std::uint8_t>& truth) {
    if (pred.size() != truth.size())
        throw std::runtime_error("confusion: mask dimension mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool t = truth[i] != 0;
        c.tp += (p && t);
        c.fp += (p && !t);
        c.fn += (!p && t);
        c.tn += (!p && !t);
    }
    return c;
}

double dsc(const ConfusionCounts& c, bool* empty_flag) {
    const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
    if (empty_flag) *empty_flag = (denom == 0);
    if (denom == 0) return 1.0;  // both masks empty: perfect agreement on emptiness
    return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double jsc(const ConfusionCounts& c, bool* empty_flag) {
    const std::uint64_t denom = c.tp + c.fp + c.fn;
    if (empty_flag) *empty_flag = (denom == 0);
    if (denom == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(denom);
}

std::pair<double, double> aggregate_scores(const std::vector<double>& scores,
                                           bool* single_flag) {
    if (scores.empty()) throw std::runtime_error("aggregate_scores: empty list");
    if (single_flag) *single_flag = (scores.size() == 1);
    double sum = 0;
    for (double s : scores) sum += s;
    const double mean = sum / static_cast<double>(scores.size());
    if (scores.size() == 1) return {mean, 0.0};
    double ss = 0;
    for (double s : scores) ss += (s - mean) * (s - mean);
    return {mean, std::sqrt(ss / static_cast<double>(scores.size() - 1))};
}

double StageTimings::total() const {
    return segmentation_sample + segmentation_lipid + segmentation_calcification +
           particle_identification + clustering + topology + colocalization + report;
}

std::vector<std::pair<std::string, double>> StageTimings::entries() const {
    return {{"segmentation_sample", segmentation_sample},
            {"segmentation_lipid", segmentation_lipid},
            {"segmentation_calcification", segmentation_calcification},
            {"particle_identification", particle_identification},
            {"clustering", clustering},
            {"topology", topology},
            {"colocalization", colocalization},
            {"report", report}};
}

}  // namespace vcp
