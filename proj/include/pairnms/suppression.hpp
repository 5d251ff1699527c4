#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "pairnms/geometry.hpp"

namespace pairnms {

/// One detection: a box pair plus confidence. Ids must be unique within
/// one image's detection list; ties in score are broken by ascending id.
struct Detection {
    PairedBox pair;
    double score = 0.0;
    std::int64_t id = 0;
};

enum class NmsMethod {
    GreedyFull,     // classical greedy NMS on the full-body boxes
    GreedyVisible,  // greedy NMS with overlap measured on the visible boxes
    SoftLinear,
    SoftGaussian,
    Adaptive,       // greedy on full boxes with per-suppressor threshold max(omega, density)
};

enum class BoxSelector { Full, Visible };

const char* to_string(NmsMethod m);

/// Accepts "greedy-full", "greedy-visible" (alias "r2"), "soft-linear",
/// "soft-gaussian", "adaptive".
std::optional<NmsMethod> parse_method(std::string_view name);

struct NmsConfig {
    double threshold = 0.5;  // omega: overlaps strictly above it suppress
    NmsMethod method = NmsMethod::GreedyFull;
    double soft_sigma = 0.5;   // gaussian decay width
    double score_floor = 1e-3; // soft-NMS pruning cutoff
};

struct SuppressionResult {
    std::vector<Detection> kept;  // descending score, ties by ascending id
    std::vector<std::pair<std::int64_t, std::int64_t>> suppressed;  // (id, suppressor id)
};

struct Rescored {
    Detection det;
    double rescored = 0.0;
};

/// Greedy suppression on the visible boxes of each pair; kept detections
/// retain both boxes. Equivalent to greedy_nms with BoxSelector::Visible.
/// cfg.method must be GreedyVisible.
SuppressionResult r2_nms(const std::vector<Detection>& dets, const NmsConfig& cfg);

/// Classical greedy suppression on the selected box of each pair. A
/// lower-ranked detection is suppressed by the highest-ranked surviving
/// detection whose selected-box IoU with it strictly exceeds cfg.threshold.
SuppressionResult greedy_nms(const std::vector<Detection>& dets, const NmsConfig& cfg,
                             BoxSelector selector);

/// Iterative score decay on full boxes. Linear: s *= (1 - iou) when
/// iou > threshold; gaussian: s *= exp(-iou^2 / soft_sigma) always.
/// Detections whose rescored value drops below cfg.score_floor are pruned.
/// Output sorted by descending rescored value.
std::vector<Rescored> soft_nms(const std::vector<Detection>& dets, const NmsConfig& cfg);

/// Greedy full-box suppression where the threshold used while detection i
/// acts as suppressor is max(cfg.threshold, densities.at(i.id)). Every
/// detection must have a density in [0, 1].
SuppressionResult adaptive_nms(const std::vector<Detection>& dets,
                               const std::map<std::int64_t, double>& densities,
                               const NmsConfig& cfg);

/// Uniform front end: run cfg.method and return the surviving detections
/// (soft variants return survivors with their rescored values as scores).
/// densities is required for NmsMethod::Adaptive and ignored otherwise.
std::vector<Detection> apply_nms(const std::vector<Detection>& dets, const NmsConfig& cfg,
                                 const std::map<std::int64_t, double>* densities = nullptr);

/// Batch front end over independent images; parallelized with OpenMP.
/// densities_by_image, when given, must be parallel to images.
std::vector<std::vector<Detection>> apply_nms_batch(
    const std::vector<std::vector<Detection>>& images, const NmsConfig& cfg,
    const std::vector<std::map<std::int64_t, double>>* densities_by_image = nullptr);

}  // namespace pairnms
