#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pairnms/assignment.hpp"
#include "pairnms/suppression.hpp"

namespace pairnms {

/// One image worth of annotations and detections for evaluation.
struct EvalImage {
    std::string image_id;
    std::vector<GroundTruthEntry> gts;
    std::vector<Detection> dets;
};

/// [lo, hi] band on the visible-area fraction area(V)/area(F); annotations
/// outside the band are treated as ignore regions rather than dropped.
struct VisibilityBand {
    double lo = 0.0;
    double hi = 1.0;
};

struct EvalConfig {
    double match_iou = 0.5;
    BoxSelector box_selector = BoxSelector::Full;  // which box pair side to match on
    int fppi_points = 9;          // log-spaced reference points for the average
    double fppi_lo = 1e-2;
    double fppi_hi = 1.0;
    double min_height = 0.0;      // full-box height gate; shorter gts become ignore
    double miss_rate_floor = 1e-10;  // clamp before taking logs
    std::optional<VisibilityBand> visibility_band;
};

struct EvalCounts {
    std::int64_t num_gt = 0;   // non-ignored annotations
    std::int64_t num_det = 0;  // scored detections (ignored matches excluded)
    std::int64_t num_tp = 0;
    std::int64_t num_fp = 0;
};

struct EvalReport {
    double log_avg_miss_rate = 1.0;  // geometric mean over the fppi grid
    double miss_rate_at_max_fppi = 1.0;
    double average_precision = 0.0;  // all-point interpolation
    double recall = 0.0;
    std::vector<std::pair<double, double>> pr_curve;    // (recall, precision)
    std::vector<std::pair<double, double>> fppi_curve;  // (fppi, miss rate)
    EvalCounts counts;
};

/// Greedy confidence-ordered matching and curve sweep over all images.
/// Detections whose best overlap lands on an ignore region are discarded
/// from both TP and FP counts. Throws std::invalid_argument when no image
/// contributes a non-ignored annotation.
EvalReport evaluate(const std::vector<EvalImage>& images, const EvalConfig& cfg);

/// Writes one "x y" line per curve point. Lines starting with '#' are
/// comments.
void write_curve(const std::vector<std::pair<double, double>>& curve,
                 const std::string& path, const std::string& header_comment);

}  // namespace pairnms
