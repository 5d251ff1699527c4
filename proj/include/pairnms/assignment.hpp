#pragma once

#include <cstdint>
#include <vector>

#include "pairnms/geometry.hpp"

namespace pairnms {

/// Annotated box pair. id is opaque but unique within one image.
/// visible_missing marks entries whose annotation carried no visible box;
/// they are usable for full-box-only work and can never match a rule that
/// gates on the visible box.
struct GroundTruthEntry {
    PairedBox pair;
    bool ignore = false;
    std::int64_t id = 0;
    bool visible_missing = false;
};

struct AssignmentConfig {
    double alpha1 = 0.7;  // anchor rule: full-box IoU gate
    double beta1 = 0.7;   // anchor rule: visible-box IoF gate
    double alpha2 = 0.5;  // proposal rule: full-box IoU gate
    double beta2 = 0.5;   // proposal rule: visible-box IoU gate
    double negative_iou_max = 0.3;  // best full IoU below this makes a candidate negative
    // Anchor rule only: guarantee each annotated pair its best-overlapping
    // anchor even when no anchor clears the gates.
    bool ensure_anchor_match = true;
};

/// Dense anchor grid: for every stride, one anchor per lattice cell per
/// (aspect ratio, scale) combination. A scale is the anchor side in pixels
/// at ratio 1; ratios trade width for height at constant area.
struct AnchorGridSpec {
    std::vector<double> strides;
    std::vector<double> scales;
    std::vector<double> aspect_ratios{0.5, 1.0, 2.0};  // width / height
    double image_width = 0.0;
    double image_height = 0.0;
};

enum class LabelKind { Positive, Negative, Ignore };

struct CandidateLabel {
    LabelKind kind = LabelKind::Negative;
    std::int64_t gt_id = -1;  // meaningful only for positives
};

struct AssignmentResult {
    std::vector<CandidateLabel> labels;  // one per candidate, input order
};

/// Deterministic ordering: stride-major, then lattice row-major, then
/// aspect ratio, then scale. Anchor centers sit at (k + 0.5) * stride.
std::vector<BBox> generate_anchors(const AnchorGridSpec& spec);

/// Anchor labeling. An anchor is positive for pair (F, V) iff
/// iou(A, F) >= alpha1 and iof(A, V) >= beta1; among qualifying pairs the
/// one with highest full-box IoU wins (ties by smaller gt id). An anchor
/// whose best qualifying pair is ignore-flagged is labeled ignore. Anchors
/// whose best full-box IoU over all pairs stays below negative_iou_max are
/// negative; everything else is ignore.
AssignmentResult assign_anchors(const std::vector<BBox>& anchors,
                                const std::vector<GroundTruthEntry>& gts,
                                const AssignmentConfig& cfg);

/// Proposal-pair labeling: positive iff iou(P_f, F) >= alpha2 and
/// iou(P_v, V) >= beta2 (IoU on both boxes, unlike the anchor rule).
/// Multi-match resolution and the negative/ignore bands follow
/// assign_anchors; no best-match fallback.
AssignmentResult assign_proposals(const std::vector<PairedBox>& proposals,
                                  const std::vector<GroundTruthEntry>& gts,
                                  const AssignmentConfig& cfg);

}  // namespace pairnms
