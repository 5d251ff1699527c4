#include "pairnms/assignment.hpp"

#include <cmath>
#include <cstddef>
#include <exception>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace pairnms {

namespace {

constexpr std::ptrdiff_t kParallelGrain = 512;

void validate_config(const AssignmentConfig& cfg) {
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!in_unit(cfg.alpha1) || !in_unit(cfg.beta1) || !in_unit(cfg.alpha2) ||
        !in_unit(cfg.beta2) || !in_unit(cfg.negative_iou_max)) {
        throw std::invalid_argument("assignment thresholds must lie in [0, 1]");
    }
}

void validate_gts(const std::vector<GroundTruthEntry>& gts) {
    std::unordered_set<std::int64_t> seen;
    for (const auto& gt : gts) {
        if (!seen.insert(gt.id).second) {
            throw std::invalid_argument("duplicate ground-truth id");
        }
    }
}

struct BestMatch {
    double best_full_iou = 0.0;      // over all pairs, for the negative band
    double best_qual_iou = -1.0;     // over qualifying pairs only
    std::ptrdiff_t best_qual = -1;   // index into gts
};

CandidateLabel label_candidate(const BestMatch& m,
                               const std::vector<GroundTruthEntry>& gts,
                               const AssignmentConfig& cfg) {
    CandidateLabel out;
    if (m.best_qual >= 0) {
        const auto& gt = gts[static_cast<std::size_t>(m.best_qual)];
        if (gt.ignore) {
            out.kind = LabelKind::Ignore;
        } else {
            out.kind = LabelKind::Positive;
            out.gt_id = gt.id;
        }
    } else if (m.best_full_iou < cfg.negative_iou_max) {
        out.kind = LabelKind::Negative;
    } else {
        out.kind = LabelKind::Ignore;
    }
    return out;
}

// Shared scan: full-box IoU against every pair, qualification via `qualifies`.
// Qualifying ties resolve by (higher full IoU, then smaller gt id); the scan
// visits gts in order, so strict > on IoU keeps the earliest on equal IoU,
// and ids are unique per image.
template <typename FullBoxOf, typename Qualifies>
AssignmentResult assign_common(std::size_t n_candidates, FullBoxOf&& full_of,
                               const std::vector<GroundTruthEntry>& gts,
                               const AssignmentConfig& cfg,
                               Qualifies&& qualifies) {
    AssignmentResult result;
    result.labels.resize(n_candidates);
    const auto n = static_cast<std::ptrdiff_t>(n_candidates);

    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            BestMatch m;
            for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(gts.size()); ++g) {
                const auto& gt = gts[static_cast<std::size_t>(g)];
                const double full_iou = iou(full_of(i), gt.pair.full);
                if (full_iou > m.best_full_iou) m.best_full_iou = full_iou;
                if (!qualifies(i, gt, full_iou)) continue;
                const bool better =
                    full_iou > m.best_qual_iou ||
                    (full_iou == m.best_qual_iou && m.best_qual >= 0 &&
                     gt.id < gts[static_cast<std::size_t>(m.best_qual)].id);
                if (better) {
                    m.best_qual_iou = full_iou;
                    m.best_qual = g;
                }
            }
            result.labels[static_cast<std::size_t>(i)] = label_candidate(m, gts, cfg);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(pairnms_assign_err)
#endif
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return result;
}

}  // namespace

std::vector<BBox> generate_anchors(const AnchorGridSpec& spec) {
    if (spec.strides.empty() || spec.scales.empty() || spec.aspect_ratios.empty()) {
        throw std::invalid_argument("anchor grid needs strides, scales, and aspect ratios");
    }
    if (!(spec.image_width > 0.0) || !(spec.image_height > 0.0)) {
        throw std::invalid_argument("anchor grid needs a positive image size");
    }
    for (double s : spec.strides) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw std::invalid_argument("anchor stride must be positive");
        }
    }
    for (double s : spec.scales) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw std::invalid_argument("anchor scale must be positive");
        }
    }
    for (double r : spec.aspect_ratios) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw std::invalid_argument("anchor aspect ratio must be positive");
        }
    }

    std::vector<BBox> anchors;
    for (double stride : spec.strides) {
        const auto cols = static_cast<std::ptrdiff_t>(std::floor(spec.image_width / stride));
        const auto rows = static_cast<std::ptrdiff_t>(std::floor(spec.image_height / stride));
        for (std::ptrdiff_t row = 0; row < rows; ++row) {
            for (std::ptrdiff_t col = 0; col < cols; ++col) {
                const double cx = (static_cast<double>(col) + 0.5) * stride;
                const double cy = (static_cast<double>(row) + 0.5) * stride;
                for (double ratio : spec.aspect_ratios) {
                    for (double scale : spec.scales) {
                        const double w = scale * std::sqrt(ratio);
                        const double h = scale / std::sqrt(ratio);
                        anchors.emplace_back(cx - w / 2.0, cy - h / 2.0,
                                             cx + w / 2.0, cy + h / 2.0);
                    }
                }
            }
        }
    }
    return anchors;
}

AssignmentResult assign_anchors(const std::vector<BBox>& anchors,
                                const std::vector<GroundTruthEntry>& gts,
                                const AssignmentConfig& cfg) {
    validate_config(cfg);
    validate_gts(gts);

    auto qualifies = [&](std::ptrdiff_t i, const GroundTruthEntry& gt, double full_iou) {
        if (full_iou < cfg.alpha1) return false;
        if (gt.visible_missing) return false;
        return iof(anchors[static_cast<std::size_t>(i)], gt.pair.visible) >= cfg.beta1;
    };
    auto result = assign_common(
        anchors.size(),
        [&](std::ptrdiff_t i) -> const BBox& { return anchors[static_cast<std::size_t>(i)]; },
        gts, cfg, qualifies);

    if (cfg.ensure_anchor_match) {
        // Serial fallback: any non-ignored pair left without a positive anchor
        // claims its highest-full-IoU anchor (ties to the lowest anchor index),
        // provided that anchor overlaps it at all and is not already positive
        // for another pair.
        std::unordered_map<std::int64_t, bool> has_positive;
        for (const auto& gt : gts) {
            if (!gt.ignore) has_positive.emplace(gt.id, false);
        }
        for (const auto& label : result.labels) {
            if (label.kind == LabelKind::Positive) has_positive[label.gt_id] = true;
        }
        for (const auto& gt : gts) {
            if (gt.ignore || has_positive[gt.id]) continue;
            double best = 0.0;
            std::ptrdiff_t best_idx = -1;
            for (std::size_t i = 0; i < anchors.size(); ++i) {
                if (result.labels[i].kind == LabelKind::Positive) continue;
                const double v = iou(anchors[i], gt.pair.full);
                if (v > best) {
                    best = v;
                    best_idx = static_cast<std::ptrdiff_t>(i);
                }
            }
            if (best_idx >= 0) {
                result.labels[static_cast<std::size_t>(best_idx)] = {LabelKind::Positive, gt.id};
            }
        }
    }
    return result;
}

AssignmentResult assign_proposals(const std::vector<PairedBox>& proposals,
                                  const std::vector<GroundTruthEntry>& gts,
                                  const AssignmentConfig& cfg) {
    validate_config(cfg);
    validate_gts(gts);

    auto qualifies = [&](std::ptrdiff_t i, const GroundTruthEntry& gt, double full_iou) {
        if (full_iou < cfg.alpha2) return false;
        if (gt.visible_missing) return false;
        return iou(proposals[static_cast<std::size_t>(i)].visible, gt.pair.visible) >= cfg.beta2;
    };
    return assign_common(
        proposals.size(),
        [&](std::ptrdiff_t i) -> const BBox& { return proposals[static_cast<std::size_t>(i)].full; },
        gts, cfg, qualifies);
}

}  // namespace pairnms
