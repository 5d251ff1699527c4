#include "pairnms/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace pairnms {

namespace {

void validate_eval_config(const EvalConfig& cfg) {
    if (!(cfg.match_iou >= 0.0 && cfg.match_iou <= 1.0)) {
        throw std::invalid_argument("match_iou must lie in [0, 1]");
    }
    if (cfg.fppi_points < 1) {
        throw std::invalid_argument("fppi_points must be at least 1");
    }
    if (!(cfg.fppi_lo > 0.0) || !(cfg.fppi_hi >= cfg.fppi_lo)) {
        throw std::invalid_argument("fppi range must satisfy 0 < lo <= hi");
    }
    if (!(cfg.min_height >= 0.0)) {
        throw std::invalid_argument("min_height must be non-negative");
    }
    if (!(cfg.miss_rate_floor > 0.0)) {
        throw std::invalid_argument("miss_rate_floor must be positive");
    }
    if (cfg.visibility_band) {
        const auto& b = *cfg.visibility_band;
        if (!(b.lo >= 0.0 && b.lo <= b.hi && b.hi <= 1.0)) {
            throw std::invalid_argument("visibility band must satisfy 0 <= lo <= hi <= 1");
        }
    }
}

// Annotations outside the evaluation regime are kept as ignore regions so
// detections landing on them count neither way.
bool effectively_ignored(const GroundTruthEntry& gt, const EvalConfig& cfg) {
    if (gt.ignore) return true;
    const double fa = area(gt.pair.full);
    if (fa <= 0.0) return true;
    if (gt.pair.full.y2 - gt.pair.full.y1 < cfg.min_height) return true;
    if (cfg.box_selector == BoxSelector::Visible && gt.visible_missing) return true;
    if (cfg.visibility_band) {
        if (gt.visible_missing) return true;
        const double frac = area(gt.pair.visible) / fa;
        if (frac < cfg.visibility_band->lo || frac > cfg.visibility_band->hi) return true;
    }
    return false;
}

struct ScoredOutcome {
    double score = 0.0;
    bool is_tp = false;
    std::size_t image_index = 0;
    std::int64_t det_id = 0;
};

struct ImageMatchResult {
    std::vector<ScoredOutcome> outcomes;  // ignored matches already dropped
    std::int64_t num_gt = 0;
};

ImageMatchResult match_image(const EvalImage& image, std::size_t image_index,
                             const EvalConfig& cfg) {
    std::unordered_set<std::int64_t> gt_ids;
    for (const auto& gt : image.gts) {
        if (!gt_ids.insert(gt.id).second) {
            throw std::invalid_argument("duplicate ground-truth id in image " + image.image_id);
        }
    }
    std::unordered_set<std::int64_t> det_ids;
    for (const auto& det : image.dets) {
        if (!det_ids.insert(det.id).second) {
            throw std::invalid_argument("duplicate detection id in image " + image.image_id);
        }
        if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
            throw std::invalid_argument("detection score outside [0, 1] in image " + image.image_id);
        }
    }

    std::vector<char> gt_ignored(image.gts.size(), 0);
    ImageMatchResult out;
    for (std::size_t g = 0; g < image.gts.size(); ++g) {
        gt_ignored[g] = effectively_ignored(image.gts[g], cfg) ? 1 : 0;
        if (!gt_ignored[g]) ++out.num_gt;
    }

    auto box_of_det = [&](const Detection& d) -> const BBox& {
        return cfg.box_selector == BoxSelector::Visible ? d.pair.visible : d.pair.full;
    };
    auto box_of_gt = [&](const GroundTruthEntry& gt) -> const BBox& {
        return cfg.box_selector == BoxSelector::Visible ? gt.pair.visible : gt.pair.full;
    };

    std::vector<std::size_t> order(image.dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& da = image.dets[a];
        const auto& db = image.dets[b];
        if (da.score != db.score) return da.score > db.score;
        return da.id < db.id;
    });

    std::vector<char> gt_taken(image.gts.size(), 0);
    for (std::size_t oi : order) {
        const auto& det = image.dets[oi];
        double best = -1.0;
        std::ptrdiff_t best_g = -1;
        double best_ignored = -1.0;
        for (std::size_t g = 0; g < image.gts.size(); ++g) {
            const double v = iou(box_of_det(det), box_of_gt(image.gts[g]));
            if (gt_ignored[g]) {
                if (v > best_ignored) best_ignored = v;
                continue;
            }
            if (gt_taken[g] || v < cfg.match_iou) continue;
            const bool better = v > best || (best_g >= 0 && v == best &&
                                             image.gts[g].id < image.gts[static_cast<std::size_t>(best_g)].id);
            if (better) {
                best = v;
                best_g = static_cast<std::ptrdiff_t>(g);
            }
        }
        if (best_g >= 0) {
            gt_taken[static_cast<std::size_t>(best_g)] = 1;
            out.outcomes.push_back({det.score, true, image_index, det.id});
        } else if (best_ignored >= cfg.match_iou) {
            // Landed on an ignore region: contributes to neither TP nor FP.
        } else {
            out.outcomes.push_back({det.score, false, image_index, det.id});
        }
    }
    return out;
}

}  // namespace

EvalReport evaluate(const std::vector<EvalImage>& images, const EvalConfig& cfg) {
    validate_eval_config(cfg);
    {
        std::unordered_set<std::string> ids;
        for (const auto& img : images) {
            if (!ids.insert(img.image_id).second) {
                throw std::invalid_argument("duplicate image id: " + img.image_id);
            }
        }
    }
    if (images.empty()) {
        throw std::invalid_argument("evaluate needs at least one image");
    }

    std::vector<ImageMatchResult> per_image(images.size());
    const auto n = static_cast<std::ptrdiff_t>(images.size());
    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            per_image[static_cast<std::size_t>(i)] =
                match_image(images[static_cast<std::size_t>(i)], static_cast<std::size_t>(i), cfg);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(pairnms_eval_err)
#endif
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    EvalReport report;
    std::vector<ScoredOutcome> pooled;
    for (const auto& r : per_image) {
        report.counts.num_gt += r.num_gt;
        pooled.insert(pooled.end(), r.outcomes.begin(), r.outcomes.end());
    }
    if (report.counts.num_gt == 0) {
        throw std::invalid_argument("no annotation survives the evaluation filters");
    }

    std::sort(pooled.begin(), pooled.end(), [](const ScoredOutcome& a, const ScoredOutcome& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.image_index != b.image_index) return a.image_index < b.image_index;
        return a.det_id < b.det_id;
    });

    const double total_gt = static_cast<double>(report.counts.num_gt);
    const double num_images = static_cast<double>(images.size());
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::vector<std::pair<double, double>> fppi_raw;  // achieved (fppi, miss) per prefix
    fppi_raw.reserve(pooled.size() + 1);
    fppi_raw.emplace_back(0.0, 1.0);  // empty prefix: nothing reported yet
    report.pr_curve.reserve(pooled.size());
    for (const auto& o : pooled) {
        if (o.is_tp) {
            ++tp;
        } else {
            ++fp;
        }
        const double recall = static_cast<double>(tp) / total_gt;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        report.pr_curve.emplace_back(recall, precision);
        fppi_raw.emplace_back(static_cast<double>(fp) / num_images, 1.0 - recall);
    }
    report.counts.num_tp = tp;
    report.counts.num_fp = fp;
    report.counts.num_det = tp + fp;
    report.recall = static_cast<double>(tp) / total_gt;

    // All-point interpolated average precision: rightward running max of
    // precision, accumulated over recall increments.
    {
        double ap = 0.0;
        double running_max = 0.0;
        double prev_recall = 0.0;
        std::vector<std::pair<double, double>> tail(report.pr_curve);
        for (auto it = tail.rbegin(); it != tail.rend(); ++it) {
            running_max = std::max(running_max, it->second);
            it->second = running_max;
        }
        for (const auto& [r, p] : tail) {
            ap += (r - prev_recall) * p;
            prev_recall = r;
        }
        report.average_precision = ap;
    }

    // Collapse equal-fppi runs to their best (lowest) miss rate; the result
    // is a staircase that is non-increasing in miss as fppi grows.
    std::vector<std::pair<double, double>> stair;
    for (const auto& pt : fppi_raw) {
        if (!stair.empty() && stair.back().first == pt.first) {
            stair.back().second = std::min(stair.back().second, pt.second);
        } else {
            stair.push_back(pt);
        }
    }
    report.fppi_curve = stair;
    report.miss_rate_at_max_fppi = stair.back().second;

    double log_sum = 0.0;
    for (int k = 0; k < cfg.fppi_points; ++k) {
        const double t = cfg.fppi_points == 1
                             ? 0.0
                             : static_cast<double>(k) / static_cast<double>(cfg.fppi_points - 1);
        const double ref = cfg.fppi_lo * std::pow(cfg.fppi_hi / cfg.fppi_lo, t);
        // Largest achieved fppi not exceeding the reference point; the
        // virtual empty-prefix entry guarantees one exists.
        double miss = 1.0;
        for (const auto& [f, m] : stair) {
            if (f <= ref) {
                miss = m;
            } else {
                break;
            }
        }
        log_sum += std::log(std::max(miss, cfg.miss_rate_floor));
    }
    report.log_avg_miss_rate = std::exp(log_sum / static_cast<double>(cfg.fppi_points));
    return report;
}

void write_curve(const std::vector<std::pair<double, double>>& curve,
                 const std::string& path, const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    if (!header_comment.empty()) {
        out << "# " << header_comment << "\n";
    }
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& [x, y] : curve) {
        out << x << ' ' << y << "\n";
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

}  // namespace pairnms
