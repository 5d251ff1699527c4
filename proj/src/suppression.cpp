#include "pairnms/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace pairnms {

namespace {

// Inner suppression scans go parallel only past this many candidates.
constexpr std::ptrdiff_t kParallelGrain = 512;

const BBox& select_box(const Detection& d, BoxSelector selector) {
    return selector == BoxSelector::Full ? d.pair.full : d.pair.visible;
}

void validate_detections(const std::vector<Detection>& dets) {
    std::unordered_set<std::int64_t> seen;
    seen.reserve(dets.size());
    for (const Detection& d : dets) {
        if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0) {
            throw std::invalid_argument("detection " + std::to_string(d.id) +
                                        ": score must be finite and in [0, 1]");
        }
        if (!seen.insert(d.id).second) {
            throw std::invalid_argument("duplicate detection id " + std::to_string(d.id));
        }
    }
}

// Rank order: descending score, ties by ascending id.
std::vector<std::size_t> rank_order(const std::vector<Detection>& dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return dets[a].id < dets[b].id;
    });
    return order;
}

// Shared greedy scan. threshold_of(i) yields the omega in force while
// detection index i is the suppressor.
template <typename ThresholdOf>
SuppressionResult greedy_core(const std::vector<Detection>& dets, BoxSelector selector,
                              ThresholdOf threshold_of) {
    validate_detections(dets);
    const std::vector<std::size_t> order = rank_order(dets);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dets.size());

    std::vector<char> suppressed(dets.size(), 0);
    std::vector<std::int64_t> suppressor(dets.size(), -1);

    for (std::ptrdiff_t oi = 0; oi < n; ++oi) {
        const std::size_t i = order[oi];
        if (suppressed[i]) continue;
        const BBox& keeper = select_box(dets[i], selector);
        const double omega = threshold_of(i);
        const std::int64_t keeper_id = dets[i].id;
        // Marking is independent per candidate: each iteration touches only
        // its own slot, so the scan order does not matter.
#pragma omp parallel for schedule(static) if (n - oi - 1 >= kParallelGrain)
        for (std::ptrdiff_t oj = oi + 1; oj < n; ++oj) {
            const std::size_t j = order[oj];
            if (suppressed[j]) continue;
            if (iou(select_box(dets[j], selector), keeper) > omega) {
                suppressed[j] = 1;
                suppressor[j] = keeper_id;
            }
        }
    }

    SuppressionResult result;
    for (std::ptrdiff_t oi = 0; oi < n; ++oi) {
        const std::size_t i = order[oi];
        if (suppressed[i]) {
            result.suppressed.emplace_back(dets[i].id, suppressor[i]);
        } else {
            result.kept.push_back(dets[i]);
        }
    }
    return result;
}

}  // namespace

const char* to_string(NmsMethod m) {
    switch (m) {
        case NmsMethod::GreedyFull: return "greedy-full";
        case NmsMethod::GreedyVisible: return "greedy-visible";
        case NmsMethod::SoftLinear: return "soft-linear";
        case NmsMethod::SoftGaussian: return "soft-gaussian";
        case NmsMethod::Adaptive: return "adaptive";
    }
    return "unknown";
}

std::optional<NmsMethod> parse_method(std::string_view name) {
    if (name == "greedy-full") return NmsMethod::GreedyFull;
    if (name == "greedy-visible" || name == "r2") return NmsMethod::GreedyVisible;
    if (name == "soft-linear") return NmsMethod::SoftLinear;
    if (name == "soft-gaussian") return NmsMethod::SoftGaussian;
    if (name == "adaptive") return NmsMethod::Adaptive;
    return std::nullopt;
}

SuppressionResult r2_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    if (cfg.method != NmsMethod::GreedyVisible) {
        throw std::invalid_argument("r2_nms: cfg.method must be greedy-visible");
    }
    return greedy_nms(dets, cfg, BoxSelector::Visible);
}

SuppressionResult greedy_nms(const std::vector<Detection>& dets, const NmsConfig& cfg,
                             BoxSelector selector) {
    const double omega = cfg.threshold;
    return greedy_core(dets, selector, [omega](std::size_t) { return omega; });
}

std::vector<Rescored> soft_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    if (cfg.method != NmsMethod::SoftLinear && cfg.method != NmsMethod::SoftGaussian) {
        throw std::invalid_argument("soft_nms: cfg.method must be a soft variant");
    }
    if (!(cfg.soft_sigma > 0.0)) {
        throw std::invalid_argument("soft_nms: soft_sigma must be positive");
    }
    validate_detections(dets);
    const bool gaussian = cfg.method == NmsMethod::SoftGaussian;

    std::vector<std::size_t> live(dets.size());
    std::iota(live.begin(), live.end(), std::size_t{0});
    std::vector<double> score(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) score[i] = dets[i].score;

    std::vector<Rescored> out;
    out.reserve(dets.size());
    while (!live.empty()) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < live.size(); ++k) {
            const std::size_t a = live[k], b = live[best];
            if (score[a] > score[b] || (score[a] == score[b] && dets[a].id < dets[b].id)) {
                best = k;
            }
        }
        const std::size_t m = live[best];
        out.push_back({dets[m], score[m]});
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(best));

        const BBox& anchor = dets[m].pair.full;
        std::vector<std::size_t> next;
        next.reserve(live.size());
        for (const std::size_t r : live) {
            const double v = iou(dets[r].pair.full, anchor);
            if (gaussian) {
                score[r] *= std::exp(-(v * v) / cfg.soft_sigma);
            } else if (v > cfg.threshold) {
                score[r] *= (1.0 - v);
            }
            if (score[r] >= cfg.score_floor) {
                next.push_back(r);
            }
        }
        live.swap(next);
    }
    // Extraction order is already descending in rescored value: scores only
    // decay, so each extracted maximum bounds everything after it.
    return out;
}

SuppressionResult adaptive_nms(const std::vector<Detection>& dets,
                               const std::map<std::int64_t, double>& densities,
                               const NmsConfig& cfg) {
    for (const Detection& d : dets) {
        auto it = densities.find(d.id);
        if (it == densities.end()) {
            throw std::invalid_argument("adaptive_nms: missing density for id " +
                                        std::to_string(d.id));
        }
        if (!std::isfinite(it->second) || it->second < 0.0 || it->second > 1.0) {
            throw std::invalid_argument("adaptive_nms: density for id " + std::to_string(d.id) +
                                        " must be in [0, 1]");
        }
    }
    const double omega = cfg.threshold;
    return greedy_core(dets, BoxSelector::Full, [&](std::size_t i) {
        return std::max(omega, densities.at(dets[i].id));
    });
}

std::vector<Detection> apply_nms(const std::vector<Detection>& dets, const NmsConfig& cfg,
                                 const std::map<std::int64_t, double>* densities) {
    switch (cfg.method) {
        case NmsMethod::GreedyFull:
            return greedy_nms(dets, cfg, BoxSelector::Full).kept;
        case NmsMethod::GreedyVisible:
            return greedy_nms(dets, cfg, BoxSelector::Visible).kept;
        case NmsMethod::SoftLinear:
        case NmsMethod::SoftGaussian: {
            std::vector<Detection> kept;
            for (Rescored& r : soft_nms(dets, cfg)) {
                r.det.score = r.rescored;
                kept.push_back(r.det);
            }
            return kept;
        }
        case NmsMethod::Adaptive: {
            if (densities == nullptr) {
                throw std::invalid_argument("apply_nms: adaptive method requires densities");
            }
            return adaptive_nms(dets, *densities, cfg).kept;
        }
    }
    throw std::invalid_argument("apply_nms: unknown method");
}

std::vector<std::vector<Detection>> apply_nms_batch(
    const std::vector<std::vector<Detection>>& images, const NmsConfig& cfg,
    const std::vector<std::map<std::int64_t, double>>* densities_by_image) {
    if (densities_by_image != nullptr && densities_by_image->size() != images.size()) {
        throw std::invalid_argument("apply_nms_batch: densities must be parallel to images");
    }
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(images.size());
    std::vector<std::vector<Detection>> out(images.size());
    std::vector<std::exception_ptr> errors(images.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto* dens = densities_by_image ? &(*densities_by_image)[i] : nullptr;
            out[i] = apply_nms(images[i], cfg, dens);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace pairnms
