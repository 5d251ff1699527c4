#include "pairnms/synthcrowd.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <exception>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pairnms {

namespace {

constexpr double kWidthHeightRatio = 0.45;

void validate_spec(const CrowdSceneSpec& spec) {
    if (!(spec.image_width > 0.0) || !(spec.image_height > 0.0) ||
        !std::isfinite(spec.image_width) || !std::isfinite(spec.image_height)) {
        throw std::invalid_argument("scene needs a positive image size");
    }
    if (spec.num_people < 0) {
        throw std::invalid_argument("num_people must be non-negative");
    }
    if (!(spec.person_height_mean > 0.0) || !std::isfinite(spec.person_height_mean)) {
        throw std::invalid_argument("person_height_mean must be positive");
    }
    if (!(spec.person_height_jitter >= 0.0) || !std::isfinite(spec.person_height_jitter)) {
        throw std::invalid_argument("person_height_jitter must be non-negative");
    }
    if (spec.clusters.cluster_count < 1) {
        throw std::invalid_argument("cluster_count must be at least 1");
    }
    if (!(spec.clusters.cluster_spread >= 0.0) || !std::isfinite(spec.clusters.cluster_spread)) {
        throw std::invalid_argument("cluster_spread must be non-negative");
    }
    if (!spec.depth_order.empty()) {
        if (spec.depth_order.size() != static_cast<std::size_t>(spec.num_people)) {
            throw std::invalid_argument("depth_order must list every person exactly once");
        }
        std::vector<int> sorted(spec.depth_order);
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < spec.num_people; ++i) {
            if (sorted[static_cast<std::size_t>(i)] != i) {
                throw std::invalid_argument("depth_order must be a permutation of 0..n-1");
            }
        }
    }
}

struct IntBox {
    long x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    bool empty() const { return x2 <= x1 || y2 <= y1; }
};

BBox to_bbox(const IntBox& b) {
    return BBox(static_cast<double>(b.x1), static_cast<double>(b.y1),
                static_cast<double>(b.x2), static_cast<double>(b.y2));
}

// Tight pixel bounding box of the part of `self` not covered by any box in
// `fronts`, on the unit-pixel grid; empty() when fully covered.
IntBox visible_pixels(const IntBox& self, const std::vector<IntBox>& fronts) {
    long min_x = self.x2, max_x = self.x1 - 1;
    long min_y = self.y2, max_y = self.y1 - 1;
    for (long py = self.y1; py < self.y2; ++py) {
        for (long px = self.x1; px < self.x2; ++px) {
            bool covered = false;
            for (const auto& f : fronts) {
                if (px >= f.x1 && px < f.x2 && py >= f.y1 && py < f.y2) {
                    covered = true;
                    break;
                }
            }
            if (!covered) {
                min_x = std::min(min_x, px);
                max_x = std::max(max_x, px);
                min_y = std::min(min_y, py);
                max_y = std::max(max_y, py);
            }
        }
    }
    if (max_x < min_x) return IntBox{0, 0, 0, 0};
    return IntBox{min_x, min_y, max_x + 1, max_y + 1};
}

double realize_count(double mean, std::mt19937_64& rng) {
    const double k = std::floor(mean);
    const double frac = mean - k;
    if (frac <= 0.0) return k;
    std::bernoulli_distribution extra(frac);
    return k + (extra(rng) ? 1.0 : 0.0);
}

void validate_noise(const DetectorNoise& noise) {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!ok(noise.duplicates_mean) || !ok(noise.center_jitter) ||
        !ok(noise.size_jitter) || !ok(noise.fp_per_image_mean)) {
        throw std::invalid_argument("detector noise parameters must be non-negative");
    }
}

BBox map_box(const BBox& b, double cx, double cy, double sx, double sy, double dx,
             double dy) {
    return BBox(cx + sx * (b.x1 - cx) + dx, cy + sy * (b.y1 - cy) + dy,
                cx + sx * (b.x2 - cx) + dx, cy + sy * (b.y2 - cy) + dy);
}

}  // namespace

CrowdScene generate_scene(const CrowdSceneSpec& spec) {
    validate_spec(spec);
    std::mt19937_64 rng(spec.seed);

    CrowdScene scene;
    scene.image_id = "synth-s" + std::to_string(spec.seed);
    scene.image_width = spec.image_width;
    scene.image_height = spec.image_height;

    const int n = spec.num_people;
    const int n_clusters = spec.clusters.cluster_count;

    std::vector<double> cluster_x(static_cast<std::size_t>(n_clusters));
    std::vector<double> cluster_baseline(static_cast<std::size_t>(n_clusters));
    std::uniform_real_distribution<double> baseline_dist(0.85 * spec.image_height,
                                                         0.98 * spec.image_height);
    for (int c = 0; c < n_clusters; ++c) {
        cluster_x[static_cast<std::size_t>(c)] =
            (static_cast<double>(c) + 0.5) * spec.image_width / static_cast<double>(n_clusters);
        cluster_baseline[static_cast<std::size_t>(c)] = baseline_dist(rng);
    }

    std::vector<IntBox> full(static_cast<std::size_t>(n));
    std::vector<char> emitted(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        const int c = i % n_clusters;
        std::normal_distribution<double> x_dist(cluster_x[static_cast<std::size_t>(c)],
                                                std::max(spec.clusters.cluster_spread, 1e-9));
        const double cx = spec.clusters.cluster_spread > 0.0
                              ? x_dist(rng)
                              : cluster_x[static_cast<std::size_t>(c)];
        double h = spec.person_height_mean;
        if (spec.person_height_jitter > 0.0) {
            std::normal_distribution<double> h_dist(0.0, 1.0);
            h *= std::clamp(1.0 + spec.person_height_jitter * h_dist(rng), 0.3, 1.7);
        }
        const double w = kWidthHeightRatio * h;
        const double baseline = cluster_baseline[static_cast<std::size_t>(c)];
        IntBox b;
        b.x1 = std::lround(cx - w / 2.0);
        b.x2 = std::lround(cx + w / 2.0);
        b.y2 = std::lround(baseline);
        b.y1 = std::lround(baseline - h);
        b.x1 = std::max(b.x1, 0L);
        b.y1 = std::max(b.y1, 0L);
        b.x2 = std::min(b.x2, static_cast<long>(std::floor(spec.image_width)));
        b.y2 = std::min(b.y2, static_cast<long>(std::floor(spec.image_height)));
        full[static_cast<std::size_t>(i)] = b;
        emitted[static_cast<std::size_t>(i)] = b.empty() ? 0 : 1;
    }

    std::vector<int> order(spec.depth_order);
    if (order.empty()) {
        order.resize(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<int> rank(static_cast<std::size_t>(n), 0);
    for (int k = 0; k < n; ++k) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;

    for (int i = 0; i < n; ++i) {
        if (!emitted[static_cast<std::size_t>(i)]) continue;
        const IntBox& self = full[static_cast<std::size_t>(i)];
        std::vector<IntBox> fronts;
        for (int q = 0; q < n; ++q) {
            if (q == i || !emitted[static_cast<std::size_t>(q)]) continue;
            if (rank[static_cast<std::size_t>(q)] >= rank[static_cast<std::size_t>(i)]) continue;
            const IntBox& f = full[static_cast<std::size_t>(q)];
            if (f.x2 <= self.x1 || self.x2 <= f.x1 || f.y2 <= self.y1 || self.y2 <= f.y1) {
                continue;
            }
            fronts.push_back(f);
        }
        IntBox vis = fronts.empty() ? self : visible_pixels(self, fronts);
        GroundTruthEntry gt;
        gt.id = i;
        if (vis.empty()) {
            if (!spec.keep_fully_occluded) continue;
            gt.pair = PairedBox{to_bbox(self),
                                BBox(static_cast<double>(self.x1), static_cast<double>(self.y1),
                                     static_cast<double>(self.x1), static_cast<double>(self.y1))};
        } else {
            gt.pair = PairedBox{to_bbox(self), to_bbox(vis)};
        }
        scene.gts.push_back(gt);
    }
    return scene;
}

std::vector<CrowdScene> generate_scenes(const CrowdSceneSpec& base, int count) {
    if (count < 0) throw std::invalid_argument("scene count must be non-negative");
    std::vector<CrowdScene> scenes(static_cast<std::size_t>(count));
    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int k = 0; k < count; ++k) {
        try {
            CrowdSceneSpec spec = base;
            spec.seed = base.seed + static_cast<std::uint64_t>(k);
            CrowdScene scene = generate_scene(spec);
            char buf[16];
            std::snprintf(buf, sizeof buf, "synth-%06d", k);
            scene.image_id = buf;
            scenes[static_cast<std::size_t>(k)] = std::move(scene);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(pairnms_scene_err)
#endif
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return scenes;
}

std::vector<Detection> simulate_detections(const CrowdScene& scene,
                                           const DetectorNoise& noise,
                                           std::uint64_t seed) {
    validate_noise(noise);
    if (noise.fp_per_image_mean > 0.0 &&
        (!(scene.image_width > 0.0) || !(scene.image_height > 0.0))) {
        throw std::invalid_argument("clutter boxes need scene image dimensions");
    }
    std::mt19937_64 rng(seed);
    std::vector<Detection> dets;
    std::int64_t next_id = 0;

    std::uniform_real_distribution<double> tp_score(0.5, 1.0);
    for (const auto& gt : scene.gts) {
        const auto copies = static_cast<int>(1.0 + realize_count(noise.duplicates_mean, rng));
        const BBox& f = gt.pair.full;
        const double cx = (f.x1 + f.x2) / 2.0;
        const double cy = (f.y1 + f.y2) / 2.0;
        const double fw = f.x2 - f.x1;
        const double fh = f.y2 - f.y1;
        const BBox& v = gt.pair.visible;
        const double vw = v.x2 - v.x1;
        const double vh = v.y2 - v.y1;
        for (int j = 0; j < copies; ++j) {
            double dx = 0.0, dy = 0.0, sx = 1.0, sy = 1.0;
            double vdx = 0.0, vdy = 0.0;
            if (noise.center_jitter > 0.0) {
                std::normal_distribution<double> jx(0.0, noise.center_jitter * std::max(fw, 1.0));
                std::normal_distribution<double> jy(0.0, noise.center_jitter * std::max(fh, 1.0));
                dx = jx(rng);
                dy = jy(rng);
                // The visible part drifts with its own, usually smaller,
                // extent: image evidence pins it down more tightly than the
                // extrapolated full box.
                std::normal_distribution<double> vjx(0.0, noise.center_jitter * std::max(vw, 1.0));
                std::normal_distribution<double> vjy(0.0, noise.center_jitter * std::max(vh, 1.0));
                vdx = vjx(rng);
                vdy = vjy(rng);
            }
            if (noise.size_jitter > 0.0) {
                std::normal_distribution<double> js(0.0, noise.size_jitter);
                sx = std::max(1.0 + js(rng), 0.05);
                sy = std::max(1.0 + js(rng), 0.05);
            }
            Detection d;
            d.pair.full = map_box(gt.pair.full, cx, cy, sx, sy, dx, dy);
            d.pair.visible = map_box(gt.pair.visible, cx, cy, sx, sy, vdx, vdy);
            d.score = tp_score(rng);
            d.id = next_id++;
            dets.push_back(d);
        }
    }

    const auto n_fp = static_cast<int>(realize_count(noise.fp_per_image_mean, rng));
    if (n_fp > 0) {
        double mean_h = 0.3 * scene.image_height;
        if (!scene.gts.empty()) {
            double sum = 0.0;
            for (const auto& gt : scene.gts) sum += gt.pair.full.y2 - gt.pair.full.y1;
            mean_h = sum / static_cast<double>(scene.gts.size());
        }
        std::uniform_real_distribution<double> h_dist(0.5 * mean_h, 1.5 * mean_h);
        std::uniform_real_distribution<double> fp_score(0.1, 0.6);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int k = 0; k < n_fp; ++k) {
            const double h = std::min(h_dist(rng), scene.image_height);
            const double w = std::min(kWidthHeightRatio * h, scene.image_width);
            const double x1 = unit(rng) * (scene.image_width - w);
            const double y1 = unit(rng) * (scene.image_height - h);
            Detection d;
            d.pair.full = BBox(x1, y1, x1 + w, y1 + h);
            d.pair.visible = d.pair.full;
            d.score = fp_score(rng);
            d.id = next_id++;
            dets.push_back(d);
        }
    }
    return dets;
}

std::vector<std::vector<Detection>> simulate_detections(
    const std::vector<CrowdScene>& scenes, const DetectorNoise& noise) {
    validate_noise(noise);
    std::vector<std::vector<Detection>> out(scenes.size());
    const auto n = static_cast<std::ptrdiff_t>(scenes.size());
    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] =
                simulate_detections(scenes[static_cast<std::size_t>(i)], noise,
                                    noise.seed + static_cast<std::uint64_t>(i));
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(pairnms_sim_err)
#endif
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

double OracleSurvival::fraction() const {
    if (total == 0) return 1.0;
    return static_cast<double>(kept) / static_cast<double>(total);
}

OracleSurvival oracle_nms_survival(const std::vector<CrowdScene>& scenes,
                                   const NmsConfig& cfg, std::uint64_t shuffle_seed) {
    if (cfg.method == NmsMethod::Adaptive) {
        throw std::invalid_argument("oracle survival has no density source for adaptive suppression");
    }
    const auto n = static_cast<std::ptrdiff_t>(scenes.size());
    std::vector<std::int64_t> totals(scenes.size(), 0);
    std::vector<std::int64_t> kepts(scenes.size(), 0);
    std::exception_ptr first_error = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto& scene = scenes[static_cast<std::size_t>(i)];
            std::vector<Detection> dets;
            for (const auto& gt : scene.gts) {
                if (gt.ignore) continue;
                if (gt.visible_missing && cfg.method == NmsMethod::GreedyVisible) continue;
                Detection d;
                d.pair = gt.pair;
                d.score = 1.0;
                d.id = 0;
                dets.push_back(d);
            }
            std::mt19937_64 rng(shuffle_seed + static_cast<std::uint64_t>(i));
            std::shuffle(dets.begin(), dets.end(), rng);
            for (std::size_t k = 0; k < dets.size(); ++k) {
                dets[k].id = static_cast<std::int64_t>(k);
            }
            totals[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(dets.size());
            kepts[static_cast<std::size_t>(i)] =
                static_cast<std::int64_t>(apply_nms(dets, cfg).size());
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical(pairnms_oracle_err)
#endif
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    OracleSurvival out;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        out.total += totals[i];
        out.kept += kepts[i];
    }
    return out;
}

}  // namespace pairnms
