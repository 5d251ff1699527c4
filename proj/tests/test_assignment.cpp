#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "pairnms/assignment.hpp"

using namespace pairnms;

namespace {

GroundTruthEntry gt_entry(const PairedBox& pair, std::int64_t id, bool ignore = false) {
    GroundTruthEntry gt;
    gt.pair = pair;
    gt.id = id;
    gt.ignore = ignore;
    return gt;
}

// The anchor rule, restated independently for differential testing.
AssignmentResult naive_assign_anchors(const std::vector<BBox>& anchors,
                                      const std::vector<GroundTruthEntry>& gts,
                                      const AssignmentConfig& cfg) {
    AssignmentResult out;
    for (const auto& a : anchors) {
        double best_any = 0.0;
        double best_q = -1.0;
        const GroundTruthEntry* match = nullptr;
        for (const auto& gt : gts) {
            const double fi = iou(a, gt.pair.full);
            best_any = std::max(best_any, fi);
            if (gt.visible_missing) continue;
            if (fi >= cfg.alpha1 && iof(a, gt.pair.visible) >= cfg.beta1) {
                if (fi > best_q || (fi == best_q && match && gt.id < match->id)) {
                    best_q = fi;
                    match = &gt;
                }
            }
        }
        CandidateLabel label;
        if (match) {
            label = match->ignore ? CandidateLabel{LabelKind::Ignore, -1}
                                  : CandidateLabel{LabelKind::Positive, match->id};
        } else if (best_any < cfg.negative_iou_max) {
            label = {LabelKind::Negative, -1};
        } else {
            label = {LabelKind::Ignore, -1};
        }
        out.labels.push_back(label);
    }
    return out;
}

bool labels_equal(const CandidateLabel& a, const CandidateLabel& b) {
    return a.kind == b.kind && (a.kind != LabelKind::Positive || a.gt_id == b.gt_id);
}

}  // namespace

TEST_CASE("anchor grid layout") {
    AnchorGridSpec spec;
    spec.strides = {16};
    spec.scales = {16};
    spec.aspect_ratios = {1.0};
    spec.image_width = 32;
    spec.image_height = 32;

    const auto anchors = generate_anchors(spec);
    REQUIRE(anchors.size() == 4);
    CHECK(anchors[0] == BBox(0, 0, 16, 16));      // center (8, 8)
    CHECK(anchors[1] == BBox(16, 0, 32, 16));     // center (24, 8), row-major
    CHECK(anchors[2] == BBox(0, 16, 16, 32));
    CHECK(anchors[3] == BBox(16, 16, 32, 32));

    SUBCASE("ratios trade width for height at constant area") {
        spec.aspect_ratios = {0.5, 1.0, 2.0};
        spec.scales = {8, 16};
        const auto all = generate_anchors(spec);
        REQUIRE(all.size() == 4 * 6);
        for (const auto& a : all) {
            const double ar = area(a);
            const bool is_small = std::abs(ar - 64.0) < 1e-9;
            const bool is_large = std::abs(ar - 256.0) < 1e-9;
            CHECK((is_small || is_large));
        }
        // cell 0 ordering: ratio-major, scale-minor
        const double w0 = all[0].x2 - all[0].x1;
        const double h0 = all[0].y2 - all[0].y1;
        CHECK(w0 / h0 == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(area(all[0]) == doctest::Approx(64.0).epsilon(1e-12));
        CHECK(area(all[1]) == doctest::Approx(256.0).epsilon(1e-12));
        const double w2 = all[2].x2 - all[2].x1;
        const double h2 = all[2].y2 - all[2].y1;
        CHECK(w2 / h2 == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("strides are emitted in order") {
        spec.strides = {16, 8};
        const auto all = generate_anchors(spec);
        REQUIRE(all.size() == 4 + 16);
        CHECK(all[0] == BBox(0, 0, 16, 16));
        // first stride-8 anchor: center (4, 4), still the scale-16 square
        CHECK(all[4] == BBox(-4, -4, 12, 12));
    }
    SUBCASE("fractional lattice flooring") {
        spec.image_width = 47;  // floor(47/16) = 2 columns
        spec.image_height = 33;
        const auto all = generate_anchors(spec);
        CHECK(all.size() == 4);
    }
    SUBCASE("bad specs throw") {
        auto broken = spec;
        broken.scales.clear();
        CHECK_THROWS_AS(generate_anchors(broken), std::invalid_argument);
        broken = spec;
        broken.image_width = 0;
        CHECK_THROWS_AS(generate_anchors(broken), std::invalid_argument);
        broken = spec;
        broken.aspect_ratios = {-1.0};
        CHECK_THROWS_AS(generate_anchors(broken), std::invalid_argument);
        broken = spec;
        broken.strides = {0.0};
        CHECK_THROWS_AS(generate_anchors(broken), std::invalid_argument);
    }
}

TEST_CASE("anchor labeling needs both gates") {
    AssignmentConfig cfg;
    cfg.ensure_anchor_match = false;

    SUBCASE("exact match is positive") {
        const std::vector<BBox> anchors{BBox(0, 0, 100, 100)};
        const std::vector<GroundTruthEntry> gts{
            gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 100, 100)}, 7)};
        const auto r = assign_anchors(anchors, gts, cfg);
        REQUIRE(r.labels.size() == 1);
        CHECK(r.labels[0].kind == LabelKind::Positive);
        CHECK(r.labels[0].gt_id == 7);
    }
    SUBCASE("strong full overlap but weak visible coverage is not positive") {
        // anchor/full IoU 0.75, but the anchor covers only 40% of the
        // visible region, so the pair rule rejects it.
        const std::vector<BBox> anchors{BBox(0, 0, 100, 75)};
        const std::vector<GroundTruthEntry> gts{
            gt_entry({BBox(0, 0, 100, 100), BBox(0, 65, 50, 90)}, 0)};
        CHECK(iou(anchors[0], gts[0].pair.full) == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(iof(anchors[0], gts[0].pair.visible) == doctest::Approx(0.4).epsilon(1e-12));
        const auto r = assign_anchors(anchors, gts, cfg);
        CHECK(r.labels[0].kind == LabelKind::Ignore);  // 0.75 >= 0.3 keeps it out of the negatives
    }
    SUBCASE("clearly off anchors are negative") {
        const std::vector<BBox> anchors{BBox(500, 500, 600, 600)};
        const std::vector<GroundTruthEntry> gts{
            gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 100, 100)}, 0)};
        const auto r = assign_anchors(anchors, gts, cfg);
        CHECK(r.labels[0].kind == LabelKind::Negative);
    }
    SUBCASE("qualifying for an ignore-flagged annotation labels the anchor ignore") {
        const std::vector<BBox> anchors{BBox(0, 0, 100, 100)};
        const std::vector<GroundTruthEntry> gts{
            gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 100, 100)}, 0, true)};
        const auto r = assign_anchors(anchors, gts, cfg);
        CHECK(r.labels[0].kind == LabelKind::Ignore);
    }
    SUBCASE("annotations without a visible box cannot qualify") {
        const std::vector<BBox> anchors{BBox(0, 0, 100, 100)};
        GroundTruthEntry gt = gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 0, 0)}, 0);
        gt.visible_missing = true;
        const auto r = assign_anchors(anchors, {gt}, cfg);
        CHECK(r.labels[0].kind == LabelKind::Ignore);
    }
    SUBCASE("among qualifying annotations the highest full overlap wins") {
        const std::vector<BBox> anchors{BBox(0, 0, 100, 100)};
        const std::vector<GroundTruthEntry> gts{
            gt_entry({BBox(0, 0, 100, 90), BBox(0, 0, 100, 90)}, 4),
            gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 100, 100)}, 9)};
        const auto r = assign_anchors(anchors, gts, cfg);
        CHECK(r.labels[0].kind == LabelKind::Positive);
        CHECK(r.labels[0].gt_id == 9);
    }
    SUBCASE("full-overlap ties resolve to the smaller annotation id") {
        const std::vector<BBox> anchors{BBox(0, 0, 100, 100)};
        const std::vector<GroundTruthEntry> gts{
            gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 100, 100)}, 9),
            gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 100, 100)}, 4)};
        const auto r = assign_anchors(anchors, gts, cfg);
        CHECK(r.labels[0].gt_id == 4);
    }
}

TEST_CASE("unmatched annotations claim their best anchor when enabled") {
    AssignmentConfig cfg;  // ensure_anchor_match on by default
    const std::vector<BBox> anchors{BBox(0, 0, 60, 100), BBox(40, 0, 100, 100)};
    // Neither anchor reaches the 0.7 full-IoU gate for this annotation.
    const std::vector<GroundTruthEntry> gts{
        gt_entry({BBox(10, 0, 90, 100), BBox(10, 0, 90, 100)}, 0)};

    const auto with_fallback = assign_anchors(anchors, gts, cfg);
    const int positives = static_cast<int>(
        std::count_if(with_fallback.labels.begin(), with_fallback.labels.end(),
                      [](const CandidateLabel& l) { return l.kind == LabelKind::Positive; }));
    CHECK(positives == 1);

    cfg.ensure_anchor_match = false;
    const auto without = assign_anchors(anchors, gts, cfg);
    for (const auto& l : without.labels) CHECK(l.kind != LabelKind::Positive);

    SUBCASE("ignore-flagged annotations never trigger the fallback") {
        cfg.ensure_anchor_match = true;
        const std::vector<GroundTruthEntry> ignored{
            gt_entry({BBox(10, 0, 90, 100), BBox(10, 0, 90, 100)}, 0, true)};
        const auto r = assign_anchors(anchors, ignored, cfg);
        for (const auto& l : r.labels) CHECK(l.kind != LabelKind::Positive);
    }
    SUBCASE("fallback needs a strictly positive overlap") {
        cfg.ensure_anchor_match = true;
        const std::vector<GroundTruthEntry> far{
            gt_entry({BBox(500, 500, 600, 600), BBox(500, 500, 600, 600)}, 0)};
        const auto r = assign_anchors(anchors, far, cfg);
        for (const auto& l : r.labels) CHECK(l.kind != LabelKind::Positive);
    }
}

TEST_CASE("proposal labeling uses IoU on both boxes") {
    AssignmentConfig cfg;
    const GroundTruthEntry gt =
        gt_entry({BBox(0, 0, 100, 100), BBox(0, 0, 10, 10)}, 0);

    SUBCASE("covering the visible box is not enough; the ratio is symmetric") {
        // proposal visible box contains the annotation's visible box, so
        // intersection-over-foreground would give 1.0, but IoU is 0.5.
        PairedBox prop{BBox(0, 0, 100, 100), BBox(0, 0, 10, 20)};
        cfg.beta2 = 0.6;
        const auto r = assign_proposals({prop}, {gt}, cfg);
        CHECK(r.labels[0].kind != LabelKind::Positive);
        cfg.beta2 = 0.5;
        const auto r2 = assign_proposals({prop}, {gt}, cfg);
        CHECK(r2.labels[0].kind == LabelKind::Positive);
    }
    SUBCASE("both gates reach the positive label") {
        PairedBox prop{BBox(0, 0, 100, 100), BBox(0, 0, 10, 10)};
        const auto r = assign_proposals({prop}, {gt}, cfg);
        CHECK(r.labels[0].kind == LabelKind::Positive);
        CHECK(r.labels[0].gt_id == 0);
    }
    SUBCASE("full gate alone is not enough") {
        PairedBox prop{BBox(0, 0, 100, 100), BBox(50, 50, 60, 60)};
        const auto r = assign_proposals({prop}, {gt}, cfg);
        CHECK(r.labels[0].kind == LabelKind::Ignore);
    }
    SUBCASE("far proposals are negative") {
        PairedBox prop{BBox(400, 400, 500, 500), BBox(400, 400, 500, 500)};
        const auto r = assign_proposals({prop}, {gt}, cfg);
        CHECK(r.labels[0].kind == LabelKind::Negative);
    }
}

TEST_CASE("anchor labeling matches a naive restatement on random inputs") {
    std::mt19937_64 rng(123);
    AssignmentConfig cfg;
    cfg.ensure_anchor_match = false;
    std::uniform_int_distribution<int> n_gts(1, 5);
    std::bernoulli_distribution flag(0.2);

    for (int t = 0; t < 40; ++t) {
        std::vector<BBox> anchors;
        for (int i = 0; i < 80; ++i) {
            anchors.push_back(testor::to_bbox(testor::random_int_box(rng, 60, 40)));
        }
        std::vector<GroundTruthEntry> gts;
        const int ng = n_gts(rng);
        for (int g = 0; g < ng; ++g) {
            const auto dets = testor::random_detections(rng, 1, 60, 40);
            auto gt = gt_entry(dets[0].pair, g, flag(rng));
            gt.visible_missing = flag(rng);
            gts.push_back(gt);
        }
        const auto fast = assign_anchors(anchors, gts, cfg);
        const auto naive = naive_assign_anchors(anchors, gts, cfg);
        REQUIRE(fast.labels.size() == naive.labels.size());
        for (std::size_t i = 0; i < fast.labels.size(); ++i) {
            CAPTURE(t);
            CAPTURE(i);
            CHECK(labels_equal(fast.labels[i], naive.labels[i]));
        }
    }
}

TEST_CASE("fallback leaves no reachable annotation without a positive anchor") {
    std::mt19937_64 rng(321);
    AssignmentConfig cfg;
    for (int t = 0; t < 20; ++t) {
        std::vector<BBox> anchors;
        for (int i = 0; i < 60; ++i) {
            anchors.push_back(testor::to_bbox(testor::random_int_box(rng, 60, 40)));
        }
        std::vector<GroundTruthEntry> gts;
        for (int g = 0; g < 4; ++g) {
            gts.push_back(gt_entry(testor::random_detections(rng, 1, 60, 40)[0].pair, g));
        }
        const auto r = assign_anchors(anchors, gts, cfg);
        for (const auto& gt : gts) {
            bool overlapping = false;
            for (const auto& a : anchors) {
                if (iou(a, gt.pair.full) > 0.0) overlapping = true;
            }
            bool positive = false;
            for (const auto& l : r.labels) {
                if (l.kind == LabelKind::Positive && l.gt_id == gt.id) positive = true;
            }
            CAPTURE(t);
            CAPTURE(gt.id);
            if (overlapping) CHECK(positive);
        }
    }
}

TEST_CASE("configuration and annotation validation") {
    AssignmentConfig cfg;
    const std::vector<BBox> anchors{BBox(0, 0, 10, 10)};
    const std::vector<GroundTruthEntry> gts{
        gt_entry({BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)}, 0)};

    cfg.alpha1 = 1.2;
    CHECK_THROWS_AS(assign_anchors(anchors, gts, cfg), std::invalid_argument);
    cfg = {};
    cfg.negative_iou_max = -0.1;
    CHECK_THROWS_AS(assign_anchors(anchors, gts, cfg), std::invalid_argument);
    cfg = {};
    std::vector<GroundTruthEntry> dup{gts[0], gts[0]};
    CHECK_THROWS_AS(assign_anchors(anchors, dup, cfg), std::invalid_argument);
    CHECK_THROWS_AS(assign_proposals({gts[0].pair}, dup, cfg), std::invalid_argument);
}
