#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairnms/assignment.hpp"
#include "pairnms/suppression.hpp"

namespace pairnms {

struct ClusterPlacement {
    int cluster_count = 3;
    double cluster_spread = 20.0;  // stddev of person x-centers around the cluster center
};

/// Recipe for one synthetic street scene: people stand in tight clusters,
/// everyone in a cluster shares the cluster's ground line, and nearer people
/// occlude farther ones. Boxes land on integer pixel coordinates.
struct CrowdSceneSpec {
    double image_width = 800.0;
    double image_height = 600.0;
    int num_people = 12;
    double person_height_mean = 200.0;
    double person_height_jitter = 0.0;  // relative stddev; 0 keeps heights exact
    ClusterPlacement clusters;
    /// Person indices from nearest to farthest. Empty draws a seeded shuffle.
    std::vector<int> depth_order;
    std::uint64_t seed = 0;
    /// People hidden completely behind others are dropped unless set.
    bool keep_fully_occluded = false;
};

struct CrowdScene {
    std::string image_id;
    double image_width = 0.0;
    double image_height = 0.0;
    /// Entry id is the person index from generation, so dropped people leave
    /// gaps rather than renumbering.
    std::vector<GroundTruthEntry> gts;
};

CrowdScene generate_scene(const CrowdSceneSpec& spec);

/// count scenes from base.seed + k, image ids "synth-000000" onward.
std::vector<CrowdScene> generate_scenes(const CrowdSceneSpec& base, int count);

/// Detector imperfections layered onto ground truth. Every annotation yields
/// one detection plus extra duplicates; fractional means realize as
/// floor(mean) plus a Bernoulli draw on the remainder.
struct DetectorNoise {
    double duplicates_mean = 0.0;    // extra boxes per annotation
    double center_jitter = 0.0;      // stddev as a fraction of box size
    double size_jitter = 0.0;        // stddev of the scale factor
    double fp_per_image_mean = 0.0;  // unmatched clutter boxes
    std::uint64_t seed = 0;
};

/// Scale jitter maps both boxes about the full-box center. Center jitter
/// translates each box by noise scaled to that box's own size, so the often
/// much smaller visible box stays tightly localized while the full extent
/// drifts; the two may end up slightly out of alignment, as predicted pairs
/// do. True boxes score in [0.5, 1], clutter in [0.1, 0.6]; ids count up in
/// generation order.
std::vector<Detection> simulate_detections(const CrowdScene& scene,
                                           const DetectorNoise& noise,
                                           std::uint64_t seed);

/// Per-scene seeds are noise.seed + index.
std::vector<std::vector<Detection>> simulate_detections(
    const std::vector<CrowdScene>& scenes, const DetectorNoise& noise);

struct OracleSurvival {
    std::int64_t total = 0;
    std::int64_t kept = 0;
    double fraction() const;  // kept/total; 1 when total is 0
};

/// Feeds the annotations themselves through suppression as score-1.0
/// detections and counts survivors. Input order is shuffled per scene
/// (shuffle_seed + scene index) so equal-score tie behaviour is exercised,
/// and ids are reassigned after the shuffle. Ignore-flagged annotations are
/// left out, as are ones without a visible box when the method needs it.
/// Density-adaptive suppression has no density source here and throws.
OracleSurvival oracle_nms_survival(const std::vector<CrowdScene>& scenes,
                                   const NmsConfig& cfg,
                                   std::uint64_t shuffle_seed = 0);

}  // namespace pairnms
