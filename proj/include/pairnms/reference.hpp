#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "pairnms/suppression.hpp"

namespace pairnms::reference {

// Serial reference implementations. Deliberately naive: no sorting, no
// early exit, no parallelism. They exist as an independent ground truth
// for the suppression kernels and as the serial side of the benchmark.

/// Repeatedly scan for the highest-scored unsuppressed detection (ties by
/// smaller id), keep it, then mark every remaining detection whose
/// selected-box IoU with it strictly exceeds the keeper's threshold.
/// Returns kept ids in keep order. densities, when given, raises the
/// keeper's threshold to max(omega, density) as in adaptive suppression.
std::vector<std::int64_t> greedy_keep_ids(
    const std::vector<Detection>& dets, double omega, BoxSelector selector,
    const std::map<std::int64_t, double>* densities = nullptr);

}  // namespace pairnms::reference
