#include "pairnms/reference.hpp"

#include <algorithm>

namespace pairnms::reference {

std::vector<std::int64_t> greedy_keep_ids(const std::vector<Detection>& dets, double omega,
                                          BoxSelector selector,
                                          const std::map<std::int64_t, double>* densities) {
    const std::size_t n = dets.size();
    std::vector<char> done(n, 0);  // kept or suppressed
    std::vector<std::int64_t> kept;

    auto box_of = [&](std::size_t i) -> const BBox& {
        return selector == BoxSelector::Full ? dets[i].pair.full : dets[i].pair.visible;
    };

    for (;;) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i]) continue;
            if (best == n || dets[i].score > dets[best].score ||
                (dets[i].score == dets[best].score && dets[i].id < dets[best].id)) {
                best = i;
            }
        }
        if (best == n) break;

        done[best] = 1;
        kept.push_back(dets[best].id);
        double threshold = omega;
        if (densities != nullptr) {
            threshold = std::max(threshold, densities->at(dets[best].id));
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (done[j]) continue;
            if (iou(box_of(j), box_of(best)) > threshold) {
                done[j] = 1;
            }
        }
    }
    return kept;
}

}  // namespace pairnms::reference
