#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairnms/metrics.hpp"

namespace pairnms {

/// One line of an annotation or detection file. Fields the toolkit does not
/// interpret ride along in the extras so files survive a read/write cycle.
struct ImageRecord {
    std::string image_id;
    std::vector<GroundTruthEntry> gts;
    std::vector<Detection> dets;
    std::vector<nlohmann::ordered_json> gt_extras;   // per annotation, minus fbox/vbox
    std::vector<nlohmann::ordered_json> det_extras;  // per detection, minus fbox/vbox/score
    nlohmann::ordered_json record_extra;             // per line, minus ID/gtboxes/dtboxes
    bool has_gt_field = false;   // line carried a gtboxes array, even if empty
    bool has_det_field = false;  // line carried a dtboxes array, even if empty
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::string path, std::size_t line, const std::string& message);
    const std::string& path() const { return path_; }
    std::size_t line() const { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

struct OdgtOptions {
    /// Drop malformed boxes (negative extent, non-finite values) instead of
    /// failing the whole file.
    bool skip_invalid_boxes = false;
};

/// JSON-per-line reader. Each line is an object with "ID" plus "gtboxes"
/// and/or "dtboxes"; boxes are {"fbox": [x, y, w, h], ...} with an optional
/// "vbox" in the same layout. Annotations missing a vbox are flagged
/// visible_missing; detections missing one fall back to the full box.
/// An annotation is ignore-flagged when its tag is not "person" or its
/// extra.ignore is non-zero. Blank lines and lines starting with '#' are
/// skipped. Box ids are indices within the line.
std::vector<ImageRecord> read_odgt(const std::string& path, const OdgtOptions& opts = {});

/// Inverse of read_odgt. Preserved extras are written back verbatim; when an
/// annotation has none, a "person" tag (and extra.ignore for flagged ones)
/// is synthesized. header_comment, if non-empty, becomes a leading '#' line.
void write_odgt(const std::vector<ImageRecord>& records, const std::string& path,
                const std::string& header_comment = "");

/// Joins annotation records with detection records by image id. Images
/// without detections evaluate as all-missed; detections for an image id
/// absent from the annotations throw std::invalid_argument.
std::vector<EvalImage> to_eval_images(const std::vector<ImageRecord>& gt_records,
                                      const std::vector<ImageRecord>& det_records);

}  // namespace pairnms
