#include "pairnms/ingest.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace pairnms {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& msg) {
    throw ParseError(path, line, msg);
}

BBox parse_xywh(const json& arr, const std::string& path, std::size_t line,
                const char* field) {
    if (!arr.is_array() || arr.size() != 4) {
        fail(path, line, std::string(field) + " must be an [x, y, w, h] array");
    }
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) {
        if (!arr[i].is_number()) {
            fail(path, line, std::string(field) + " entries must be numbers");
        }
        v[i] = arr[i].get<double>();
        if (!std::isfinite(v[i])) {
            fail(path, line, std::string(field) + " entries must be finite");
        }
    }
    if (v[2] < 0.0 || v[3] < 0.0) {
        fail(path, line, std::string(field) + " width and height must be non-negative");
    }
    return BBox(v[0], v[1], v[0] + v[2], v[1] + v[3]);
}

json xywh_of(const BBox& b) {
    auto num = [](double v) -> json {
        if (std::floor(v) == v && std::fabs(v) < 9.007199254740992e15) {
            return json(static_cast<std::int64_t>(v));
        }
        return json(v);
    };
    return json::array({num(b.x1), num(b.y1), num(b.x2 - b.x1), num(b.y2 - b.y1)});
}

bool ignore_from_extra(const json& box) {
    auto it = box.find("extra");
    if (it == box.end() || !it->is_object()) return false;
    auto ig = it->find("ignore");
    if (ig == it->end()) return false;
    if (ig->is_boolean()) return ig->get<bool>();
    if (ig->is_number()) return ig->get<double>() != 0.0;
    return false;
}

}  // namespace

ParseError::ParseError(std::string path, std::size_t line, const std::string& message)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + message),
      path_(std::move(path)),
      line_(line) {}

std::vector<ImageRecord> read_odgt(const std::string& path, const OdgtOptions& opts) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    std::vector<ImageRecord> records;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            fail(path, lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) fail(path, lineno, "line must be a JSON object");

        ImageRecord rec;
        auto id_it = obj.find("ID");
        if (id_it == obj.end() || !id_it->is_string()) {
            fail(path, lineno, "missing string field ID");
        }
        rec.image_id = id_it->get<std::string>();
        if (rec.image_id.empty()) fail(path, lineno, "empty image ID");
        if (!seen_ids.insert(rec.image_id).second) {
            fail(path, lineno, "duplicate image ID: " + rec.image_id);
        }

        auto gt_it = obj.find("gtboxes");
        if (gt_it != obj.end()) {
            rec.has_gt_field = true;
            if (!gt_it->is_array()) fail(path, lineno, "gtboxes must be an array");
            for (const auto& box : *gt_it) {
                if (!box.is_object()) fail(path, lineno, "gtboxes entries must be objects");
                auto fb = box.find("fbox");
                if (fb == box.end()) fail(path, lineno, "annotation missing fbox");
                GroundTruthEntry gt;
                try {
                    gt.pair.full = parse_xywh(*fb, path, lineno, "fbox");
                    auto vb = box.find("vbox");
                    if (vb != box.end()) {
                        gt.pair.visible = parse_xywh(*vb, path, lineno, "vbox");
                    } else {
                        gt.visible_missing = true;
                        gt.pair.visible = BBox(gt.pair.full.x1, gt.pair.full.y1,
                                               gt.pair.full.x1, gt.pair.full.y1);
                    }
                } catch (const ParseError&) {
                    if (opts.skip_invalid_boxes) continue;
                    throw;
                }
                auto tag = box.find("tag");
                gt.ignore = (tag != box.end() && tag->is_string() &&
                             tag->get<std::string>() != "person") ||
                            ignore_from_extra(box);
                gt.id = static_cast<std::int64_t>(rec.gts.size());
                json extras = box;
                extras.erase("fbox");
                extras.erase("vbox");
                rec.gts.push_back(gt);
                rec.gt_extras.push_back(std::move(extras));
            }
        }

        auto dt_it = obj.find("dtboxes");
        if (dt_it != obj.end()) {
            rec.has_det_field = true;
            if (!dt_it->is_array()) fail(path, lineno, "dtboxes must be an array");
            for (const auto& box : *dt_it) {
                if (!box.is_object()) fail(path, lineno, "dtboxes entries must be objects");
                auto fb = box.find("fbox");
                if (fb == box.end()) fail(path, lineno, "detection missing fbox");
                auto sc = box.find("score");
                if (sc == box.end() || !sc->is_number()) {
                    fail(path, lineno, "detection missing numeric score");
                }
                Detection det;
                det.score = sc->get<double>();
                if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
                    fail(path, lineno, "detection score must lie in [0, 1]");
                }
                try {
                    det.pair.full = parse_xywh(*fb, path, lineno, "fbox");
                    auto vb = box.find("vbox");
                    det.pair.visible = vb != box.end()
                                           ? parse_xywh(*vb, path, lineno, "vbox")
                                           : det.pair.full;
                } catch (const ParseError&) {
                    if (opts.skip_invalid_boxes) continue;
                    throw;
                }
                det.id = static_cast<std::int64_t>(rec.dets.size());
                json extras = box;
                extras.erase("fbox");
                extras.erase("vbox");
                extras.erase("score");
                rec.dets.push_back(det);
                rec.det_extras.push_back(std::move(extras));
            }
        }

        json extra = obj;
        extra.erase("ID");
        extra.erase("gtboxes");
        extra.erase("dtboxes");
        rec.record_extra = std::move(extra);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_odgt(const std::vector<ImageRecord>& records, const std::string& path,
                const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    if (!header_comment.empty()) {
        out << "# " << header_comment << "\n";
    }
    for (const auto& rec : records) {
        json obj;
        obj["ID"] = rec.image_id;
        if (rec.has_gt_field || !rec.gts.empty()) {
            json arr = json::array();
            for (std::size_t i = 0; i < rec.gts.size(); ++i) {
                const auto& gt = rec.gts[i];
                json box;
                box["fbox"] = xywh_of(gt.pair.full);
                if (!gt.visible_missing) box["vbox"] = xywh_of(gt.pair.visible);
                const bool have_extras =
                    i < rec.gt_extras.size() && rec.gt_extras[i].is_object() &&
                    !rec.gt_extras[i].empty();
                if (have_extras) {
                    for (const auto& [k, v] : rec.gt_extras[i].items()) box[k] = v;
                } else {
                    box["tag"] = "person";
                    if (gt.ignore) box["extra"] = json{{"ignore", 1}};
                }
                arr.push_back(std::move(box));
            }
            obj["gtboxes"] = std::move(arr);
        }
        if (rec.has_det_field || !rec.dets.empty()) {
            json arr = json::array();
            for (std::size_t i = 0; i < rec.dets.size(); ++i) {
                const auto& det = rec.dets[i];
                json box;
                box["fbox"] = xywh_of(det.pair.full);
                box["vbox"] = xywh_of(det.pair.visible);
                box["score"] = det.score;
                if (i < rec.det_extras.size() && rec.det_extras[i].is_object()) {
                    for (const auto& [k, v] : rec.det_extras[i].items()) box[k] = v;
                }
                arr.push_back(std::move(box));
            }
            obj["dtboxes"] = std::move(arr);
        }
        if (rec.record_extra.is_object()) {
            for (const auto& [k, v] : rec.record_extra.items()) obj[k] = v;
        }
        out << obj.dump() << "\n";
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

std::vector<EvalImage> to_eval_images(const std::vector<ImageRecord>& gt_records,
                                      const std::vector<ImageRecord>& det_records) {
    std::vector<EvalImage> images;
    images.reserve(gt_records.size());
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& rec : gt_records) {
        if (!index.emplace(rec.image_id, images.size()).second) {
            throw std::invalid_argument("duplicate image id in annotations: " + rec.image_id);
        }
        EvalImage img;
        img.image_id = rec.image_id;
        img.gts = rec.gts;
        images.push_back(std::move(img));
    }
    std::unordered_set<std::string> det_seen;
    for (const auto& rec : det_records) {
        if (!det_seen.insert(rec.image_id).second) {
            throw std::invalid_argument("duplicate image id in detections: " + rec.image_id);
        }
        auto it = index.find(rec.image_id);
        if (it == index.end()) {
            throw std::invalid_argument("detections for unknown image: " + rec.image_id);
        }
        images[it->second].dets = rec.dets;
    }
    return images;
}

}  // namespace pairnms
