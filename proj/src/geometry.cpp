#include "pairnms/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pairnms {

BBox::BBox(double x1_, double y1_, double x2_, double y2_) : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
    if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2))) {
        throw std::invalid_argument("BBox: coordinates must be finite");
    }
    if (x2 < x1 || y2 < y1) {
        throw std::invalid_argument("BBox: corners out of order (x1 <= x2, y1 <= y2 required)");
    }
}

double area(const BBox& b) {
    return (b.x2 - b.x1) * (b.y2 - b.y1);
}

std::optional<BBox> intersection(const BBox& a, const BBox& b) {
    const double ix1 = std::max(a.x1, b.x1);
    const double iy1 = std::max(a.y1, b.y1);
    const double ix2 = std::min(a.x2, b.x2);
    const double iy2 = std::min(a.y2, b.y2);
    if (ix2 < ix1 || iy2 < iy1) {
        return std::nullopt;
    }
    return BBox(ix1, iy1, ix2, iy2);
}

double iou(const BBox& a, const BBox& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    const double inter = iw * ih;
    const double uni = area(a) + area(b) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double iof(const BBox& a, const BBox& v) {
    const double denom = area(v);
    if (denom <= 0.0) {
        return 0.0;
    }
    const double iw = std::min(a.x2, v.x2) - std::max(a.x1, v.x1);
    const double ih = std::min(a.y2, v.y2) - std::max(a.y1, v.y1);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    return iw * ih / denom;
}

AttentionMask attention_mask(const PairedBox& p, int rows, int cols) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("attention_mask: resolution must be at least 1x1");
    }
    if (p.full.width() <= 0.0 || p.full.height() <= 0.0) {
        throw std::invalid_argument("attention_mask: full box is degenerate, no grid definable");
    }
    AttentionMask m;
    m.rows = rows;
    m.cols = cols;
    m.cells.resize(static_cast<std::size_t>(rows) * cols, 0);
    const double cw = p.full.width() / cols;
    const double ch = p.full.height() / rows;
    const BBox& v = p.visible;
    for (int r = 0; r < rows; ++r) {
        const double cy = p.full.y1 + (r + 0.5) * ch;
        for (int c = 0; c < cols; ++c) {
            const double cx = p.full.x1 + (c + 0.5) * cw;
            const bool inside = v.x1 <= cx && cx <= v.x2 && v.y1 <= cy && cy <= v.y2;
            m.cells[static_cast<std::size_t>(r) * cols + c] = inside ? 1 : 0;
        }
    }
    return m;
}

}  // namespace pairnms
