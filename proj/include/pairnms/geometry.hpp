#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace pairnms {

/// Axis-aligned box in image pixel coordinates, corner form.
/// Degenerate boxes (x1 == x2 or y1 == y2) are legal and have area zero.
/// Construction rejects non-finite coordinates and inverted corners.
struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    BBox() = default;
    BBox(double x1, double y1, double x2, double y2);

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// A full-body box and the visible part of the same object, bound together.
/// The visible box is not required to lie inside the full box; predicted
/// boxes may leak outside each other.
struct PairedBox {
    BBox full;
    BBox visible;

    friend bool operator==(const PairedBox&, const PairedBox&) = default;
};

/// Binary occupancy grid over a full box, row-major, values 0 or 1.
struct AttentionMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> cells;

    std::uint8_t at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

double area(const BBox& b);

/// Axis-aligned intersection; nullopt when the boxes are disjoint.
/// Boxes touching along an edge intersect in a degenerate (area-0) box.
std::optional<BBox> intersection(const BBox& a, const BBox& b);

/// Intersection over union. 0 when the union has zero area.
double iou(const BBox& a, const BBox& b);

/// Intersection over the area of the second box ("foreground" box).
/// Asymmetric: iof(a, v) = area(a ∩ v) / area(v). 0 when v is degenerate.
double iof(const BBox& a, const BBox& v);

/// Partition the full box into rows x cols cells; a cell is 1 iff its
/// center lies inside the visible box (closed boundaries). Throws
/// std::invalid_argument for a degenerate full box or non-positive
/// resolution.
AttentionMask attention_mask(const PairedBox& p, int rows = 7, int cols = 7);

}  // namespace pairnms
