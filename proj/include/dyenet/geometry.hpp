#pragma once

#include <string>
#include <vector>

#include "dyenet/tensor.hpp"

namespace dyenet {

// Axis-aligned box in frame pixel coordinates, x0 < x1 and y0 < y1.
struct Box {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool valid() const { return x0 < x1 && y0 < y1; }
    std::string str() const;
};

double box_iou(const Box& a, const Box& b);

// Clips to [0,w]x[0,h]; may produce an invalid (degenerate) box.
Box clip_box(const Box& b, int w, int h);

// Expands every side by margin * diagonal, then clips to the frame.
Box dilate_box(const Box& b, double margin, int w, int h);

// Binary full-frame mask, one byte per pixel (0 or 1).
struct Mask {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    Mask() = default;
    Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}

    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    long area() const;
    bool empty() const { return area() == 0; }
    bool operator==(const Mask& o) const { return h == o.h && w == o.w && v == o.v; }
};

double mask_iou(const Mask& a, const Mask& b);  // both empty -> 1.0

// Tight bounding box of the set pixels: [x, x+1) per pixel. Empty mask
// yields an invalid box.
Box mask_bbox(const Mask& m);

// Shared paste-back rule: resample an m x m probability map into `box` at
// full frame resolution and threshold at 0.5. A frame pixel (px, py)
// participates when its center (px+0.5, py+0.5) lies inside the box; the map
// is sampled at grid coords gx = ((px+0.5) - x0)/bw * m - 0.5 with
// edge-clamped bilinear interpolation.
Mask paste_mask(const TensorF& probs, const Box& box, int frame_w, int frame_h);

// Inverse direction for training targets: each of the m x m cells of `box`
// receives the exact fraction of its area covered by mask pixels (pixel
// (x, y) covers [x, x+1) x [y, y+1); outside the frame counts as
// background), so boundary cells get fractional values in (0, 1).
TensorPtrF roi_rasterize(const Mask& mask, const Box& box, int m);

// Instance-id map: 0 = background, ids 1..K.
struct InstanceMap {
    int h = 0, w = 0;
    std::vector<int> id;

    InstanceMap() = default;
    InstanceMap(int h_, int w_) : h(h_), w(w_), id(static_cast<size_t>(h_) * w_, 0) {}

    int& at(int y, int x) { return id[static_cast<size_t>(y) * w + x]; }
    int at(int y, int x) const { return id[static_cast<size_t>(y) * w + x]; }
    int max_id() const;
    Mask instance_mask(int k) const;
    bool operator==(const InstanceMap& o) const { return h == o.h && w == o.w && id == o.id; }
};

}  // namespace dyenet
