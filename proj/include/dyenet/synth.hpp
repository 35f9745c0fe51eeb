#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyenet/sequence.hpp"

namespace dyenet {

// Synthetic clip generator. Shapes are hard-edged (a pixel belongs to a shape
// iff its center lies inside — no anti-aliasing), drawn over a textured
// background, with exact ground-truth masks and flow.

enum class ShapeKind { Square, Circle };

struct ShapeSpec {
    ShapeKind kind = ShapeKind::Square;
    double cx = 0.0, cy = 0.0;  // center at frame 1, in pixel units
    double size = 8.0;          // square: side length; circle: diameter
    double vx = 0.0, vy = 0.0;  // per-frame displacement
    float color[3] = {1.0f, 1.0f, 1.0f};
    double scale_rate = 0.0;    // relative size change per frame (scale variation)
};

// During frames [from..to] the occluded shape is hidden behind the occluder:
// it is not rendered and its ground-truth mask is empty on exactly that range.
struct OcclusionEvent {
    int occluder_id = 0;
    int occluded_id = 0;
    int from = 0, to = 0;
};

struct SynthSpec {
    std::string name = "synth";
    int w = 64, h = 64, frames = 8;
    double bg_vx = 0.0, bg_vy = 0.0;  // background (camera) velocity
    int bg_period = 2;                // texture tile size; 0 = aperiodic hash
    uint64_t seed = 1;
    std::vector<ShapeSpec> shapes;    // ids 1..K in order; later = on top
    std::vector<OcclusionEvent> occlusions;
};

// Ground-truth flow construction: for the adjacent pair (a, b) the field
// F_{a->b} carries (b-a) * shape velocity on the union of the shape's visible
// supports in frames a and b (higher ids win overlaps) and (b-a) * background
// velocity elsewhere. For pure integer translations whose background period
// divides every velocity this warps frames pixel-exactly, including the
// disocclusion band: a pixel p in support(a) \ support(b) maps to p - v,
// which by construction lies outside support(a).
Sequence gen_synthetic(const SynthSpec& spec);

}  // namespace dyenet
