#pragma once

#include <map>
#include <string>
#include <utility>

#include "dyenet/geometry.hpp"
#include "dyenet/sequence.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

enum class FlowMode { GroundTruth, BlockMatch, Zero };

FlowMode parse_flow_mode(const std::string& s);

// F_{from->to} for adjacent frames, on the from-frame grid. ground-truth
// reads the flow stored with the sequence; block-match computes integer
// displacements; zero returns an all-zero field.
TensorPtrF get_flow(const Sequence& seq, int from, int to, FlowMode mode);

// Integer-displacement block matching: patch 8, search radius 8, SAD over
// all three channels with border clamping. Ties prefer the smallest
// displacement norm, then lexicographic (dx, dy).
TensorPtrF block_match_flow(const TensorPtrF& from, const TensorPtrF& to, int patch = 8,
                            int radius = 8);

// Area-mean 8x8 downsampling with values scaled by 1/8, for warping
// feature-resolution maps.
TensorPtrF downsample_flow8(const TensorPtrF& flow);

// Re-expresses feature-resolution reverse flow (downsample_flow8 of the frame
// flow) as a displacement field on the m x m roi grid: for each cell center
// of box_to, follow the flow to its source point, convert into box_from grid
// coordinates, and store the offset from the cell's own grid position.
// warp(h_prev, roi_flow(...)) then moves a hidden state living on box_from's
// grid onto box_to's grid.
TensorPtrF roi_flow(const TensorPtrF& flow_feat, const Box& box_from, const Box& box_to, int m);

// Backward-warps a binary mask by the reverse flow and rethresholds at 0.5.
Mask warp_mask(const Mask& mask, const TensorPtrF& flow_rev);

// Memoizes get_flow and its feature-resolution downsample per (from, to);
// one cache serves one sequence and one mode.
class FlowCache {
public:
    FlowCache(const Sequence& seq, FlowMode mode) : seq_(&seq), mode_(mode) {}

    const TensorPtrF& full(int from, int to) {
        auto key = std::make_pair(from, to);
        auto it = full_.find(key);
        if (it == full_.end()) it = full_.emplace(key, get_flow(*seq_, from, to, mode_)).first;
        return it->second;
    }

    const TensorPtrF& feat(int from, int to) {
        auto key = std::make_pair(from, to);
        auto it = feat_.find(key);
        if (it == feat_.end()) it = feat_.emplace(key, downsample_flow8(full(from, to))).first;
        return it->second;
    }

private:
    const Sequence* seq_;
    FlowMode mode_;
    std::map<std::pair<int, int>, TensorPtrF> full_, feat_;
};

}  // namespace dyenet
