#pragma once

#include <vector>

#include "dyenet/geometry.hpp"
#include "dyenet/rng.hpp"
#include "dyenet/sequence.hpp"

namespace dyenet {

enum class ProposalMode { FrameDiff, GtJitter, ExhaustiveGrid };

ProposalMode parse_proposal_mode(const std::string& s);

struct ProposalParams {
    ProposalMode mode = ProposalMode::FrameDiff;
    double diff_threshold = 0.05;   // frame-diff: per-pixel change threshold
    double jitter_scale = 0.1;      // gt-jitter: relative noise amplitude
    std::vector<int> grid_sizes = {16, 32};
    int grid_stride = 16;
};

// Candidate boxes for one frame, the RPN stand-in.
//  - frame-diff: bounding boxes of 8-connected components where the
//    channel-max absolute difference to prev exceeds the threshold
//  - gt-jitter: ground-truth instance boxes with relative offset/scale noise
//    (rng is consumed only in this mode)
//  - exhaustive-grid: square anchors of each size tiling the frame at the
//    configured stride
std::vector<Box> propose(const TensorPtrF& frame, const TensorPtrF& prev,
                         const InstanceMap* gt, const ProposalParams& p, Rng& rng);

}  // namespace dyenet
