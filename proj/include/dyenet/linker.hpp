#pragma once

#include <map>
#include <vector>

#include "dyenet/geometry.hpp"
#include "dyenet/reid.hpp"
#include "dyenet/remp.hpp"

namespace dyenet {

// Per-identity mask tube assembled from non-contradicting tracklets. Frames
// not covered by any contributing tracklet are simply absent.
struct MaskTube {
    int identity = 0;
    std::map<int, Mask> masks;   // frame -> winning mask
    std::vector<int> tracklets;  // indices into the link_tracklets input

    bool covers(int frame) const { return masks.count(frame) > 0; }
    const Mask& mask_at(int frame) const { return masks.at(frame); }
};

// Sorts starting points by similarity descending (ties: lower frame, then
// lower identity) and drops any whose mask overlaps a same-frame mask of an
// existing tracklet with IoU >= theta_skip.
std::vector<StartingPoint> dedup_starting_points(std::vector<StartingPoint> starts,
                                                 const std::vector<Tracklet>& existing,
                                                 double theta_skip);

// Greedy linking: tracklets are visited by similarity descending (ties: lower
// first frame, then lower identity, then input order); the first per identity
// seeds that identity's tube, later ones merge iff every frame shared with
// the tube agrees with IoU >= theta_agree. Visiting order makes the tube's
// mask on a shared frame the higher-similarity one. Unmergeable tracklets are
// discarded. Tubes are returned ordered by identity.
std::vector<MaskTube> link_tracklets(const std::vector<Tracklet>& tracklets,
                                     const TemplateSet& templates, double theta_agree);

}  // namespace dyenet
