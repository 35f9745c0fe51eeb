#pragma once

#include <string>
#include <vector>

#include "dyenet/geometry.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// A loaded video: frames (3xHxW in [0,1]), optional instance-id ground truth,
// optional dense flow in both directions. Frame numbering is 1-based
// throughout to match the file naming (frames/%05d.ppm starts at 00001).
//
// Flow storage convention: flow_fw[j] = F_{j -> j+1} exists for j = 1..N-1
// and lives on frame j's pixel grid; flow_bw[j] = F_{j -> j-1} exists for
// j = 2..N and lives on frame j's grid. Files are flow/%05d_fw.dyfl with
// %05d = j, and likewise _bw.
struct Sequence {
    std::string name;
    int orig_h = 0, orig_w = 0;  // size before padding (for metric cropping)
    std::vector<TensorPtrF> frames;       // index 0 <-> frame 1
    std::vector<InstanceMap> gt;          // empty when no masks on disk
    std::vector<TensorPtrF> flow_fw_;     // index 0 <-> frame 1 (F_{1->2})
    std::vector<TensorPtrF> flow_bw_;     // index 0 <-> frame 2 (F_{2->1})

    int num_frames() const { return static_cast<int>(frames.size()); }
    int height() const { return frames.empty() ? 0 : frames[0]->shape[1]; }
    int width() const { return frames.empty() ? 0 : frames[0]->shape[2]; }
    bool has_gt() const { return !gt.empty(); }
    bool has_flow() const { return !flow_fw_.empty(); }

    const TensorPtrF& frame(int j) const;          // j in 1..N
    const InstanceMap& gt_at(int j) const;
    const TensorPtrF& flow_fw(int j) const;        // F_{j->j+1}, j in 1..N-1
    const TensorPtrF& flow_bw(int j) const;        // F_{j->j-1}, j in 2..N

    // Union of instance ids over all ground-truth frames; contiguity 1..K is
    // validated at load/generation time.
    int num_identities() const;
};

Sequence load_sequence(const std::string& dir);
void save_sequence(const Sequence& seq, const std::string& dir);

// Pads frames (zeros), masks (background), and flow (zeros) on the
// right/bottom so both dimensions become multiples of 8. orig_* keep the
// pre-pad size. No-op when already aligned.
void pad_sequence_to_multiple8(Sequence& seq);

// Throws naming the first gap when the id union is not {1..K}.
void validate_contiguous_ids(const Sequence& seq);

}  // namespace dyenet
