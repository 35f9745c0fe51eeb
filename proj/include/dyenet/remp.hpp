#pragma once

#include <utility>
#include <vector>

#include "dyenet/flow.hpp"
#include "dyenet/geometry.hpp"
#include "dyenet/param_store.hpp"
#include "dyenet/sequence.hpp"
#include "dyenet/tape.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// Recurrent mask propagation: extends a starting point frame by frame in both
// directions. The recurrent state h_j (d x m x m, pre-attention) lives on the
// roi grid of the current frame's propagation box; attention gates only what
// the output head sees, never what is carried forward.

struct RempConfig {
    int m = 14;                // roi resolution, shared with the reid heads
    int hidden_dim = 32;
    double theta_abort = 0.1;  // fraction of the starting mask's area
    double box_margin = 0.2;   // box dilation, fraction of the box diagonal
    bool attention = true;
};

// Parameter groups. remp.nr.*: two 3x3 convs fusing concat(h_warped, x_j)
// back to hidden_dim. remp.att.*: 1-channel conv feeding the spatial softmax.
// remp.no.*: three convs ending in a 1-channel mask logit map.
template <typename T>
void init_remp_net(ParamStore<T>& params, int feat_width, int hidden_dim, Rng& rng);

// N_R: h_j from the warped previous state and the current roi features.
template <typename T>
TensorPtr<T> recurrent_net(Tape<T>* tape, const TensorPtr<T>& h_warped, const TensorPtr<T>& x_j,
                           const ParamStore<T>& params);

// a = spatial_softmax(conv(h_warped)); h_enhanced[c] = h_current[c] * a.
template <typename T>
std::pair<TensorPtr<T>, TensorPtr<T>> attention_gate(Tape<T>* tape, const TensorPtr<T>& h_warped,
                                                     const TensorPtr<T>& h_current,
                                                     const ParamStore<T>& params);

// N_O up to the 1-channel logit map; callers sigmoid / bce as needed.
template <typename T>
TensorPtr<T> output_head_logits(Tape<T>* tape, const TensorPtr<T>& h, const ParamStore<T>& params);

template <typename T>
struct RoiStep {
    TensorPtr<T> logits;  // 1 x m x m mask logits
    TensorPtr<T> hidden;  // pre-attention h_j, carried to the next step
    double attention_sum = -1.0;
};

// The differentiable core of one propagation step, shared between inference
// and teacher-forced training: warp h_prev by the grid-unit roi flow, fuse
// with the roi features through N_R, gate, and read out the mask logits.
template <typename T>
RoiStep<T> remp_step_logits(Tape<T>* tape, const TensorPtr<T>& h_prev, const TensorPtr<T>& x_j,
                            const TensorPtr<T>& rf, const ParamStore<T>& params, bool attention);

// Dilated, frame-clipped bounding box a mask propagates through.
Box propagation_box(const Mask& mask, double margin, int frame_w, int frame_h);

struct StartingPoint {
    Mask mask;  // full-frame binary, non-empty
    int frame = 0;
    int identity = 0;
    double similarity = 0.0;
    std::vector<float> embedding;  // unit embedding of the proposal; feeds template expansion
};

struct Tracklet {
    int identity = 0;
    double similarity = 0.0;  // the origin's match similarity
    int first_frame = 0;
    std::vector<Mask> masks;  // masks[i] covers frame first_frame + i
    StartingPoint origin;

    int last_frame() const { return first_frame + static_cast<int>(masks.size()) - 1; }
    bool covers(int frame) const { return frame >= first_frame && frame <= last_frame(); }
    const Mask& mask_at(int frame) const { return masks[frame - first_frame]; }
};

struct StepResult {
    bool aborted = true;
    Mask mask;                    // full-resolution y_j
    TensorPtrF probs;             // 1 x m x m mask probabilities on box
    TensorPtrF hidden;            // pre-attention h_j, carried forward
    Box box;                      // box_j
    double attention_sum = -1.0;  // sum of a; -1 when gating is disabled
};

// Hidden state at the starting frame: roi features of the starting mask's
// box pushed through N_R with a zero prior state.
TensorPtrF init_hidden(const TensorPtrF& features, const Box& box, const ParamStore<float>& params,
                       const RempConfig& cfg);

// One propagation step into frame j. flow_rev is F_{j->prev} at frame
// resolution, flow_rev_feat its feature-resolution downsample. start_area
// anchors the abort threshold to the starting mask, not the previous frame.
StepResult propagate_step(const Mask& prev_mask, const TensorPtrF& h_prev, const Box& box_prev,
                          const TensorPtrF& features, const TensorPtrF& flow_rev,
                          const TensorPtrF& flow_rev_feat, const ParamStore<float>& params,
                          const RempConfig& cfg, double start_area);

// Forward then backward extension of a starting point. features[j-1] is the
// cached feature map of frame j; flows come from the cache on demand.
Tracklet propagate_bidirectional(const StartingPoint& start, const Sequence& seq,
                                 const std::vector<TensorPtrF>& features, FlowCache& flows,
                                 const ParamStore<float>& params, const RempConfig& cfg);

}  // namespace dyenet
