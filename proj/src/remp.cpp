#include "dyenet/remp.hpp"

#include <cmath>

#include "dyenet/ops.hpp"
#include "dyenet/reid.hpp"

namespace dyenet {

template <typename T>
void init_remp_net(ParamStore<T>& params, int feat_width, int hidden_dim, Rng& rng) {
    require(feat_width >= 1 && hidden_dim >= 1, "init_remp_net: bad widths");
    params.add_kaiming("remp.nr.conv1.w", Shape{hidden_dim, hidden_dim + feat_width, 3, 3}, rng);
    params.add("remp.nr.conv1.b", Shape{hidden_dim});
    params.add_kaiming("remp.nr.conv2.w", Shape{hidden_dim, hidden_dim, 3, 3}, rng);
    params.add("remp.nr.conv2.b", Shape{hidden_dim});
    params.add_kaiming("remp.att.conv.w", Shape{1, hidden_dim, 3, 3}, rng);
    params.add("remp.att.conv.b", Shape{1});
    params.add_kaiming("remp.no.conv1.w", Shape{hidden_dim, hidden_dim, 3, 3}, rng);
    params.add("remp.no.conv1.b", Shape{hidden_dim});
    params.add_kaiming("remp.no.conv2.w", Shape{hidden_dim, hidden_dim, 3, 3}, rng);
    params.add("remp.no.conv2.b", Shape{hidden_dim});
    params.add_kaiming("remp.no.conv3.w", Shape{1, hidden_dim, 3, 3}, rng);
    params.add("remp.no.conv3.b", Shape{1});
}

template <typename T>
TensorPtr<T> recurrent_net(Tape<T>* tape, const TensorPtr<T>& h_warped, const TensorPtr<T>& x_j,
                           const ParamStore<T>& params) {
    auto fused = ops::concat_channels(tape, h_warped, x_j);
    auto h = ops::conv2d(tape, fused, params.at("remp.nr.conv1.w"), params.at("remp.nr.conv1.b"),
                         1, 1, 1);
    h = ops::relu(tape, h);
    h = ops::conv2d(tape, h, params.at("remp.nr.conv2.w"), params.at("remp.nr.conv2.b"), 1, 1, 1);
    return ops::relu(tape, h);
}

template <typename T>
std::pair<TensorPtr<T>, TensorPtr<T>> attention_gate(Tape<T>* tape, const TensorPtr<T>& h_warped,
                                                     const TensorPtr<T>& h_current,
                                                     const ParamStore<T>& params) {
    require(h_warped->shape == h_current->shape, "attention_gate: spatial size mismatch");
    auto logits = ops::conv2d(tape, h_warped, params.at("remp.att.conv.w"),
                              params.at("remp.att.conv.b"), 1, 1, 1);
    auto a = ops::spatial_softmax(tape, logits);
    auto enhanced = ops::channel_scale(tape, h_current, a);
    return {a, enhanced};
}

template <typename T>
TensorPtr<T> output_head_logits(Tape<T>* tape, const TensorPtr<T>& h,
                                const ParamStore<T>& params) {
    auto o = ops::conv2d(tape, h, params.at("remp.no.conv1.w"), params.at("remp.no.conv1.b"), 1, 1,
                         1);
    o = ops::relu(tape, o);
    o = ops::conv2d(tape, o, params.at("remp.no.conv2.w"), params.at("remp.no.conv2.b"), 1, 1, 1);
    o = ops::relu(tape, o);
    return ops::conv2d(tape, o, params.at("remp.no.conv3.w"), params.at("remp.no.conv3.b"), 1, 1,
                       1);
}

template <typename T>
RoiStep<T> remp_step_logits(Tape<T>* tape, const TensorPtr<T>& h_prev, const TensorPtr<T>& x_j,
                            const TensorPtr<T>& rf, const ParamStore<T>& params, bool attention) {
    RoiStep<T> rs;
    auto h_warped = ops::warp(tape, h_prev, rf);
    rs.hidden = recurrent_net(tape, h_warped, x_j, params);
    TensorPtr<T> gated = rs.hidden;
    if (attention) {
        auto [a, enhanced] = attention_gate(tape, h_warped, rs.hidden, params);
        double sum = 0.0;
        for (T v : a->data) sum += static_cast<double>(v);
        rs.attention_sum = sum;
        gated = enhanced;
    }
    rs.logits = output_head_logits(tape, gated, params);
    return rs;
}

Box propagation_box(const Mask& mask, double margin, int frame_w, int frame_h) {
    require(!mask.empty(), "propagation_box: empty mask");
    return dilate_box(mask_bbox(mask), margin, frame_w, frame_h);
}

TensorPtrF init_hidden(const TensorPtrF& features, const Box& box, const ParamStore<float>& params,
                       const RempConfig& cfg) {
    auto x = roi_align<float>(nullptr, features, box, cfg.m);
    auto zero_state = make_tensor<float>(Shape{cfg.hidden_dim, cfg.m, cfg.m});
    return recurrent_net<float>(nullptr, zero_state, x, params);
}

StepResult propagate_step(const Mask& prev_mask, const TensorPtrF& h_prev, const Box& box_prev,
                          const TensorPtrF& features, const TensorPtrF& flow_rev,
                          const TensorPtrF& flow_rev_feat, const ParamStore<float>& params,
                          const RempConfig& cfg, double start_area) {
    require(!prev_mask.empty(), "propagate_step: previous mask is empty");
    require(start_area > 0.0, "propagate_step: non-positive starting area");

    StepResult res;
    Mask warped = warp_mask(prev_mask, flow_rev);
    if (warped.empty()) return res;
    if (static_cast<double>(warped.area()) < cfg.theta_abort * start_area) return res;

    res.box = propagation_box(warped, cfg.box_margin, prev_mask.w, prev_mask.h);
    auto x_j = roi_align<float>(nullptr, features, res.box, cfg.m);
    auto rf = roi_flow(flow_rev_feat, box_prev, res.box, cfg.m);
    auto rs = remp_step_logits<float>(nullptr, h_prev, x_j, rf, params, cfg.attention);
    res.hidden = rs.hidden;
    res.attention_sum = rs.attention_sum;
    res.probs = ops::sigmoid<float>(nullptr, rs.logits);
    res.mask = paste_mask(*res.probs, res.box, prev_mask.w, prev_mask.h);
    // an all-below-threshold paste leaves nothing to carry: treat like the
    // too-small abort rather than storing an empty tracklet mask
    if (res.mask.empty()) return res;
    res.aborted = false;
    return res;
}

Tracklet propagate_bidirectional(const StartingPoint& start, const Sequence& seq,
                                 const std::vector<TensorPtrF>& features, FlowCache& flows,
                                 const ParamStore<float>& params, const RempConfig& cfg) {
    const int n = seq.num_frames();
    require(start.frame >= 1 && start.frame <= n, "propagate_bidirectional: frame out of range");
    require(!start.mask.empty(), "propagate_bidirectional: empty starting mask");
    require(static_cast<int>(features.size()) == n,
            "propagate_bidirectional: one feature map per frame expected");

    const double start_area = static_cast<double>(start.mask.area());
    const Box start_box =
        propagation_box(start.mask, cfg.box_margin, start.mask.w, start.mask.h);
    auto h0 = init_hidden(features[start.frame - 1], start_box, params, cfg);

    std::vector<Mask> fwd, bwd;
    auto extend = [&](int dir, std::vector<Mask>& out) {
        Mask prev_mask = start.mask;
        TensorPtrF h = h0;
        Box box = start_box;
        for (int j = start.frame + dir; j >= 1 && j <= n; j += dir) {
            // warping into frame j samples with the reverse field F_{j->prev}
            auto sr = propagate_step(prev_mask, h, box, features[j - 1],
                                     flows.full(j, j - dir), flows.feat(j, j - dir), params, cfg,
                                     start_area);
            if (sr.aborted) break;
            out.push_back(sr.mask);
            prev_mask = std::move(sr.mask);
            h = sr.hidden;
            box = sr.box;
        }
    };
    extend(+1, fwd);
    extend(-1, bwd);

    Tracklet t;
    t.identity = start.identity;
    t.similarity = start.similarity;
    t.origin = start;
    t.first_frame = start.frame - static_cast<int>(bwd.size());
    t.masks.reserve(bwd.size() + 1 + fwd.size());
    for (auto it = bwd.rbegin(); it != bwd.rend(); ++it) t.masks.push_back(*it);
    t.masks.push_back(start.mask);
    for (auto& m : fwd) t.masks.push_back(m);
    return t;
}

template void init_remp_net<float>(ParamStore<float>&, int, int, Rng&);
template void init_remp_net<double>(ParamStore<double>&, int, int, Rng&);
template TensorPtr<float> recurrent_net<float>(Tape<float>*, const TensorPtr<float>&,
                                               const TensorPtr<float>&, const ParamStore<float>&);
template TensorPtr<double> recurrent_net<double>(Tape<double>*, const TensorPtr<double>&,
                                                 const TensorPtr<double>&,
                                                 const ParamStore<double>&);
template std::pair<TensorPtr<float>, TensorPtr<float>> attention_gate<float>(
    Tape<float>*, const TensorPtr<float>&, const TensorPtr<float>&, const ParamStore<float>&);
template std::pair<TensorPtr<double>, TensorPtr<double>> attention_gate<double>(
    Tape<double>*, const TensorPtr<double>&, const TensorPtr<double>&, const ParamStore<double>&);
template TensorPtr<float> output_head_logits<float>(Tape<float>*, const TensorPtr<float>&,
                                                    const ParamStore<float>&);
template TensorPtr<double> output_head_logits<double>(Tape<double>*, const TensorPtr<double>&,
                                                      const ParamStore<double>&);
template RoiStep<float> remp_step_logits<float>(Tape<float>*, const TensorPtr<float>&,
                                                const TensorPtr<float>&, const TensorPtr<float>&,
                                                const ParamStore<float>&, bool);
template RoiStep<double> remp_step_logits<double>(Tape<double>*, const TensorPtr<double>&,
                                                  const TensorPtr<double>&,
                                                  const TensorPtr<double>&,
                                                  const ParamStore<double>&, bool);

}  // namespace dyenet
