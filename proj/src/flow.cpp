#include "dyenet/flow.hpp"

#include <algorithm>
#include <cmath>

#include "dyenet/errors.hpp"
#include "dyenet/ops.hpp"

namespace dyenet {

FlowMode parse_flow_mode(const std::string& s) {
    if (s == "ground-truth") return FlowMode::GroundTruth;
    if (s == "block-match") return FlowMode::BlockMatch;
    if (s == "zero") return FlowMode::Zero;
    throw ContractViolation("flow: unknown mode '" + s + "'");
}

TensorPtrF get_flow(const Sequence& seq, int from, int to, FlowMode mode) {
    require(std::abs(from - to) == 1, "flow: only adjacent-frame flow is defined");
    require(from >= 1 && from <= seq.num_frames() && to >= 1 && to <= seq.num_frames(),
            "flow: frame index out of range");
    switch (mode) {
        case FlowMode::GroundTruth:
            if (!seq.has_flow())
                throw MissingDataError("flow: sequence '" + seq.name +
                                       "' has no stored flow files (ground-truth mode)");
            return to > from ? seq.flow_fw(from) : seq.flow_bw(from);
        case FlowMode::BlockMatch:
            return block_match_flow(seq.frame(from), seq.frame(to));
        case FlowMode::Zero:
            return make_tensor<float>(Shape{2, seq.height(), seq.width()});
    }
    throw ContractViolation("flow: unhandled mode");
}

TensorPtrF block_match_flow(const TensorPtrF& from, const TensorPtrF& to, int patch, int radius) {
    require(from->shape == to->shape && from->shape.rank == 3, "block_match: frame shape mismatch");
    const int H = from->shape[1], W = from->shape[2];
    const int half = patch / 2;
    auto flow = make_tensor<float>(Shape{2, H, W});
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double best = 1e300;
            int bdx = 0, bdy = 0;
            long bnorm = 0;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    double sad = 0.0;
                    for (int py = -half; py < patch - half; ++py) {
                        const int sy = clampi(y + py, 0, H - 1);
                        const int ty = clampi(y + dy + py, 0, H - 1);
                        for (int px = -half; px < patch - half; ++px) {
                            const int sx = clampi(x + px, 0, W - 1);
                            const int tx = clampi(x + dx + px, 0, W - 1);
                            for (int c = 0; c < 3; ++c)
                                sad += std::abs(static_cast<double>(from->at3(c, sy, sx)) -
                                                static_cast<double>(to->at3(c, ty, tx)));
                        }
                    }
                    const long norm = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy;
                    const bool better =
                        sad < best ||
                        (sad == best && (norm < bnorm || (norm == bnorm &&
                                                          (dx < bdx || (dx == bdx && dy < bdy)))));
                    if (better) {
                        best = sad;
                        bdx = dx;
                        bdy = dy;
                        bnorm = norm;
                    }
                }
            }
            flow->at3(0, y, x) = static_cast<float>(bdx);
            flow->at3(1, y, x) = static_cast<float>(bdy);
        }
    }
    return flow;
}

TensorPtrF downsample_flow8(const TensorPtrF& flow) {
    require(flow->shape.rank == 3 && flow->shape[0] == 2, "downsample_flow8: flow must be 2xHxW");
    require(flow->shape[1] % 8 == 0 && flow->shape[2] % 8 == 0,
            "downsample_flow8: dimensions must be divisible by 8");
    const int H = flow->shape[1] / 8, W = flow->shape[2] / 8;
    auto out = make_tensor<float>(Shape{2, H, W});
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int yy = 0; yy < 8; ++yy)
                    for (int xx = 0; xx < 8; ++xx)
                        acc += static_cast<double>(flow->at3(c, y * 8 + yy, x * 8 + xx));
                out->at3(c, y, x) = static_cast<float>(acc / 64.0 / 8.0);
            }
    return out;
}

TensorPtrF roi_flow(const TensorPtrF& flow_feat, const Box& box_from, const Box& box_to, int m) {
    require(flow_feat->shape.rank == 3 && flow_feat->shape[0] == 2,
            "roi_flow: flow must be 2xHxW");
    require(box_from.valid() && box_to.valid(), "roi_flow: invalid box");
    require(m >= 2, "roi_flow: roi resolution must be at least 2");
    auto out = make_tensor<float>(Shape{2, m, m});
    const double cw_to = box_to.width() / m, ch_to = box_to.height() / m;
    const double cw_from = box_from.width() / m, ch_from = box_from.height() / m;
    // cell centers of box_to expressed in feature coordinates (frame / 8),
    // matching where the hidden state actually lives
    std::vector<std::pair<double, double>> centers;
    centers.reserve(static_cast<size_t>(m) * m);
    for (int gy = 0; gy < m; ++gy)
        for (int gx = 0; gx < m; ++gx)
            centers.emplace_back((box_to.x0 + (gx + 0.5) * cw_to) / 8.0,
                                 (box_to.y0 + (gy + 0.5) * ch_to) / 8.0);
    auto sampled = ops::bilinear_sample<float>(nullptr, flow_feat, centers);
    for (int gy = 0; gy < m; ++gy)
        for (int gx = 0; gx < m; ++gx) {
            const size_t i = static_cast<size_t>(gy) * m + gx;
            // back to frame units: feature-resolution flow is scaled by 1/8
            const double sx = 8.0 * (centers[i].first + static_cast<double>(sampled->data[i]));
            const double sy = 8.0 * (centers[i].second +
                                     static_cast<double>(sampled->data[centers.size() + i]));
            // source position expressed on box_from's grid
            const double gsx = (sx - box_from.x0) / cw_from - 0.5;
            const double gsy = (sy - box_from.y0) / ch_from - 0.5;
            out->at3(0, gy, gx) = static_cast<float>(gsx - gx);
            out->at3(1, gy, gx) = static_cast<float>(gsy - gy);
        }
    return out;
}

Mask warp_mask(const Mask& mask, const TensorPtrF& flow_rev) {
    require(flow_rev->shape.rank == 3 && flow_rev->shape[0] == 2, "warp_mask: flow must be 2xHxW");
    require(flow_rev->shape[1] == mask.h && flow_rev->shape[2] == mask.w,
            "warp_mask: flow size does not match mask");
    auto m = make_tensor<float>(Shape{1, mask.h, mask.w});
    for (size_t i = 0; i < mask.v.size(); ++i) m->data[i] = mask.v[i] ? 1.0f : 0.0f;
    auto warped = ops::warp<float>(nullptr, m, flow_rev);
    Mask out(mask.h, mask.w);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = warped->data[i] > 0.5f ? 1 : 0;
    return out;
}

}  // namespace dyenet
