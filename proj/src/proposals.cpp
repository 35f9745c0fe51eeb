#include "dyenet/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "dyenet/errors.hpp"

namespace dyenet {

ProposalMode parse_proposal_mode(const std::string& s) {
    if (s == "frame-diff") return ProposalMode::FrameDiff;
    if (s == "gt-jitter") return ProposalMode::GtJitter;
    if (s == "exhaustive-grid") return ProposalMode::ExhaustiveGrid;
    throw ContractViolation("proposals: unknown mode '" + s + "'");
}

namespace {

std::vector<Box> propose_frame_diff(const TensorPtrF& frame, const TensorPtrF& prev,
                                    double threshold) {
    require(prev != nullptr, "proposals: frame-diff needs a reference frame");
    require(frame->shape == prev->shape, "proposals: frame size mismatch");
    const int H = frame->shape[1], W = frame->shape[2];
    std::vector<uint8_t> moving(static_cast<size_t>(H) * W, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            float d = 0.0f;
            for (int c = 0; c < 3; ++c)
                d = std::max(d, std::abs(frame->at3(c, y, x) - prev->at3(c, y, x)));
            moving[static_cast<size_t>(y) * W + x] = d > threshold ? 1 : 0;
        }

    // 8-connected component bounding boxes, components emitted in scan order
    std::vector<Box> out;
    std::vector<uint8_t> seen(moving.size(), 0);
    for (int sy = 0; sy < H; ++sy)
        for (int sx = 0; sx < W; ++sx) {
            const size_t si = static_cast<size_t>(sy) * W + sx;
            if (!moving[si] || seen[si]) continue;
            int xmin = sx, xmax = sx, ymin = sy, ymax = sy;
            std::queue<std::pair<int, int>> q;
            q.emplace(sx, sy);
            seen[si] = 1;
            while (!q.empty()) {
                auto [x, y] = q.front();
                q.pop();
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || nx >= W || ny < 0 || ny >= H) continue;
                        const size_t ni = static_cast<size_t>(ny) * W + nx;
                        if (moving[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            q.emplace(nx, ny);
                        }
                    }
            }
            out.push_back(Box{static_cast<double>(xmin), static_cast<double>(ymin),
                              static_cast<double>(xmax + 1), static_cast<double>(ymax + 1)});
        }
    return out;
}

std::vector<Box> propose_gt_jitter(const TensorPtrF& frame, const InstanceMap* gt, double scale,
                                   Rng& rng) {
    require(gt != nullptr, "proposals: gt-jitter requires ground-truth masks");
    const int H = frame->shape[1], W = frame->shape[2];
    std::vector<Box> out;
    for (int k = 1; k <= gt->max_id(); ++k) {
        const Mask m = gt->instance_mask(k);
        if (m.empty()) continue;
        Box b = mask_bbox(m);
        if (scale > 0.0) {
            const double bw = b.width(), bh = b.height();
            b.x0 += rng.uniform(-scale, scale) * bw;
            b.x1 += rng.uniform(-scale, scale) * bw;
            b.y0 += rng.uniform(-scale, scale) * bh;
            b.y1 += rng.uniform(-scale, scale) * bh;
        }
        b = clip_box(b, W, H);
        if (b.valid()) out.push_back(b);
    }
    return out;
}

std::vector<Box> propose_grid(const TensorPtrF& frame, const std::vector<int>& sizes, int stride) {
    require(stride >= 1, "proposals: grid stride must be positive");
    const int H = frame->shape[1], W = frame->shape[2];
    std::vector<Box> out;
    for (int s : sizes) {
        require(s >= 2, "proposals: grid size must be at least 2");
        if (s > W || s > H) continue;
        for (int y = 0; y + s <= H; y += stride)
            for (int x = 0; x + s <= W; x += stride)
                out.push_back(Box{static_cast<double>(x), static_cast<double>(y),
                                  static_cast<double>(x + s), static_cast<double>(y + s)});
    }
    return out;
}

}  // namespace

std::vector<Box> propose(const TensorPtrF& frame, const TensorPtrF& prev, const InstanceMap* gt,
                         const ProposalParams& p, Rng& rng) {
    require(frame != nullptr, "proposals: null frame");
    switch (p.mode) {
        case ProposalMode::FrameDiff:
            return propose_frame_diff(frame, prev, p.diff_threshold);
        case ProposalMode::GtJitter:
            return propose_gt_jitter(frame, gt, p.jitter_scale, rng);
        case ProposalMode::ExhaustiveGrid:
            return propose_grid(frame, p.grid_sizes, p.grid_stride);
    }
    throw ContractViolation("proposals: unhandled mode");
}

}  // namespace dyenet
