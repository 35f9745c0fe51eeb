#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "dyenet/tape.hpp"
#include "dyenet/tensor.hpp"

// Differentiable kernels. Conventions shared by all ops:
//  - inputs/outputs are TensorPtr; a non-null tape records the backward pass
//  - reductions accumulate in double regardless of the scalar type
//  - backward closures skip work when the output was never given a gradient
//  - gradients accumulate (+=) so a tensor may feed several consumers

namespace dyenet {
namespace ops {

namespace detail {

// Corner weights for zero-padded bilinear interpolation at (x, y).
// Out-of-range corners get weight but are masked by the in-bounds flags.
struct BilinearCorners {
    int x0, y0;
    double w00, w01, w10, w11;  // (y,x): 00=(y0,x0) 01=(y0,x1) 10=(y1,x0) 11=(y1,x1)
    bool i00, i01, i10, i11;
};

inline BilinearCorners bilinear_corners(double x, double y, int w, int h) {
    BilinearCorners c;
    double fx = std::floor(x);
    double fy = std::floor(y);
    c.x0 = static_cast<int>(fx);
    c.y0 = static_cast<int>(fy);
    double ax = x - fx;
    double ay = y - fy;
    c.w00 = (1.0 - ay) * (1.0 - ax);
    c.w01 = (1.0 - ay) * ax;
    c.w10 = ay * (1.0 - ax);
    c.w11 = ay * ax;
    auto in = [&](int xx, int yy) { return xx >= 0 && xx < w && yy >= 0 && yy < h; };
    c.i00 = in(c.x0, c.y0);
    c.i01 = in(c.x0 + 1, c.y0);
    c.i10 = in(c.x0, c.y0 + 1);
    c.i11 = in(c.x0 + 1, c.y0 + 1);
    return c;
}

template <typename T>
double bilinear_fetch(const T* plane, int w, const BilinearCorners& c) {
    double v = 0.0;
    if (c.i00) v += c.w00 * static_cast<double>(plane[c.y0 * w + c.x0]);
    if (c.i01) v += c.w01 * static_cast<double>(plane[c.y0 * w + c.x0 + 1]);
    if (c.i10) v += c.w10 * static_cast<double>(plane[(c.y0 + 1) * w + c.x0]);
    if (c.i11) v += c.w11 * static_cast<double>(plane[(c.y0 + 1) * w + c.x0 + 1]);
    return v;
}

template <typename T>
void bilinear_scatter(T* gplane, int w, const BilinearCorners& c, double g) {
    if (c.i00) gplane[c.y0 * w + c.x0] += static_cast<T>(c.w00 * g);
    if (c.i01) gplane[c.y0 * w + c.x0 + 1] += static_cast<T>(c.w01 * g);
    if (c.i10) gplane[(c.y0 + 1) * w + c.x0] += static_cast<T>(c.w10 * g);
    if (c.i11) gplane[(c.y0 + 1) * w + c.x0 + 1] += static_cast<T>(c.w11 * g);
}

template <typename T>
void flush_grad(Tensor<T>& t, const std::vector<double>& acc) {
    t.ensure_grad();
    for (size_t i = 0; i < acc.size(); ++i) t.grad[i] += static_cast<T>(acc[i]);
}

}  // namespace detail

// Cross-correlation with stride/dilation/zero-padding. input CxHxW,
// weights OxCxKxK (K odd), bias O. Output OxH'xW' with
// H' = floor((H + 2p - d(K-1) - 1)/s) + 1.
template <typename T>
TensorPtr<T> conv2d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weights,
                    const TensorPtr<T>& bias, int stride, int dilation, int padding) {
    require(input->shape.rank == 3, "conv2d: input must be CxHxW");
    require(weights->shape.rank == 4, "conv2d: weights must be OxCxKxK");
    const int C = input->shape[0], H = input->shape[1], W = input->shape[2];
    const int O = weights->shape[0], K = weights->shape[2];
    require(weights->shape[1] == C, "conv2d: input channels " + std::to_string(C) +
                                        " do not match weight channels " +
                                        std::to_string(weights->shape[1]));
    require(weights->shape[3] == K && (K % 2) == 1, "conv2d: kernel must be square with odd size");
    require(bias->numel() == O, "conv2d: bias size mismatch");
    require(stride >= 1 && dilation >= 1 && padding >= 0, "conv2d: invalid stride/dilation/padding");

    const int Ho = (H + 2 * padding - dilation * (K - 1) - 1) / stride + 1;
    const int Wo = (W + 2 * padding - dilation * (K - 1) - 1) / stride + 1;
    require(Ho > 0 && Wo > 0, "conv2d: empty output for input " + input->shape.str());

    auto out = make_tensor<T>(Shape{O, Ho, Wo});
    const T* in = input->data.data();
    const T* wt = weights->data.data();
    for (int o = 0; o < O; ++o) {
        T* op = out->plane(o);
        const T* wo = wt + static_cast<size_t>(o) * C * K * K;
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = static_cast<double>(bias->data[o]);
                for (int c = 0; c < C; ++c) {
                    const T* ip = in + static_cast<size_t>(c) * H * W;
                    const T* wc = wo + static_cast<size_t>(c) * K * K;
                    for (int ky = 0; ky < K; ++ky) {
                        const int iy = oy * stride - padding + ky * dilation;
                        if (iy < 0 || iy >= H) continue;
                        const T* irow = ip + static_cast<size_t>(iy) * W;
                        const T* wrow = wc + static_cast<size_t>(ky) * K;
                        for (int kx = 0; kx < K; ++kx) {
                            const int ix = ox * stride - padding + kx * dilation;
                            if (ix < 0 || ix >= W) continue;
                            acc += static_cast<double>(irow[ix]) * static_cast<double>(wrow[kx]);
                        }
                    }
                }
                op[oy * Wo + ox] = static_cast<T>(acc);
            }
        }
    }

    if (tape) {
        tape->record([input, weights, bias, out, stride, dilation, padding]() {
            if (!out->has_grad()) return;
            const int C = input->shape[0], H = input->shape[1], W = input->shape[2];
            const int O = weights->shape[0], K = weights->shape[2];
            const int Ho = out->shape[1], Wo = out->shape[2];
            std::vector<double> gin(input->data.size(), 0.0);
            std::vector<double> gw(weights->data.size(), 0.0);
            std::vector<double> gb(static_cast<size_t>(O), 0.0);
            for (int o = 0; o < O; ++o) {
                const T* gop = out->grad.data() + static_cast<size_t>(o) * Ho * Wo;
                const T* wo = weights->data.data() + static_cast<size_t>(o) * C * K * K;
                double* gwo = gw.data() + static_cast<size_t>(o) * C * K * K;
                for (int oy = 0; oy < Ho; ++oy) {
                    for (int ox = 0; ox < Wo; ++ox) {
                        const double g = static_cast<double>(gop[oy * Wo + ox]);
                        if (g == 0.0) continue;
                        gb[o] += g;
                        for (int c = 0; c < C; ++c) {
                            const T* ip = input->data.data() + static_cast<size_t>(c) * H * W;
                            double* gip = gin.data() + static_cast<size_t>(c) * H * W;
                            const T* wc = wo + static_cast<size_t>(c) * K * K;
                            double* gwc = gwo + static_cast<size_t>(c) * K * K;
                            for (int ky = 0; ky < K; ++ky) {
                                const int iy = oy * stride - padding + ky * dilation;
                                if (iy < 0 || iy >= H) continue;
                                for (int kx = 0; kx < K; ++kx) {
                                    const int ix = ox * stride - padding + kx * dilation;
                                    if (ix < 0 || ix >= W) continue;
                                    gwc[ky * K + kx] += g * static_cast<double>(ip[iy * W + ix]);
                                    gip[iy * W + ix] += g * static_cast<double>(wc[ky * K + kx]);
                                }
                            }
                        }
                    }
                }
            }
            detail::flush_grad(*input, gin);
            detail::flush_grad(*weights, gw);
            detail::flush_grad(*bias, gb);
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> relu(Tape<T>* tape, const TensorPtr<T>& x) {
    auto out = make_tensor<T>(x->shape);
    for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
    if (tape) {
        tape->record([x, out]() {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (size_t i = 0; i < x->data.size(); ++i)
                if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>* tape, const TensorPtr<T>& x) {
    auto out = make_tensor<T>(x->shape);
    for (size_t i = 0; i < x->data.size(); ++i) {
        const double z = static_cast<double>(x->data[i]);
        const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                  : std::exp(z) / (1.0 + std::exp(z));
        out->data[i] = static_cast<T>(s);
    }
    if (tape) {
        tape->record([x, out]() {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (size_t i = 0; i < x->data.size(); ++i) {
                const double s = static_cast<double>(out->data[i]);
                x->grad[i] += static_cast<T>(static_cast<double>(out->grad[i]) * s * (1.0 - s));
            }
        });
    }
    return out;
}

// Softmax over all spatial positions of a 1xMxN map; entries are positive
// and sum to 1.
template <typename T>
TensorPtr<T> spatial_softmax(Tape<T>* tape, const TensorPtr<T>& logits) {
    require(logits->shape.rank == 3 && logits->shape[0] == 1,
            "spatial_softmax: logits must be 1xHxW");
    auto out = make_tensor<T>(logits->shape);
    const size_t n = logits->data.size();
    double mx = -1e300;
    for (size_t i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(logits->data[i]));
    double sum = 0.0;
    std::vector<double> e(n);
    for (size_t i = 0; i < n; ++i) {
        e[i] = std::exp(static_cast<double>(logits->data[i]) - mx);
        sum += e[i];
    }
    for (size_t i = 0; i < n; ++i) out->data[i] = static_cast<T>(e[i] / sum);

    if (tape) {
        tape->record([logits, out]() {
            if (!out->has_grad()) return;
            logits->ensure_grad();
            const size_t n = out->data.size();
            double dot = 0.0;
            for (size_t i = 0; i < n; ++i)
                dot += static_cast<double>(out->data[i]) * static_cast<double>(out->grad[i]);
            for (size_t i = 0; i < n; ++i) {
                const double a = static_cast<double>(out->data[i]);
                logits->grad[i] += static_cast<T>(a * (static_cast<double>(out->grad[i]) - dot));
            }
        });
    }
    return out;
}

// Samples map (CxHxW) at arbitrary continuous points, zero outside
// [0,W-1]x[0,H-1]. Output Cx|points|. Differentiable w.r.t. map values.
template <typename T>
TensorPtr<T> bilinear_sample(Tape<T>* tape, const TensorPtr<T>& map,
                             const std::vector<std::pair<double, double>>& points) {
    require(map->shape.rank == 3, "bilinear_sample: map must be CxHxW");
    const int C = map->shape[0], H = map->shape[1], W = map->shape[2];
    const int P = static_cast<int>(points.size());
    require(P > 0, "bilinear_sample: empty point list");

    std::vector<detail::BilinearCorners> corners(P);
    for (int p = 0; p < P; ++p)
        corners[p] = detail::bilinear_corners(points[p].first, points[p].second, W, H);

    auto out = make_tensor<T>(Shape{C, P});
    for (int c = 0; c < C; ++c) {
        const T* plane = map->plane(c);
        for (int p = 0; p < P; ++p)
            out->data[static_cast<size_t>(c) * P + p] =
                static_cast<T>(detail::bilinear_fetch(plane, W, corners[p]));
    }

    if (tape) {
        tape->record([map, out, corners, C, P, W, H]() {
            (void)H;
            if (!out->has_grad()) return;
            std::vector<double> gmap(map->data.size(), 0.0);
            for (int c = 0; c < C; ++c) {
                double* gplane = gmap.data() + static_cast<size_t>(c) * map->shape[1] * map->shape[2];
                for (int p = 0; p < P; ++p) {
                    const double g = static_cast<double>(out->grad[static_cast<size_t>(c) * P + p]);
                    if (g == 0.0) continue;
                    detail::bilinear_scatter(gplane, W, corners[p], g);
                }
            }
            detail::flush_grad(*map, gmap);
        });
    }
    return out;
}

// Backward warping: out(p) = bilinear(map, p + flow(p)). The flow carries the
// displacement toward the source frame and is treated as a constant; gradients
// flow to the map only. Shapes: map CxHxW, flow 2xHxW (dx, dy planes).
template <typename T>
TensorPtr<T> warp(Tape<T>* tape, const TensorPtr<T>& map, const TensorPtr<T>& flow) {
    require(map->shape.rank == 3, "warp: map must be CxHxW");
    require(flow->shape.rank == 3 && flow->shape[0] == 2, "warp: flow must be 2xHxW");
    require(flow->shape[1] == map->shape[1] && flow->shape[2] == map->shape[2],
            "warp: flow spatial size " + flow->shape.str() + " does not match map " +
                map->shape.str());
    const int C = map->shape[0], H = map->shape[1], W = map->shape[2];

    std::vector<detail::BilinearCorners> corners(static_cast<size_t>(H) * W);
    {
        const T* dx = flow->plane(0);
        const T* dy = flow->plane(1);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                corners[static_cast<size_t>(y) * W + x] = detail::bilinear_corners(
                    x + static_cast<double>(dx[y * W + x]),
                    y + static_cast<double>(dy[y * W + x]), W, H);
    }

    auto out = make_tensor<T>(map->shape);
    for (int c = 0; c < C; ++c) {
        const T* plane = map->plane(c);
        T* op = out->plane(c);
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i)
            op[i] = static_cast<T>(detail::bilinear_fetch(plane, W, corners[i]));
    }

    if (tape) {
        tape->record([map, out, corners, C, H, W]() {
            if (!out->has_grad()) return;
            std::vector<double> gmap(map->data.size(), 0.0);
            for (int c = 0; c < C; ++c) {
                double* gplane = gmap.data() + static_cast<size_t>(c) * H * W;
                const T* gop = out->grad.data() + static_cast<size_t>(c) * H * W;
                for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) {
                    const double g = static_cast<double>(gop[i]);
                    if (g == 0.0) continue;
                    detail::bilinear_scatter(gplane, W, corners[i], g);
                }
            }
            detail::flush_grad(*map, gmap);
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> concat_channels(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->shape.rank == 3 && b->shape.rank == 3, "concat_channels: rank-3 inputs expected");
    require(a->shape[1] == b->shape[1] && a->shape[2] == b->shape[2],
            "concat_channels: spatial mismatch");
    const int Ca = a->shape[0], Cb = b->shape[0];
    auto out = make_tensor<T>(Shape{Ca + Cb, a->shape[1], a->shape[2]});
    std::copy(a->data.begin(), a->data.end(), out->data.begin());
    std::copy(b->data.begin(), b->data.end(), out->data.begin() + a->data.size());
    if (tape) {
        tape->record([a, b, out]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            b->ensure_grad();
            for (size_t i = 0; i < a->data.size(); ++i) a->grad[i] += out->grad[i];
            for (size_t i = 0; i < b->data.size(); ++i) b->grad[i] += out->grad[a->data.size() + i];
        });
    }
    return out;
}

// out[c] = h[c] .* a, broadcasting a 1xHxW attention map over all channels.
template <typename T>
TensorPtr<T> channel_scale(Tape<T>* tape, const TensorPtr<T>& h, const TensorPtr<T>& a) {
    require(h->shape.rank == 3 && a->shape.rank == 3 && a->shape[0] == 1,
            "channel_scale: h CxHxW, a 1xHxW expected");
    require(a->shape[1] == h->shape[1] && a->shape[2] == h->shape[2],
            "channel_scale: spatial mismatch");
    const int C = h->shape[0];
    const size_t hw = static_cast<size_t>(h->shape[1]) * h->shape[2];
    auto out = make_tensor<T>(h->shape);
    for (int c = 0; c < C; ++c) {
        const T* hp = h->plane(c);
        T* op = out->plane(c);
        for (size_t i = 0; i < hw; ++i) op[i] = hp[i] * a->data[i];
    }
    if (tape) {
        tape->record([h, a, out, C, hw]() {
            if (!out->has_grad()) return;
            h->ensure_grad();
            std::vector<double> ga(hw, 0.0);
            for (int c = 0; c < C; ++c) {
                const T* hp = h->plane(c);
                const T* gop = out->grad.data() + static_cast<size_t>(c) * hw;
                T* ghp = h->grad.data() + static_cast<size_t>(c) * hw;
                for (size_t i = 0; i < hw; ++i) {
                    ghp[i] += gop[i] * a->data[i];
                    ga[i] += static_cast<double>(gop[i]) * static_cast<double>(hp[i]);
                }
            }
            detail::flush_grad(*a, ga);
        });
    }
    return out;
}

// CxHxW -> C channel means.
template <typename T>
TensorPtr<T> global_avg_pool(Tape<T>* tape, const TensorPtr<T>& x) {
    require(x->shape.rank == 3, "global_avg_pool: rank-3 input expected");
    const int C = x->shape[0];
    const size_t hw = static_cast<size_t>(x->shape[1]) * x->shape[2];
    auto out = make_tensor<T>(Shape{C});
    for (int c = 0; c < C; ++c) {
        const T* p = x->plane(c);
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += static_cast<double>(p[i]);
        out->data[c] = static_cast<T>(acc / static_cast<double>(hw));
    }
    if (tape) {
        tape->record([x, out, C, hw]() {
            if (!out->has_grad()) return;
            x->ensure_grad();
            for (int c = 0; c < C; ++c) {
                const T g = static_cast<T>(static_cast<double>(out->grad[c]) / static_cast<double>(hw));
                T* gp = x->grad.data() + static_cast<size_t>(c) * hw;
                for (size_t i = 0; i < hw; ++i) gp[i] += g;
            }
        });
    }
    return out;
}

// y = W x + b with W of shape DxC and x rank-1 of size C.
template <typename T>
TensorPtr<T> fully_connected(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                             const TensorPtr<T>& b) {
    require(x->shape.rank == 1 && w->shape.rank == 2, "fully_connected: x rank-1, w rank-2");
    const int C = x->shape[0], D = w->shape[0];
    require(w->shape[1] == C, "fully_connected: weight/input size mismatch");
    require(b->numel() == D, "fully_connected: bias size mismatch");
    auto out = make_tensor<T>(Shape{D});
    for (int d = 0; d < D; ++d) {
        double acc = static_cast<double>(b->data[d]);
        const T* row = w->data.data() + static_cast<size_t>(d) * C;
        for (int c = 0; c < C; ++c) acc += static_cast<double>(row[c]) * static_cast<double>(x->data[c]);
        out->data[d] = static_cast<T>(acc);
    }
    if (tape) {
        tape->record([x, w, b, out, C, D]() {
            if (!out->has_grad()) return;
            std::vector<double> gx(static_cast<size_t>(C), 0.0);
            std::vector<double> gw(w->data.size(), 0.0);
            std::vector<double> gb(static_cast<size_t>(D), 0.0);
            for (int d = 0; d < D; ++d) {
                const double g = static_cast<double>(out->grad[d]);
                if (g == 0.0) continue;
                gb[d] += g;
                const T* row = w->data.data() + static_cast<size_t>(d) * C;
                for (int c = 0; c < C; ++c) {
                    gw[static_cast<size_t>(d) * C + c] += g * static_cast<double>(x->data[c]);
                    gx[c] += g * static_cast<double>(row[c]);
                }
            }
            detail::flush_grad(*x, gx);
            detail::flush_grad(*w, gw);
            detail::flush_grad(*b, gb);
        });
    }
    return out;
}

// x / ||x||2 for rank-1 x. Norms below min_norm raise DegenerateEmbedding.
template <typename T>
TensorPtr<T> l2_normalize(Tape<T>* tape, const TensorPtr<T>& x, double min_norm = 1e-8) {
    require(x->shape.rank == 1, "l2_normalize: rank-1 input expected");
    double n2 = 0.0;
    for (T v : x->data) n2 += static_cast<double>(v) * static_cast<double>(v);
    const double n = std::sqrt(n2);
    if (n < min_norm)
        throw DegenerateEmbedding("l2_normalize: pre-normalization norm " + std::to_string(n) +
                                  " below " + std::to_string(min_norm));
    auto out = make_tensor<T>(x->shape);
    for (size_t i = 0; i < x->data.size(); ++i)
        out->data[i] = static_cast<T>(static_cast<double>(x->data[i]) / n);
    if (tape) {
        tape->record([x, out, n]() {
            if (!out->has_grad()) return;
            x->ensure_grad();
            double dot = 0.0;
            for (size_t i = 0; i < out->data.size(); ++i)
                dot += static_cast<double>(out->data[i]) * static_cast<double>(out->grad[i]);
            for (size_t i = 0; i < x->data.size(); ++i) {
                const double g = (static_cast<double>(out->grad[i]) -
                                  static_cast<double>(out->data[i]) * dot) / n;
                x->grad[i] += static_cast<T>(g);
            }
        });
    }
    return out;
}

// Mean binary cross-entropy evaluated from logits for stability:
// loss_i = max(z,0) - z*t + log(1 + exp(-|z|)). Targets are constants.
template <typename T>
TensorPtr<T> bce_with_logits_mean(Tape<T>* tape, const TensorPtr<T>& logits,
                                  const TensorPtr<T>& targets) {
    require(logits->shape == targets->shape, "bce_with_logits_mean: shape mismatch");
    const size_t n = logits->data.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double z = static_cast<double>(logits->data[i]);
        const double t = static_cast<double>(targets->data[i]);
        acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    auto out = make_tensor<T>(Shape::scalar());
    out->data[0] = static_cast<T>(acc / static_cast<double>(n));
    if (tape) {
        tape->record([logits, targets, out, n]() {
            if (!out->has_grad()) return;
            logits->ensure_grad();
            const double g = static_cast<double>(out->grad[0]) / static_cast<double>(n);
            for (size_t i = 0; i < n; ++i) {
                const double z = static_cast<double>(logits->data[i]);
                const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                          : std::exp(z) / (1.0 + std::exp(z));
                logits->grad[i] += static_cast<T>(g * (s - static_cast<double>(targets->data[i])));
            }
        });
    }
    return out;
}

// -log softmax(logits)[label] for a rank-1 logit vector.
template <typename T>
TensorPtr<T> softmax_cross_entropy(Tape<T>* tape, const TensorPtr<T>& logits, int label) {
    require(logits->shape.rank == 1, "softmax_cross_entropy: rank-1 logits expected");
    const int K = logits->shape[0];
    require(label >= 0 && label < K, "softmax_cross_entropy: label out of range");
    double mx = -1e300;
    for (T v : logits->data) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (T v : logits->data) sum += std::exp(static_cast<double>(v) - mx);
    const double lse = mx + std::log(sum);
    auto out = make_tensor<T>(Shape::scalar());
    out->data[0] = static_cast<T>(lse - static_cast<double>(logits->data[label]));
    if (tape) {
        tape->record([logits, out, label, mx, sum, K]() {
            if (!out->has_grad()) return;
            logits->ensure_grad();
            const double g = static_cast<double>(out->grad[0]);
            for (int k = 0; k < K; ++k) {
                const double p = std::exp(static_cast<double>(logits->data[k]) - mx) / sum;
                logits->grad[k] += static_cast<T>(g * (p - (k == label ? 1.0 : 0.0)));
            }
        });
    }
    return out;
}

// scores = table * x, with the KxD table treated as a constant buffer
// (gradients flow to x only).
template <typename T>
TensorPtr<T> matvec_const_table(Tape<T>* tape, const Tensor<T>& table, const TensorPtr<T>& x) {
    require(table.shape.rank == 2 && x->shape.rank == 1, "matvec_const_table: KxD table, rank-1 x");
    const int K = table.shape[0], D = table.shape[1];
    require(x->shape[0] == D, "matvec_const_table: dimension mismatch");
    auto out = make_tensor<T>(Shape{K});
    for (int k = 0; k < K; ++k) {
        double acc = 0.0;
        const T* row = table.data.data() + static_cast<size_t>(k) * D;
        for (int d = 0; d < D; ++d) acc += static_cast<double>(row[d]) * static_cast<double>(x->data[d]);
        out->data[k] = static_cast<T>(acc);
    }
    if (tape) {
        // copy the rows used so later table updates do not disturb backward
        std::vector<T> rows = table.data;
        tape->record([x, out, rows, K, D]() {
            if (!out->has_grad()) return;
            std::vector<double> gx(static_cast<size_t>(D), 0.0);
            for (int k = 0; k < K; ++k) {
                const double g = static_cast<double>(out->grad[k]);
                if (g == 0.0) continue;
                for (int d = 0; d < D; ++d)
                    gx[d] += g * static_cast<double>(rows[static_cast<size_t>(k) * D + d]);
            }
            detail::flush_grad(*x, gx);
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> add(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require(a->shape == b->shape, "add: shape mismatch");
    auto out = make_tensor<T>(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    if (tape) {
        tape->record([a, b, out]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            b->ensure_grad();
            for (size_t i = 0; i < a->data.size(); ++i) {
                a->grad[i] += out->grad[i];
                b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> scale(Tape<T>* tape, const TensorPtr<T>& a, double s) {
    auto out = make_tensor<T>(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i)
        out->data[i] = static_cast<T>(static_cast<double>(a->data[i]) * s);
    if (tape) {
        tape->record([a, out, s]() {
            if (!out->has_grad()) return;
            a->ensure_grad();
            for (size_t i = 0; i < a->data.size(); ++i)
                a->grad[i] += static_cast<T>(static_cast<double>(out->grad[i]) * s);
        });
    }
    return out;
}

template <typename T>
TensorPtr<T> mean_of(Tape<T>* tape, const std::vector<TensorPtr<T>>& scalars) {
    require(!scalars.empty(), "mean_of: empty list");
    TensorPtr<T> acc = scalars[0];
    for (size_t i = 1; i < scalars.size(); ++i) acc = add(tape, acc, scalars[i]);
    return scale(tape, acc, 1.0 / static_cast<double>(scalars.size()));
}

}  // namespace ops
}  // namespace dyenet
