#include "dyenet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dyenet/errors.hpp"

namespace dyenet {

std::string Box::str() const {
    std::ostringstream os;
    os << "[" << x0 << "," << y0 << "," << x1 << "," << y1 << "]";
    return os.str();
}

double box_iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

Box clip_box(const Box& b, int w, int h) {
    Box c;
    c.x0 = std::max(0.0, std::min(b.x0, static_cast<double>(w)));
    c.y0 = std::max(0.0, std::min(b.y0, static_cast<double>(h)));
    c.x1 = std::max(0.0, std::min(b.x1, static_cast<double>(w)));
    c.y1 = std::max(0.0, std::min(b.y1, static_cast<double>(h)));
    return c;
}

Box dilate_box(const Box& b, double margin, int w, int h) {
    const double diag = std::sqrt(b.width() * b.width() + b.height() * b.height());
    const double d = margin * diag;
    Box out{b.x0 - d, b.y0 - d, b.x1 + d, b.y1 + d};
    return clip_box(out, w, h);
}

long Mask::area() const {
    long n = 0;
    for (uint8_t p : v) n += p ? 1 : 0;
    return n;
}

double mask_iou(const Mask& a, const Mask& b) {
    require(a.h == b.h && a.w == b.w, "mask_iou: dimension mismatch");
    long inter = 0, uni = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const bool pa = a.v[i] != 0, pb = b.v[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Box mask_bbox(const Mask& m) {
    int xmin = m.w, ymin = m.h, xmax = -1, ymax = -1;
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x)
            if (m.at(y, x)) {
                xmin = std::min(xmin, x);
                ymin = std::min(ymin, y);
                xmax = std::max(xmax, x);
                ymax = std::max(ymax, y);
            }
    if (xmax < 0) return Box{};  // invalid
    return Box{static_cast<double>(xmin), static_cast<double>(ymin),
               static_cast<double>(xmax + 1), static_cast<double>(ymax + 1)};
}

Mask paste_mask(const TensorF& probs, const Box& box, int frame_w, int frame_h) {
    require(probs.shape.rank == 3 && probs.shape[0] == 1, "paste_mask: probs must be 1xMxM");
    const int m = probs.shape[1];
    require(probs.shape[2] == m, "paste_mask: probs must be square");
    Mask out(frame_h, frame_w);
    if (!box.valid()) return out;
    const double bw = box.width(), bh = box.height();
    const int px0 = std::max(0, static_cast<int>(std::floor(box.x0 - 0.5)));
    const int py0 = std::max(0, static_cast<int>(std::floor(box.y0 - 0.5)));
    const int px1 = std::min(frame_w - 1, static_cast<int>(std::ceil(box.x1)));
    const int py1 = std::min(frame_h - 1, static_cast<int>(std::ceil(box.y1)));
    const float* p = probs.data.data();
    for (int py = py0; py <= py1; ++py) {
        const double cy = py + 0.5;
        if (cy < box.y0 || cy >= box.y1) continue;
        const double gy = (cy - box.y0) / bh * m - 0.5;
        for (int px = px0; px <= px1; ++px) {
            const double cx = px + 0.5;
            if (cx < box.x0 || cx >= box.x1) continue;
            const double gx = (cx - box.x0) / bw * m - 0.5;
            // edge-clamped bilinear on the m x m grid
            const double gxc = std::min(std::max(gx, 0.0), static_cast<double>(m - 1));
            const double gyc = std::min(std::max(gy, 0.0), static_cast<double>(m - 1));
            const int x0 = std::min(static_cast<int>(gxc), m - 2 >= 0 ? m - 2 : 0);
            const int y0 = std::min(static_cast<int>(gyc), m - 2 >= 0 ? m - 2 : 0);
            const double ax = gxc - x0, ay = gyc - y0;
            const int x1 = std::min(x0 + 1, m - 1);
            const int y1 = std::min(y0 + 1, m - 1);
            const double val = (1 - ay) * ((1 - ax) * p[y0 * m + x0] + ax * p[y0 * m + x1]) +
                               ay * ((1 - ax) * p[y1 * m + x0] + ax * p[y1 * m + x1]);
            if (val > 0.5) out.at(py, px) = 1;
        }
    }
    return out;
}

// Each cell's value is the exact fraction of its rectangle covered by mask
// pixels (pixel (px,py) occupies [px,px+1)x[py,py+1); outside the frame counts
// as background). Fractional boundary targets let a trained head place the
// 0.5 level-set of the pasted probabilities at the true object edge instead
// of half a cell outside it, which a binary center-sample target cannot do.
TensorPtrF roi_rasterize(const Mask& mask, const Box& box, int m) {
    require(box.valid(), "roi_rasterize: invalid box " + box.str());
    require(m >= 2, "roi_rasterize: m must be at least 2");
    auto out = make_tensor<float>(Shape{1, m, m});
    const double bw = box.width() / m, bh = box.height() / m;
    for (int gy = 0; gy < m; ++gy) {
        const double cy0 = box.y0 + gy * bh, cy1 = cy0 + bh;
        for (int gx = 0; gx < m; ++gx) {
            const double cx0 = box.x0 + gx * bw, cx1 = cx0 + bw;
            double cov = 0.0;
            const int py0 = static_cast<int>(std::floor(cy0));
            const int px0 = static_cast<int>(std::floor(cx0));
            for (int py = std::max(py0, 0); py < mask.h && py < cy1; ++py) {
                const double oy = std::min(cy1, py + 1.0) - std::max(cy0, double(py));
                if (oy <= 0.0) continue;
                for (int px = std::max(px0, 0); px < mask.w && px < cx1; ++px) {
                    if (!mask.at(py, px)) continue;
                    const double ox = std::min(cx1, px + 1.0) - std::max(cx0, double(px));
                    if (ox > 0.0) cov += ox * oy;
                }
            }
            out->at3(0, gy, gx) = static_cast<float>(cov / (bw * bh));
        }
    }
    return out;
}

int InstanceMap::max_id() const {
    int mx = 0;
    for (int k : id) mx = std::max(mx, k);
    return mx;
}

Mask InstanceMap::instance_mask(int k) const {
    Mask m(h, w);
    for (size_t i = 0; i < id.size(); ++i) m.v[i] = id[i] == k ? 1 : 0;
    return m;
}

}  // namespace dyenet
