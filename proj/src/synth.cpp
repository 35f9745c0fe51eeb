#include "dyenet/synth.hpp"

#include <cmath>

#include "dyenet/errors.hpp"

namespace dyenet {

namespace {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b, r = a % b;
    return r != 0 && ((r < 0) != (b < 0)) ? q - 1 : q;
}

int64_t floor_mod(int64_t a, int64_t b) { return a - floor_div(a, b) * b; }

// Byte-quantized so PPM round trips reproduce generated frames bit-exactly.
float quantize(double v) {
    double b = std::round(v * 255.0);
    b = std::min(255.0, std::max(0.0, b));
    return static_cast<float>(b / 255.0);
}

struct ShapeState {
    double cx, cy, size;
    bool visible;
};

class Renderer {
public:
    explicit Renderer(const SynthSpec& spec) : spec_(spec) {
        require(spec.w >= 16 && spec.h >= 16, "synth: frame must be at least 16x16");
        require(spec.frames >= 1, "synth: need at least one frame");
        require(!spec.shapes.empty(), "synth: need at least one shape");
        for (const auto& ev : spec.occlusions) {
            if (ev.from < 1 || ev.to > spec.frames || ev.from > ev.to)
                throw SpecError("synth: occlusion frames [" + std::to_string(ev.from) + ".." +
                                std::to_string(ev.to) + "] outside [1.." +
                                std::to_string(spec.frames) + "]");
            const int K = static_cast<int>(spec.shapes.size());
            if (ev.occluded_id < 1 || ev.occluded_id > K || ev.occluder_id < 1 ||
                ev.occluder_id > K || ev.occluded_id == ev.occluder_id)
                throw SpecError("synth: occlusion event references invalid shape ids");
        }
        // bg texture tile colors in a muted band so shape colors stand out
        if (spec.bg_period > 0) {
            tile_.resize(static_cast<size_t>(spec.bg_period) * spec.bg_period * 3);
            for (size_t i = 0; i < tile_.size(); ++i) {
                const uint64_t h = mix64(spec.seed * 1315423911ULL + i + 1);
                tile_[i] = quantize(0.25 + 0.30 * (static_cast<double>(h >> 11) * 0x1.0p-53));
            }
        }
    }

    ShapeState state(int shape_idx, int j) const {  // shape_idx 0-based, j 1-based
        const ShapeSpec& s = spec_.shapes[shape_idx];
        ShapeState st;
        st.cx = s.cx + (j - 1) * s.vx;
        st.cy = s.cy + (j - 1) * s.vy;
        st.size = s.size * std::pow(1.0 + s.scale_rate, j - 1);
        if (st.size > std::min(spec_.w, spec_.h))
            throw SpecError("synth: shape " + std::to_string(shape_idx + 1) + " has size " +
                            std::to_string(st.size) + " larger than the frame at frame " +
                            std::to_string(j));
        st.visible = true;
        for (const auto& ev : spec_.occlusions)
            if (ev.occluded_id == shape_idx + 1 && j >= ev.from && j <= ev.to) st.visible = false;
        return st;
    }

    bool inside(const ShapeSpec& s, const ShapeState& st, double px, double py) const {
        const double half = st.size / 2.0;
        if (s.kind == ShapeKind::Square)
            return std::abs(px - st.cx) <= half && std::abs(py - st.cy) <= half;
        const double dx = px - st.cx, dy = py - st.cy;
        return dx * dx + dy * dy <= half * half;
    }

    InstanceMap id_map(int j) const {
        InstanceMap m(spec_.h, spec_.w);
        for (size_t si = 0; si < spec_.shapes.size(); ++si) {
            const ShapeState st = state(static_cast<int>(si), j);
            if (!st.visible) continue;
            const ShapeSpec& s = spec_.shapes[si];
            const int x0 = std::max(0, static_cast<int>(std::floor(st.cx - st.size / 2 - 1)));
            const int x1 = std::min(spec_.w - 1, static_cast<int>(std::ceil(st.cx + st.size / 2 + 1)));
            const int y0 = std::max(0, static_cast<int>(std::floor(st.cy - st.size / 2 - 1)));
            const int y1 = std::min(spec_.h - 1, static_cast<int>(std::ceil(st.cy + st.size / 2 + 1)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if (inside(s, st, x + 0.5, y + 0.5)) m.at(y, x) = static_cast<int>(si) + 1;
        }
        return m;
    }

    float bg_value(int c, int64_t wx, int64_t wy) const {  // world (pre-camera) coords
        if (spec_.bg_period > 0) {
            const int64_t tx = floor_mod(wx, spec_.bg_period);
            const int64_t ty = floor_mod(wy, spec_.bg_period);
            return tile_[(static_cast<size_t>(ty) * spec_.bg_period + tx) * 3 + c];
        }
        const uint64_t h = mix64(mix64(static_cast<uint64_t>(wx) * 0x632be59bd9b4e019ULL ^
                                       static_cast<uint64_t>(wy)) ^
                                 spec_.seed ^ (static_cast<uint64_t>(c) << 62));
        return quantize(0.25 + 0.30 * (static_cast<double>(h >> 11) * 0x1.0p-53));
    }

    TensorPtrF render(int j, const InstanceMap& ids) const {
        auto img = make_tensor<float>(Shape{3, spec_.h, spec_.w});
        // background moves by bg velocity per frame: content at p came from
        // world position p - (j-1)*v_bg
        const double ox = (j - 1) * spec_.bg_vx;
        const double oy = (j - 1) * spec_.bg_vy;
        for (int y = 0; y < spec_.h; ++y)
            for (int x = 0; x < spec_.w; ++x) {
                const int k = ids.at(y, x);
                if (k > 0) {
                    for (int c = 0; c < 3; ++c)
                        img->at3(c, y, x) = quantize(spec_.shapes[k - 1].color[c]);
                } else {
                    const int64_t wx = static_cast<int64_t>(std::floor(x - ox));
                    const int64_t wy = static_cast<int64_t>(std::floor(y - oy));
                    for (int c = 0; c < 3; ++c) img->at3(c, y, x) = bg_value(c, wx, wy);
                }
            }
        return img;
    }

    TensorPtrF flow(int a, int b, const InstanceMap& ida, const InstanceMap& idb) const {
        auto f = make_tensor<float>(Shape{2, spec_.h, spec_.w});
        const double dj = b - a;
        float* dx = f->plane(0);
        float* dy = f->plane(1);
        const size_t n = static_cast<size_t>(spec_.h) * spec_.w;
        for (size_t i = 0; i < n; ++i) {
            dx[i] = static_cast<float>(dj * spec_.bg_vx);
            dy[i] = static_cast<float>(dj * spec_.bg_vy);
        }
        for (size_t si = 0; si < spec_.shapes.size(); ++si) {
            const int k = static_cast<int>(si) + 1;
            const ShapeSpec& s = spec_.shapes[si];
            for (size_t i = 0; i < n; ++i)
                if (ida.id[i] == k || idb.id[i] == k) {
                    dx[i] = static_cast<float>(dj * s.vx);
                    dy[i] = static_cast<float>(dj * s.vy);
                }
        }
        return f;
    }

private:
    const SynthSpec& spec_;
    std::vector<float> tile_;
};

}  // namespace

Sequence gen_synthetic(const SynthSpec& spec) {
    Renderer r(spec);
    Sequence seq;
    seq.name = spec.name;
    seq.orig_h = spec.h;
    seq.orig_w = spec.w;

    std::vector<InstanceMap> ids;
    ids.reserve(static_cast<size_t>(spec.frames));
    for (int j = 1; j <= spec.frames; ++j) ids.push_back(r.id_map(j));
    for (int j = 1; j <= spec.frames; ++j) {
        seq.frames.push_back(r.render(j, ids[j - 1]));
        seq.gt.push_back(ids[j - 1]);
    }
    for (int j = 1; j <= spec.frames - 1; ++j)
        seq.flow_fw_.push_back(r.flow(j, j + 1, ids[j - 1], ids[j]));
    for (int j = 2; j <= spec.frames; ++j)
        seq.flow_bw_.push_back(r.flow(j, j - 1, ids[j - 1], ids[j - 2]));

    validate_contiguous_ids(seq);
    return seq;
}

}  // namespace dyenet
