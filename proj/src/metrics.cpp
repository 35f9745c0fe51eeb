#include "dyenet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dyenet/errors.hpp"

namespace dyenet {

double jaccard(const Mask& pred, const Mask& gt) {
    require(pred.h == gt.h && pred.w == gt.w, "jaccard: dimension mismatch");
    return mask_iou(pred, gt);
}

namespace {

// Mask pixels 4-adjacent to background; out-of-frame counts as background,
// so frame-edge mask pixels are boundary.
std::vector<uint8_t> boundary_map(const Mask& m) {
    std::vector<uint8_t> b(m.v.size(), 0);
    for (int y = 0; y < m.h; ++y) {
        for (int x = 0; x < m.w; ++x) {
            if (!m.at(y, x)) continue;
            const bool edge = y == 0 || y == m.h - 1 || x == 0 || x == m.w - 1;
            if (edge || !m.at(y - 1, x) || !m.at(y + 1, x) ||
                !m.at(y, x - 1) || !m.at(y, x + 1)) {
                b[static_cast<size_t>(y) * m.w + x] = 1;
            }
        }
    }
    return b;
}

// Box dilation by the Chebyshev ball of radius tol.
std::vector<uint8_t> dilate(const std::vector<uint8_t>& b, int h, int w, int tol) {
    if (tol == 0) return b;
    std::vector<uint8_t> out(b.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!b[static_cast<size_t>(y) * w + x]) continue;
            for (int dy = -tol; dy <= tol; ++dy) {
                const int ny = y + dy;
                if (ny < 0 || ny >= h) continue;
                for (int dx = -tol; dx <= tol; ++dx) {
                    const int nx = x + dx;
                    if (nx < 0 || nx >= w) continue;
                    out[static_cast<size_t>(ny) * w + nx] = 1;
                }
            }
        }
    }
    return out;
}

long count_set(const std::vector<uint8_t>& b) {
    long n = 0;
    for (uint8_t p : b) n += p ? 1 : 0;
    return n;
}

// Fraction of a's set pixels that land on b's set pixels; 0 for empty a.
double matched_fraction(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    const long na = count_set(a);
    if (na == 0) return 0.0;
    long hit = 0;
    for (size_t i = 0; i < a.size(); ++i) hit += (a[i] && b[i]) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(na);
}

}  // namespace

double boundary_f(const Mask& pred, const Mask& gt, int tol) {
    require(pred.h == gt.h && pred.w == gt.w, "boundary_f: dimension mismatch");
    require(tol >= 0, "boundary_f: tol must be >= 0");
    const auto bp = boundary_map(pred);
    const auto bg = boundary_map(gt);
    const long np = count_set(bp), ng = count_set(bg);
    if (np == 0 && ng == 0) return 1.0;
    const double p = matched_fraction(bp, dilate(bg, pred.h, pred.w, tol));
    const double r = matched_fraction(bg, dilate(bp, pred.h, pred.w, tol));
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

double g_mean(double j, double f) {
    require(j >= 0.0 && j <= 1.0 && f >= 0.0 && f <= 1.0,
            "g_mean: inputs must lie in [0,1]");
    return 0.5 * (j + f);
}

double round1(double v) {
    return std::copysign(std::round(std::fabs(v) * 10.0 + 1e-6), v) / 10.0;
}

namespace {

Mask crop_to(const Mask& m, int h, int w) {
    if (m.h == h && m.w == w) return m;
    require(m.h >= h && m.w >= w, "evaluate: mask smaller than the crop size");
    Mask out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = m.at(y, x);
    return out;
}

}  // namespace

EvalReport evaluate(const Sequence& seq, const std::vector<MaskTube>& tubes,
                    int boundary_tol) {
    require(seq.has_gt(), "evaluate: sequence has no ground truth");
    require(seq.num_frames() >= 2, "evaluate: need at least two frames");
    require(boundary_tol >= 0, "evaluate: boundary_tol must be >= 0");
    const int K = seq.num_identities();
    require(K >= 1, "evaluate: ground truth names no instances");
    // In-memory sequences that were never padded keep orig_* at 0.
    const int oh = seq.orig_h > 0 ? seq.orig_h : seq.height();
    const int ow = seq.orig_w > 0 ? seq.orig_w : seq.width();
    const int N = seq.num_frames();

    EvalReport rep;
    for (int k = 1; k <= K; ++k) {
        const MaskTube* tube = nullptr;
        for (const auto& t : tubes) {
            if (t.identity == k) {
                tube = &t;
                break;
            }
        }
        InstanceEval ev;
        ev.identity = k;
        const Mask none(oh, ow);
        double jsum = 0.0, fsum = 0.0;
        long area_sum = 0;
        int present = 0, absent = 0;
        for (int j = 2; j <= N; ++j) {
            const Mask gt = crop_to(seq.gt_at(j).instance_mask(k), oh, ow);
            const Mask pred =
                (tube && tube->covers(j)) ? crop_to(tube->mask_at(j), oh, ow) : none;
            jsum += jaccard(pred, gt);
            fsum += boundary_f(pred, gt, boundary_tol);
            if (gt.empty()) {
                ++absent;
            } else {
                ++present;
                area_sum += gt.area();
            }
        }
        ev.j = jsum / (N - 1);
        ev.f = fsum / (N - 1);
        ev.g = g_mean(ev.j, ev.f);
        ev.occluded = absent > 0 && present > 0;
        ev.small_object =
            present > 0 && static_cast<double>(area_sum) / present <
                               0.02 * static_cast<double>(oh) * static_cast<double>(ow);
        rep.instances.push_back(ev);
    }

    double js = 0.0, fs = 0.0;
    for (const auto& e : rep.instances) {
        js += e.j;
        fs += e.f;
    }
    rep.mean_j = js / K;
    rep.mean_f = fs / K;
    rep.mean_g = g_mean(rep.mean_j, rep.mean_f);

    auto bucket = [&](bool InstanceEval::*flag, bool want) -> std::optional<double> {
        double s = 0.0;
        int c = 0;
        for (const auto& e : rep.instances) {
            if (e.*flag == want) {
                s += e.g;
                ++c;
            }
        }
        if (c == 0) return std::nullopt;
        return s / c;
    };
    rep.g_small = bucket(&InstanceEval::small_object, true);
    rep.g_large = bucket(&InstanceEval::small_object, false);
    rep.g_occluded = bucket(&InstanceEval::occluded, true);
    rep.g_visible = bucket(&InstanceEval::occluded, false);
    return rep;
}

namespace {

std::string fmt6(double v) {
    char b[32];
    std::snprintf(b, sizeof(b), "%.6f", v);
    return b;
}

}  // namespace

std::string report_csv(const EvalReport& rep) {
    std::ostringstream os;
    os << "identity,J,F,G,small,occluded\n";
    for (const auto& e : rep.instances) {
        os << e.identity << ',' << fmt6(e.j) << ',' << fmt6(e.f) << ',' << fmt6(e.g)
           << ',' << (e.small_object ? 1 : 0) << ',' << (e.occluded ? 1 : 0) << '\n';
    }
    os << "mean," << fmt6(rep.mean_j) << ',' << fmt6(rep.mean_f) << ','
       << fmt6(rep.mean_g) << ",,\n";
    auto attr = [&os](const char* name, const std::optional<double>& g) {
        if (g) os << name << ",,," << fmt6(*g) << ",,\n";
    };
    attr("small", rep.g_small);
    attr("large", rep.g_large);
    attr("occluded", rep.g_occluded);
    attr("visible", rep.g_visible);
    return os.str();
}

std::string report_table(const EvalReport& rep) {
    std::ostringstream os;
    char line[128];
    os << "instance      J      F      G  attrs\n";
    for (const auto& e : rep.instances) {
        std::string attrs;
        if (e.small_object) attrs += "small";
        if (e.occluded) attrs += attrs.empty() ? "occluded" : ",occluded";
        if (attrs.empty()) attrs = "-";
        std::snprintf(line, sizeof(line), "%-8d %6.1f %6.1f %6.1f  %s\n", e.identity,
                      round1(e.j * 100.0), round1(e.f * 100.0), round1(e.g * 100.0),
                      attrs.c_str());
        os << line;
    }
    std::snprintf(line, sizeof(line), "%-8s %6.1f %6.1f %6.1f\n", "mean",
                  round1(rep.mean_j * 100.0), round1(rep.mean_f * 100.0),
                  round1(rep.mean_g * 100.0));
    os << line;
    os << "G by attribute:";
    auto attr = [&](const char* name, const std::optional<double>& g) {
        if (g) {
            std::snprintf(line, sizeof(line), " %s %.1f", name, round1(*g * 100.0));
            os << line;
        }
    };
    attr("small", rep.g_small);
    attr("large", rep.g_large);
    attr("occluded", rep.g_occluded);
    attr("visible", rep.g_visible);
    os << '\n';
    return os.str();
}

}  // namespace dyenet
