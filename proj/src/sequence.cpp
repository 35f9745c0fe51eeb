#include "dyenet/sequence.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "dyenet/errors.hpp"
#include "dyenet/flow_io.hpp"
#include "dyenet/image_io.hpp"

namespace dyenet {

namespace fs = std::filesystem;

namespace {

std::string frame_name(int j, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05d%s", j, ext);
    return buf;
}

TensorF pad_map(const TensorF& t, int H, int W, float fill) {
    if (t.shape[1] == H && t.shape[2] == W) return t;
    TensorF out(Shape{t.shape[0], H, W}, fill);
    for (int c = 0; c < t.shape[0]; ++c)
        for (int y = 0; y < t.shape[1]; ++y)
            for (int x = 0; x < t.shape[2]; ++x) out.at3(c, y, x) = t.at3(c, y, x);
    return out;
}

}  // namespace

const TensorPtrF& Sequence::frame(int j) const {
    require(j >= 1 && j <= num_frames(), "sequence: frame index " + std::to_string(j) + " out of range");
    return frames[static_cast<size_t>(j) - 1];
}

const InstanceMap& Sequence::gt_at(int j) const {
    require(has_gt(), "sequence: no ground-truth masks");
    require(j >= 1 && j <= num_frames(), "sequence: mask index out of range");
    return gt[static_cast<size_t>(j) - 1];
}

const TensorPtrF& Sequence::flow_fw(int j) const {
    require(has_flow(), "sequence: no flow stored");
    require(j >= 1 && j <= num_frames() - 1, "sequence: forward flow index out of range");
    return flow_fw_[static_cast<size_t>(j) - 1];
}

const TensorPtrF& Sequence::flow_bw(int j) const {
    require(has_flow(), "sequence: no flow stored");
    require(j >= 2 && j <= num_frames(), "sequence: backward flow index out of range");
    return flow_bw_[static_cast<size_t>(j) - 2];
}

int Sequence::num_identities() const {
    int mx = 0;
    for (const auto& m : gt) mx = std::max(mx, m.max_id());
    return mx;
}

void validate_contiguous_ids(const Sequence& seq) {
    std::set<int> ids;
    for (const auto& m : seq.gt)
        for (int v : m.id)
            if (v != 0) ids.insert(v);
    int expect = 1;
    for (int v : ids) {
        if (v != expect)
            throw IoError("sequence '" + seq.name + "': instance ids must be contiguous 1..K, id " +
                          std::to_string(expect) + " is missing (found " + std::to_string(v) + ")");
        ++expect;
    }
}

Sequence load_sequence(const std::string& dir) {
    const fs::path root(dir);
    const fs::path fdir = root / "frames";
    if (!fs::is_directory(fdir)) throw IoError("sequence: missing frames directory '" + fdir.string() + "'");

    Sequence seq;
    seq.name = root.filename().string();
    for (int j = 1;; ++j) {
        const fs::path p = fdir / frame_name(j, ".ppm");
        if (!fs::exists(p)) break;
        seq.frames.push_back(std::make_shared<TensorF>(load_ppm(p.string())));
    }
    if (seq.frames.empty()) throw IoError("sequence: no frames found under '" + fdir.string() + "'");

    seq.orig_h = seq.frames[0]->shape[1];
    seq.orig_w = seq.frames[0]->shape[2];
    for (int j = 2; j <= seq.num_frames(); ++j)
        if (seq.frames[j - 1]->shape != seq.frames[0]->shape)
            throw IoError("sequence: frame " + std::to_string(j) + " size " +
                          seq.frames[j - 1]->shape.str() + " differs from frame 1 " +
                          seq.frames[0]->shape.str());

    const fs::path mdir = root / "masks";
    if (fs::is_directory(mdir)) {
        for (int j = 1; j <= seq.num_frames(); ++j) {
            const fs::path p = mdir / frame_name(j, ".pgm");
            if (!fs::exists(p))
                throw IoError("sequence: mask file missing for frame " + std::to_string(j));
            InstanceMap m = load_pgm(p.string());
            if (m.h != seq.orig_h || m.w != seq.orig_w)
                throw IoError("sequence: mask " + std::to_string(j) + " size mismatch");
            seq.gt.push_back(std::move(m));
        }
        validate_contiguous_ids(seq);
    }

    const fs::path wdir = root / "flow";
    if (fs::is_directory(wdir)) {
        for (int j = 1; j <= seq.num_frames() - 1; ++j) {
            const fs::path p = wdir / frame_name(j, "_fw.dyfl");
            if (!fs::exists(p)) throw IoError("sequence: forward flow missing for frame " + std::to_string(j));
            seq.flow_fw_.push_back(std::make_shared<TensorF>(load_dyfl(p.string())));
        }
        for (int j = 2; j <= seq.num_frames(); ++j) {
            const fs::path p = wdir / frame_name(j, "_bw.dyfl");
            if (!fs::exists(p)) throw IoError("sequence: backward flow missing for frame " + std::to_string(j));
            seq.flow_bw_.push_back(std::make_shared<TensorF>(load_dyfl(p.string())));
        }
        for (const auto& f : seq.flow_fw_)
            if (f->shape[1] != seq.orig_h || f->shape[2] != seq.orig_w)
                throw IoError("sequence: flow size mismatch in '" + wdir.string() + "'");
    }

    pad_sequence_to_multiple8(seq);
    return seq;
}

void save_sequence(const Sequence& seq, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root / "frames");
    if (seq.has_gt()) fs::create_directories(root / "masks");
    if (seq.has_flow()) fs::create_directories(root / "flow");
    for (int j = 1; j <= seq.num_frames(); ++j) {
        save_ppm((root / "frames" / frame_name(j, ".ppm")).string(), *seq.frames[j - 1]);
        if (seq.has_gt()) save_pgm((root / "masks" / frame_name(j, ".pgm")).string(), seq.gt[j - 1]);
    }
    if (seq.has_flow()) {
        for (int j = 1; j <= seq.num_frames() - 1; ++j)
            save_dyfl((root / "flow" / frame_name(j, "_fw.dyfl")).string(), *seq.flow_fw(j));
        for (int j = 2; j <= seq.num_frames(); ++j)
            save_dyfl((root / "flow" / frame_name(j, "_bw.dyfl")).string(), *seq.flow_bw(j));
    }
}

void pad_sequence_to_multiple8(Sequence& seq) {
    require(!seq.frames.empty(), "pad_sequence: empty sequence");
    const int H = seq.frames[0]->shape[1];
    const int W = seq.frames[0]->shape[2];
    if (seq.orig_h == 0) seq.orig_h = H;
    if (seq.orig_w == 0) seq.orig_w = W;
    const int Hp = (H + 7) / 8 * 8;
    const int Wp = (W + 7) / 8 * 8;
    if (Hp == H && Wp == W) return;
    for (auto& f : seq.frames) f = std::make_shared<TensorF>(pad_map(*f, Hp, Wp, 0.0f));
    for (auto& m : seq.gt) {
        InstanceMap p(Hp, Wp);
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x) p.at(y, x) = m.at(y, x);
        m = std::move(p);
    }
    for (auto& f : seq.flow_fw_) f = std::make_shared<TensorF>(pad_map(*f, Hp, Wp, 0.0f));
    for (auto& f : seq.flow_bw_) f = std::make_shared<TensorF>(pad_map(*f, Hp, Wp, 0.0f));
}

}  // namespace dyenet
