#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "dyenet/feature_net.hpp"
#include "dyenet/flow.hpp"
#include "dyenet/image_io.hpp"
#include "dyenet/ops.hpp"
#include "dyenet/proposals.hpp"
#include "dyenet/sequence.hpp"
#include "dyenet/synth.hpp"

using namespace dyenet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "dyenet_test_data";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

ShapeSpec square(double cx, double cy, double size, double vx, double vy, float r, float g,
                 float b) {
    ShapeSpec s;
    s.kind = ShapeKind::Square;
    s.cx = cx;
    s.cy = cy;
    s.size = size;
    s.vx = vx;
    s.vy = vy;
    s.color[0] = r;
    s.color[1] = g;
    s.color[2] = b;
    return s;
}

// Pixel-exactness of warp(frame_{j-1}, F_{j->j-1}) vs frame_j over a region.
double max_warp_error(const Sequence& seq, int j, int x0, int y0, int x1, int y1) {
    auto warped = ops::warp<float>(nullptr, seq.frame(j - 1), seq.flow_bw(j));
    double worst = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
                worst = std::max(worst, std::abs(static_cast<double>(warped->at3(c, y, x)) -
                                                 static_cast<double>(seq.frame(j)->at3(c, y, x))));
    return worst;
}

}  // namespace

TEST_CASE("generator: single square, velocity (2,0), constant flow on support") {
    SynthSpec spec;
    spec.w = 64;
    spec.h = 64;
    spec.frames = 5;
    spec.bg_period = 2;
    spec.shapes.push_back(square(20.0, 32.0, 8.0, 2.0, 0.0, 1.0f, 0.2f, 0.2f));
    Sequence seq = gen_synthetic(spec);

    REQUIRE(seq.num_frames() == 5);
    const Mask m1 = seq.gt_at(1).instance_mask(1);
    CHECK(m1.area() == 64);  // 8x8 square
    // forward flow F_{1->2} is (2,0) on the union of supports, background 0
    const auto& f = seq.flow_fw(1);
    const Mask m2 = seq.gt_at(2).instance_mask(1);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const bool on = m1.at(y, x) || m2.at(y, x);
            CHECK(f->at3(0, y, x) == (on ? 2.0f : 0.0f));
            CHECK(f->at3(1, y, x) == 0.0f);
        }
}

TEST_CASE("generator: reverse flow warps frames pixel-exactly, static camera") {
    SynthSpec spec;
    spec.w = 64;
    spec.h = 64;
    spec.frames = 6;
    spec.bg_period = 2;
    spec.shapes.push_back(square(16.0, 20.0, 8.0, 2.0, 2.0, 0.9f, 0.9f, 0.1f));
    spec.shapes.push_back(square(44.0, 40.0, 10.0, -2.0, 0.0, 0.1f, 0.5f, 0.9f));
    Sequence seq = gen_synthetic(spec);
    for (int j = 2; j <= 6; ++j) CHECK(max_warp_error(seq, j, 0, 0, 64, 64) == 0.0);
}

TEST_CASE("generator: whole-scene translation is exact away from the leading border") {
    SynthSpec spec;
    spec.w = 64;
    spec.h = 64;
    spec.frames = 4;
    spec.bg_period = 2;
    spec.bg_vx = 2.0;
    spec.shapes.push_back(square(24.0, 24.0, 8.0, 2.0, 0.0, 0.9f, 0.3f, 0.9f));
    Sequence seq = gen_synthetic(spec);
    // backward fetch looks left by 2, so skip the two leftmost columns
    for (int j = 2; j <= 4; ++j) CHECK(max_warp_error(seq, j, 2, 0, 64, 64) == 0.0);
}

TEST_CASE("generator: occlusion script empties the mask exactly on scripted frames") {
    SynthSpec spec;
    spec.w = 64;
    spec.h = 64;
    spec.frames = 8;
    spec.shapes.push_back(square(32.0, 20.0, 10.0, 0.0, 0.0, 0.9f, 0.1f, 0.1f));
    spec.shapes.push_back(square(16.0, 44.0, 8.0, 2.0, 0.0, 0.1f, 0.9f, 0.1f));
    spec.occlusions.push_back({1, 2, 4, 6});
    Sequence seq = gen_synthetic(spec);
    for (int j = 1; j <= 8; ++j) {
        const bool hidden = j >= 4 && j <= 6;
        CHECK(seq.gt_at(j).instance_mask(2).empty() == hidden);
        CHECK(!seq.gt_at(j).instance_mask(1).empty());
    }
}

TEST_CASE("generator: determinism and z-order") {
    SynthSpec spec;
    spec.w = 32;
    spec.h = 32;
    spec.frames = 3;
    spec.seed = 77;
    spec.shapes.push_back(square(16.0, 16.0, 10.0, 1.0, 0.0, 0.8f, 0.8f, 0.8f));
    spec.shapes.push_back(square(18.0, 16.0, 6.0, 1.0, 0.0, 0.2f, 0.2f, 0.9f));
    Sequence a = gen_synthetic(spec);
    Sequence b = gen_synthetic(spec);
    for (int j = 1; j <= 3; ++j) {
        CHECK(a.frame(j)->data == b.frame(j)->data);
        CHECK(a.gt_at(j) == b.gt_at(j));
    }
    // shape 2 sits on top of shape 1 where they overlap
    CHECK(a.gt_at(1).at(16, 18) == 2);
    CHECK(a.gt_at(1).at(16, 12) == 1);
}

TEST_CASE("generator: oversize shape raises a spec error") {
    SynthSpec spec;
    spec.w = 32;
    spec.h = 32;
    spec.frames = 2;
    spec.shapes.push_back(square(16.0, 16.0, 40.0, 0.0, 0.0, 1.0f, 1.0f, 1.0f));
    CHECK_THROWS_AS(gen_synthetic(spec), SpecError);

    // growth via scale_rate must also be caught
    SynthSpec grow;
    grow.w = 32;
    grow.h = 32;
    grow.frames = 10;
    ShapeSpec s = square(16.0, 16.0, 16.0, 0.0, 0.0, 1.0f, 1.0f, 1.0f);
    s.scale_rate = 0.2;
    grow.shapes.push_back(s);
    CHECK_THROWS_AS(gen_synthetic(grow), SpecError);
}

TEST_CASE("sequence: save then load round trips bit-exactly") {
    SynthSpec spec;
    spec.w = 64;
    spec.h = 64;
    spec.frames = 4;
    spec.name = "roundtrip";
    spec.shapes.push_back(square(20.0, 20.0, 8.0, 2.0, 1.0, 0.9f, 0.6f, 0.1f));
    Sequence seq = gen_synthetic(spec);
    const auto dir = (temp_dir() / "roundtrip").string();
    save_sequence(seq, dir);
    Sequence back = load_sequence(dir);
    REQUIRE(back.num_frames() == 4);
    CHECK(back.orig_h == 64);
    CHECK(back.orig_w == 64);
    for (int j = 1; j <= 4; ++j) {
        CHECK(back.frame(j)->data == seq.frame(j)->data);
        CHECK(back.gt_at(j) == seq.gt_at(j));
    }
    for (int j = 1; j <= 3; ++j) CHECK(back.flow_fw(j)->data == seq.flow_fw(j)->data);
    for (int j = 2; j <= 4; ++j) CHECK(back.flow_bw(j)->data == seq.flow_bw(j)->data);
}

TEST_CASE("sequence: 60x60 frames pad to 64x64 with background fill") {
    SynthSpec spec;
    spec.w = 60;
    spec.h = 60;
    spec.frames = 2;
    spec.name = "pad";
    spec.shapes.push_back(square(30.0, 30.0, 8.0, 1.0, 0.0, 0.9f, 0.1f, 0.9f));
    Sequence seq = gen_synthetic(spec);
    const auto dir = (temp_dir() / "pad").string();
    save_sequence(seq, dir);
    Sequence back = load_sequence(dir);
    CHECK(back.orig_h == 60);
    CHECK(back.orig_w == 60);
    CHECK(back.height() == 64);
    CHECK(back.width() == 64);
    CHECK(back.gt_at(1).at(62, 62) == 0);
    CHECK(back.frame(1)->at3(0, 62, 62) == 0.0f);
    CHECK(back.gt_at(1).at(30, 30) == 1);
}

TEST_CASE("sequence: non-contiguous ids are rejected naming the gap") {
    const auto dir = temp_dir() / "gap";
    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "masks");
    TensorF img(Shape{3, 16, 16}, 0.5f);
    InstanceMap m(16, 16);
    m.at(4, 4) = 1;
    m.at(8, 8) = 3;  // id 2 missing
    save_ppm((dir / "frames" / "00001.ppm").string(), img);
    save_pgm((dir / "masks" / "00001.pgm").string(), m);
    try {
        load_sequence(dir.string());
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("flow: zero mode, ground-truth mode, missing data") {
    SynthSpec spec;
    spec.w = 32;
    spec.h = 32;
    spec.frames = 3;
    spec.shapes.push_back(square(16.0, 16.0, 6.0, 1.0, 0.0, 0.9f, 0.9f, 0.9f));
    Sequence seq = gen_synthetic(spec);

    auto z = get_flow(seq, 1, 2, FlowMode::Zero);
    for (float v : z->data) CHECK(v == 0.0f);

    auto gt = get_flow(seq, 2, 1, FlowMode::GroundTruth);
    CHECK(gt->data == seq.flow_bw(2)->data);
    CHECK(get_flow(seq, 2, 3, FlowMode::GroundTruth)->data == seq.flow_fw(2)->data);

    Sequence bare = seq;
    bare.flow_fw_.clear();
    bare.flow_bw_.clear();
    CHECK_THROWS_AS(get_flow(bare, 1, 2, FlowMode::GroundTruth), MissingDataError);
    CHECK_THROWS_AS(get_flow(seq, 1, 3, FlowMode::GroundTruth), ContractViolation);
}

TEST_CASE("flow: block match recovers whole-scene translation (+2,0)") {
    SynthSpec spec;
    spec.w = 48;
    spec.h = 48;
    spec.frames = 2;
    spec.bg_period = 0;  // aperiodic texture so patches are unique
    spec.bg_vx = 2.0;
    spec.shapes.push_back(square(20.0, 20.0, 8.0, 2.0, 0.0, 0.95f, 0.95f, 0.1f));
    Sequence seq = gen_synthetic(spec);
    auto bm = block_match_flow(seq.frame(1), seq.frame(2));
    int agree = 0, interior = 0;
    for (int y = 8; y < 40; ++y)
        for (int x = 8; x < 38; ++x) {  // leading edge excluded
            ++interior;
            if (bm->at3(0, y, x) == 2.0f && bm->at3(1, y, x) == 0.0f) ++agree;
        }
    CHECK(agree == interior);
    // and it matches the stored ground truth on those pixels
    for (int y = 8; y < 40; ++y)
        for (int x = 8; x < 38; ++x) {
            CHECK(bm->at3(0, y, x) == seq.flow_fw(1)->at3(0, y, x));
            CHECK(bm->at3(1, y, x) == seq.flow_fw(1)->at3(1, y, x));
        }
}

TEST_CASE("flow: static pair block-matches to zero via tie-breaking") {
    SynthSpec spec;
    spec.w = 32;
    spec.h = 32;
    spec.frames = 2;
    spec.bg_period = 2;  // periodic: many perfect matches, smallest wins
    spec.shapes.push_back(square(16.0, 16.0, 8.0, 0.0, 0.0, 0.9f, 0.2f, 0.2f));
    Sequence seq = gen_synthetic(spec);
    auto bm = block_match_flow(seq.frame(1), seq.frame(2));
    for (float v : bm->data) CHECK(v == 0.0f);
}

TEST_CASE("flow: downsample by 8 averages and rescales") {
    TensorF f(Shape{2, 16, 16});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            f.at3(0, y, x) = 8.0f;                       // constant dx
            f.at3(1, y, x) = static_cast<float>(x < 8);  // left half dy=1
        }
    auto d = downsample_flow8(std::make_shared<TensorF>(f));
    CHECK(d->shape == Shape{2, 2, 2});
    CHECK(d->at3(0, 0, 0) == doctest::Approx(1.0f));    // 8 / 8
    CHECK(d->at3(1, 0, 0) == doctest::Approx(0.125f));  // mean 1 / 8
    CHECK(d->at3(1, 0, 1) == doctest::Approx(0.0f));
}

TEST_CASE("flow: roi_flow expresses identity when boxes follow the motion") {
    // uniform reverse flow (-3, 0); box_to is box_from shifted by +3
    auto flow = make_tensor<float>(Shape{2, 32, 32});
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) flow->at3(0, y, x) = -3.0f;
    auto feat_flow = downsample_flow8(flow);
    const Box from{8, 8, 16, 16};
    const Box to{11, 8, 19, 16};
    auto rf = roi_flow(feat_flow, from, to, 4);
    for (float v : rf->data) CHECK(std::abs(v) < 1e-6f);
}

TEST_CASE("flow: warp_mask shifts a mask by the reverse flow") {
    Mask m(8, 8);
    for (int y = 2; y < 5; ++y)
        for (int x = 2; x < 5; ++x) m.at(y, x) = 1;
    auto flow = make_tensor<float>(Shape{2, 8, 8});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) flow->at3(0, y, x) = -2.0f;  // shift right by 2
    Mask w = warp_mask(m, flow);
    CHECK(w.area() == 9);
    CHECK(w.at(3, 5) == 1);
    CHECK(w.at(3, 2) == 0);
}

TEST_CASE("proposals: static pair yields nothing, moving square yields its box") {
    SynthSpec spec;
    spec.w = 32;
    spec.h = 32;
    spec.frames = 3;
    spec.shapes.push_back(square(12.0, 16.0, 6.0, 6.0, 0.0, 0.95f, 0.95f, 0.95f));
    Sequence seq = gen_synthetic(spec);
    ProposalParams p;
    Rng rng(1);

    auto none = propose(seq.frame(1), seq.frame(1), nullptr, p, rng);
    CHECK(none.empty());

    // velocity equals the side, so old and new supports abut: one component
    auto boxes = propose(seq.frame(2), seq.frame(1), nullptr, p, rng);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].x0 == doctest::Approx(9.0));
    CHECK(boxes[0].x1 == doctest::Approx(21.0));
    CHECK(boxes[0].y0 == doctest::Approx(13.0));
    CHECK(boxes[0].y1 == doctest::Approx(19.0));
}

TEST_CASE("proposals: gt-jitter with zero noise recovers ground-truth boxes") {
    SynthSpec spec;
    spec.w = 32;
    spec.h = 32;
    spec.frames = 2;
    spec.shapes.push_back(square(10.0, 10.0, 6.0, 0.0, 0.0, 0.9f, 0.1f, 0.1f));
    spec.shapes.push_back(square(24.0, 22.0, 8.0, 0.0, 0.0, 0.1f, 0.9f, 0.1f));
    Sequence seq = gen_synthetic(spec);
    ProposalParams p;
    p.mode = ProposalMode::GtJitter;
    p.jitter_scale = 0.0;
    Rng rng(1);
    auto boxes = propose(seq.frame(1), nullptr, &seq.gt_at(1), p, rng);
    REQUIRE(boxes.size() == 2);
    CHECK(boxes[0].x0 == 7.0);
    CHECK(boxes[0].x1 == 13.0);
    CHECK(boxes[1].x0 == 20.0);
    CHECK(boxes[1].x1 == 28.0);
    CHECK_THROWS_AS(propose(seq.frame(1), nullptr, nullptr, p, rng), ContractViolation);
}

TEST_CASE("proposals: exhaustive grid count matches the tiling formula and enumeration") {
    auto frame = std::make_shared<TensorF>(Shape{3, 64, 64});
    ProposalParams p;
    p.mode = ProposalMode::ExhaustiveGrid;
    p.grid_sizes = {16, 32};
    p.grid_stride = 16;
    Rng rng(1);
    auto boxes = propose(frame, nullptr, nullptr, p, rng);
    // formula: per size s, (floor((64-s)/16)+1)^2 boxes
    int expect = 0;
    for (int s : {16, 32}) {
        const int per = (64 - s) / 16 + 1;
        expect += per * per;
    }
    CHECK(expect == 25);
    CHECK(static_cast<int>(boxes.size()) == expect);
    // explicit enumeration oracle: every anchor present exactly once
    int found = 0;
    for (int s : {16, 32})
        for (int y = 0; y + s <= 64; y += 16)
            for (int x = 0; x + s <= 64; x += 16)
                for (const Box& b : boxes)
                    if (b.x0 == x && b.y0 == y && b.x1 == x + s && b.y1 == y + s) ++found;
    CHECK(found == 25);
}

TEST_CASE("feature net: 64x64 -> d_feat x 8x8, zero frame maps to zero") {
    Rng rng(5);
    ParamStore<float> params;
    init_feature_net(params, 16, 4, rng);
    auto frame = make_tensor<float>(Shape{3, 64, 64}, 0.25f);
    auto f = extract_features<float>(nullptr, frame, params, 4);
    CHECK(f->shape == Shape{16, 8, 8});

    auto zero = make_tensor<float>(Shape{3, 64, 64});
    auto fz = extract_features<float>(nullptr, zero, params, 4);
    for (float v : fz->data) CHECK(v == 0.0f);  // zero biases, zero input

    auto again = extract_features<float>(nullptr, frame, params, 4);
    CHECK(again->data == f->data);  // determinism

    auto odd = make_tensor<float>(Shape{3, 60, 60});
    CHECK_THROWS_AS(extract_features<float>(nullptr, odd, params, 4), ContractViolation);
}

TEST_CASE("feature net: output shape law over random padded sizes") {
    Rng rng(6);
    ParamStore<float> params;
    init_feature_net(params, 8, 4, rng);
    for (int t = 0; t < 8; ++t) {
        const int H = 8 * (2 + static_cast<int>(rng.uniform_int(9)));
        const int W = 8 * (2 + static_cast<int>(rng.uniform_int(9)));
        auto frame = make_tensor<float>(Shape{3, H, W});
        for (auto& v : frame->data) v = static_cast<float>(rng.uniform());
        auto f = extract_features<float>(nullptr, frame, params, 4);
        CHECK(f->shape == Shape{8, H / 8, W / 8});
    }
}
