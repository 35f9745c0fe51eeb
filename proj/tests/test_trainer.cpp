#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dyenet/errors.hpp"
#include "dyenet/reid.hpp"
#include "dyenet/synth.hpp"
#include "dyenet/trainer.hpp"
#include "test_util.hpp"

using namespace dyenet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "dyenet_test_trainer";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

ShapeSpec square(double cx, double cy, double size, double vx, double vy, float r, float g,
                 float b) {
    ShapeSpec s;
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

// two moving squares on a 16x16 textured background, two frames
Sequence tiny_seq() {
    SynthSpec sp;
    sp.name = "tiny";
    sp.w = 16;
    sp.h = 16;
    sp.frames = 2;
    sp.bg_period = 2;
    sp.seed = 5;
    sp.shapes = {square(5.0, 5.0, 5.0, 1.0, 0.0, 0.9f, 0.3f, 0.2f),
                 square(11.0, 10.0, 4.0, -1.0, 0.0, 0.2f, 0.5f, 0.9f)};
    return gen_synthetic(sp);
}

TrainConfig tiny_cfg() {
    TrainConfig c;
    c.feat_width = 4;
    c.feat_depth = 3;
    c.reid_width = 4;
    c.embed_dim = 4;
    c.m = 4;
    c.hidden_dim = 4;
    c.unroll = 1;
    c.tau = 0.2;
    return c;
}

// 8-frame clip with two squares for the short-training cases
Sequence trend_seq() {
    SynthSpec sp;
    sp.name = "trend";
    sp.w = 32;
    sp.h = 32;
    sp.frames = 8;
    sp.bg_period = 2;
    sp.seed = 11;
    sp.shapes = {square(8.0, 8.0, 7.0, 1.0, 0.5, 0.9f, 0.3f, 0.2f),
                 square(22.0, 20.0, 6.0, -1.0, 0.0, 0.2f, 0.5f, 0.9f)};
    return gen_synthetic(sp);
}

TrainConfig trend_cfg() {
    TrainConfig c;
    c.feat_width = 8;
    c.feat_depth = 3;
    c.reid_width = 8;
    c.embed_dim = 8;
    c.m = 6;
    c.hidden_dim = 8;
    c.unroll = 1;
    c.lr = 0.01;
    c.iterations = 200;
    return c;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST_CASE("combine_losses arithmetic") {
    auto c = [](double v) {
        auto t = make_tensor<float>(Shape::scalar());
        t->data[0] = static_cast<float>(v);
        return t;
    };
    Tape<float> tape;
    CHECK(combine_losses<float>(&tape, c(1.0), c(2.0), c(3.0), 1.0)->data[0] == 6.0f);
    CHECK(combine_losses<float>(&tape, c(1.0), c(2.0), c(3.0), 0.0)->data[0] == 1.0f);
    CHECK(combine_losses<float>(&tape, c(1.0), c(2.0), c(3.0), 2.0)->data[0] == 11.0f);
    CHECK(combine_losses<float>(&tape, c(0.5), c(0.25), c(0.25), 0.5)->data[0] == 0.75f);
}

TEST_CASE("joint loss: components combine per the formula and lambda=0 is reid exactly") {
    const Sequence seq = tiny_seq();
    TrainConfig cfg = tiny_cfg();
    Rng rng(21);
    ParamStore<float> params = init_dyenet_params(cfg, rng);
    Tensor<float> lut = make_oim_lut<float>(2, cfg.embed_dim, rng);
    TrainBatch batch;
    batch.samples.push_back({&seq, 1, 2, 0});

    cfg.lambda = 2.0;
    Tape<float> tape;
    auto jl = compute_joint_loss<float>(&tape, batch, params, lut, nullptr, cfg);
    CHECK(jl.reid > 0.0);
    CHECK(jl.mask > 0.0);
    CHECK(jl.remp > 0.0);
    CHECK(static_cast<double>(jl.total->data[0]) ==
          doctest::Approx(jl.reid + 2.0 * (jl.mask + jl.remp)).epsilon(1e-6));

    cfg.lambda = 0.0;
    Tape<float> tape0;
    auto jl0 = compute_joint_loss<float>(&tape0, batch, params, lut, nullptr, cfg);
    CHECK(jl0.total->data[0] == static_cast<float>(jl0.reid));

    // the lut update is written to the side table, never to the input
    Tensor<float> before = lut;
    Tensor<float> updated;
    Tape<float> tape1;
    compute_joint_loss<float>(&tape1, batch, params, lut, &updated, cfg);
    CHECK(lut.data == before.data);
    CHECK(updated.data.size() == lut.data.size());
    CHECK(updated.data != before.data);
}

TEST_CASE("joint loss: end-to-end gradient matches finite differences") {
    const Sequence seq = tiny_seq();
    TrainConfig cfg = tiny_cfg();
    Rng rng(31);
    ParamStore<double> params = init_dyenet_params(cfg, rng).cast<double>();
    const Tensor<double> lut = make_oim_lut<double>(2, cfg.embed_dim, rng);
    TrainBatch batch;
    batch.samples.push_back({&seq, 1, 2, 0});

    std::vector<TensorPtr<double>> leaves;
    for (auto& kv : params.params) leaves.push_back(kv.second);
    auto graph = [&](Tape<double>* tape) {
        return compute_joint_loss<double>(tape, batch, params, lut, nullptr, cfg).total;
    };
    const double err = testutil::max_fd_rel_error_kinked(leaves, graph);
    CHECK(err < 1e-3);
}

TEST_CASE("joint loss: gradients of the auxiliary heads scale linearly with lambda") {
    const Sequence seq = tiny_seq();
    TrainConfig cfg = tiny_cfg();
    Rng rng(41);
    ParamStore<float> params = init_dyenet_params(cfg, rng);
    Tensor<float> lut = make_oim_lut<float>(2, cfg.embed_dim, rng);
    TrainBatch batch;
    batch.samples.push_back({&seq, 1, 2, 0});

    auto grads_at = [&](double lambda, const std::string& key) {
        cfg.lambda = lambda;
        params.clear_grads();
        Tape<float> tape;
        auto jl = compute_joint_loss<float>(&tape, batch, params, lut, nullptr, cfg);
        tape.backward(jl.total);
        return params.at(key)->grad;
    };
    for (const std::string key :
         {std::string("reid.mask.conv1.w"), std::string("remp.no.conv3.w")}) {
        const auto g05 = grads_at(0.5, key);
        const auto g1 = grads_at(1.0, key);
        const auto g2 = grads_at(2.0, key);
        REQUIRE(g1.size() > 0);
        for (size_t i = 0; i < g1.size(); ++i) {
            CHECK(static_cast<double>(g05[i]) * 2.0 ==
                  doctest::Approx(static_cast<double>(g1[i])).epsilon(1e-4));
            CHECK(static_cast<double>(g2[i]) ==
                  doctest::Approx(2.0 * static_cast<double>(g1[i])).epsilon(1e-4));
        }
    }
    // the reid branch is outside the lambda factor: its head's gradients are
    // identical across lambda
    const auto e05 = grads_at(0.5, "reid.embed.fc.w");
    const auto e2 = grads_at(2.0, "reid.embed.fc.w");
    for (size_t i = 0; i < e05.size(); ++i) CHECK(e05[i] == e2[i]);
}

TEST_CASE("joint loss: supervision contract violations") {
    const Sequence seq = tiny_seq();
    TrainConfig cfg = tiny_cfg();
    Rng rng(51);
    ParamStore<float> params = init_dyenet_params(cfg, rng);
    Tensor<float> lut = make_oim_lut<float>(2, cfg.embed_dim, rng);

    Tape<float> tape;
    TrainBatch empty;
    CHECK_THROWS_AS(compute_joint_loss<float>(&tape, empty, params, lut, nullptr, cfg),
                    ContractViolation);

    Sequence nogt = seq;
    nogt.gt.clear();
    TrainBatch b1;
    b1.samples.push_back({&nogt, 1, 2, 0});
    CHECK_THROWS_AS(compute_joint_loss<float>(&tape, b1, params, lut, nullptr, cfg),
                    ContractViolation);

    Sequence noflow = seq;
    noflow.flow_fw_.clear();
    noflow.flow_bw_.clear();
    TrainBatch b2;
    b2.samples.push_back({&noflow, 1, 2, 0});
    CHECK_THROWS_AS(compute_joint_loss<float>(&tape, b2, params, lut, nullptr, cfg),
                    ContractViolation);

    // a window with no visible instance has no supervision to offer
    Sequence blank;
    blank.name = "blank";
    for (int j = 0; j < 2; ++j) {
        blank.frames.push_back(make_tensor<float>(Shape{3, 16, 16}));
        blank.gt.push_back(InstanceMap(16, 16));
    }
    TrainConfig mask_only = cfg;
    mask_only.use_reid = false;
    mask_only.use_remp = false;
    TrainBatch b3;
    b3.samples.push_back({&blank, 1, 2, 0});
    CHECK_THROWS_AS(compute_joint_loss<float>(&tape, b3, params, lut, nullptr, mask_only),
                    ContractViolation);
}

TEST_CASE("train config: validation and config round trip") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    TrainConfig bad = c;
    bad.lr_drop_factor = 1.0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.unroll = 0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.unroll = 3;  // needs frames_per_video >= 4
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.momentum = 1.0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.iterations = 0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);

    Config file;
    TrainConfig t = TrainConfig::from_config(file);
    CHECK(t.lambda == 1.0);
    CHECK(t.lr == 0.001);
    CHECK(t.lr_drop_factor == 10.0);
    CHECK(t.lr_drop_every == 0);
    CHECK(t.momentum == 0.9);
    CHECK(t.weight_decay == 0.0005);
    CHECK(t.iterations == 2000);
    CHECK(t.batch_videos == 2);
    CHECK(t.frames_per_video == 2);
    CHECK(t.unroll == 1);
    CHECK(t.seed == 1);
    CHECK(t.use_reid);
    CHECK(t.use_mask);
    CHECK(t.use_remp);
    CHECK(t.feat_width == 32);
    CHECK(t.feat_depth == 4);
    CHECK(t.reid_width == 32);
    CHECK(t.embed_dim == 256);
    CHECK(t.m == 14);
    CHECK(t.hidden_dim == 32);
    CHECK(t.attention);
    CHECK(t.box_margin == 0.2);
    CHECK(t.tau == 0.1);
    CHECK(t.mu == 0.5);

    file.set("remp.attention", "off");
    file.set("train.lambda", "0.25");
    TrainConfig t2 = TrainConfig::from_config(file);
    CHECK_FALSE(t2.attention);
    CHECK(t2.lambda == 0.25);
}

TEST_CASE("train: loss trends downward over the first 200 steps") {
    const std::vector<Sequence> dataset = {trend_seq()};
    const TrainConfig cfg = trend_cfg();
    const TrainResult res = train(dataset, cfg);
    REQUIRE(res.curve.size() == 200);
    std::vector<double> first, last;
    for (int i = 0; i < 50; ++i) first.push_back(res.curve[i].total);
    for (int i = 150; i < 200; ++i) last.push_back(res.curve[i].total);
    CHECK(median(last) < median(first));
    for (const auto& r : res.curve) {
        CHECK(std::isfinite(r.total));
        CHECK(r.total == doctest::Approx(r.reid + cfg.lambda * (r.mask + r.remp)).epsilon(1e-5));
    }
}

TEST_CASE("train: deterministic given the seed") {
    const std::vector<Sequence> dataset = {trend_seq()};
    TrainConfig cfg = trend_cfg();
    cfg.iterations = 40;
    const TrainResult a = train(dataset, cfg);
    const TrainResult b = train(dataset, cfg);
    REQUIRE(a.curve.size() == b.curve.size());
    for (size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].total == b.curve[i].total);
        CHECK(a.curve[i].reid == b.curve[i].reid);
        CHECK(a.curve[i].mask == b.curve[i].mask);
        CHECK(a.curve[i].remp == b.curve[i].remp);
    }
    for (const auto& kv : a.params.params)
        CHECK(kv.second->data == b.params.at(kv.first)->data);
}

TEST_CASE("train: frozen prefixes keep their initial values") {
    const std::vector<Sequence> dataset = {trend_seq()};
    TrainConfig cfg = trend_cfg();
    cfg.iterations = 30;
    cfg.frozen = {"feat."};
    const TrainResult res = train(dataset, cfg);

    Rng rng(cfg.seed);
    const ParamStore<float> init = init_dyenet_params(cfg, rng);
    bool some_feat = false, some_moved = false;
    for (const auto& kv : init.params) {
        if (kv.first.rfind("feat.", 0) == 0) {
            some_feat = true;
            CHECK(res.params.at(kv.first)->data == kv.second->data);
        } else if (res.params.at(kv.first)->data != kv.second->data) {
            some_moved = true;
        }
    }
    CHECK(some_feat);
    CHECK(some_moved);
}

TEST_CASE("train: reid ablation freezes the embed head and zeroes its loss") {
    const std::vector<Sequence> dataset = {trend_seq()};
    TrainConfig cfg = trend_cfg();
    cfg.iterations = 20;
    cfg.use_reid = false;
    const TrainResult res = train(dataset, cfg);
    for (const auto& r : res.curve) {
        CHECK(r.reid == 0.0);
        CHECK(r.total == doctest::Approx(r.mask + r.remp).epsilon(1e-6));
    }
    Rng rng(cfg.seed);
    const ParamStore<float> init = init_dyenet_params(cfg, rng);
    for (const auto& kv : init.params)
        if (kv.first.rfind("reid.embed.", 0) == 0)
            CHECK(res.params.at(kv.first)->data == kv.second->data);
}

TEST_CASE("train: a blown-up learning rate raises TrainingDiverged with the step") {
    const std::vector<Sequence> dataset = {trend_seq()};
    TrainConfig cfg = trend_cfg();
    cfg.iterations = 60;
    cfg.lr = 1e8;
    bool thrown = false;
    try {
        train(dataset, cfg);
    } catch (const TrainingDiverged& e) {
        thrown = true;
        CHECK(e.step >= 0);
        CHECK(e.step < 60);
    }
    CHECK(thrown);
}

TEST_CASE("loss curve CSV emitter") {
    const std::vector<LossRow> curve = {{0, 2.5, 1.0, 0.75, 0.75}, {1, 2.0, 0.8, 0.7, 0.5}};
    const auto path = (temp_dir() / "curve.csv").string();
    write_loss_csv(path, curve);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,L,L_reid,L_mask,L_remp");
    std::getline(in, line);
    CHECK(line == "0,2.500000,1.000000,0.750000,0.750000");
    std::getline(in, line);
    CHECK(line == "1,2.000000,0.800000,0.700000,0.500000");
    CHECK_THROWS_AS(write_loss_csv((temp_dir() / "no_dir" / "x.csv").string(), curve), IoError);
}
