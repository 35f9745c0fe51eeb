#include "dyenet/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dyenet/errors.hpp"
#include "dyenet/feature_net.hpp"
#include "dyenet/flow.hpp"
#include "dyenet/geometry.hpp"
#include "dyenet/ops.hpp"
#include "dyenet/reid.hpp"
#include "dyenet/remp.hpp"

namespace dyenet {

void TrainConfig::validate() const {
    require(lambda >= 0.0, "train config: lambda must be >= 0");
    require(lr > 0.0, "train config: lr must be positive");
    require(lr_drop_factor > 1.0, "train config: lr_drop_factor must be > 1");
    require(lr_drop_every >= 0, "train config: lr_drop_every must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0, "train config: momentum must be in [0,1)");
    require(weight_decay >= 0.0, "train config: weight_decay must be >= 0");
    require(iterations > 0, "train config: iterations must be positive");
    require(batch_videos > 0, "train config: batch_videos must be positive");
    require(frames_per_video >= 2, "train config: frames_per_video must be >= 2");
    require(unroll >= 1 && unroll <= 3, "train config: unroll must be in 1..3");
    require(unroll <= frames_per_video - 1,
            "train config: unroll needs frames_per_video >= unroll + 1");
    require(feat_width > 0 && feat_depth >= 3,
            "train config: backbone needs width > 0 and depth >= 3");
    require(reid_width > 0 && embed_dim > 0 && hidden_dim > 0,
            "train config: head widths must be positive");
    require(m >= 2, "train config: roi resolution m must be >= 2");
    require(tau > 0.0, "train config: tau must be positive");
    require(mu >= 0.0 && mu <= 1.0, "train config: mu must be in [0,1]");
    require(box_margin >= 0.0, "train config: box_margin must be >= 0");
}

TrainConfig TrainConfig::from_config(const Config& c) {
    TrainConfig t;
    t.lambda = c.get_double("train.lambda");
    t.lr = c.get_double("train.lr");
    t.lr_drop_factor = c.get_double("train.lr_drop_factor");
    t.lr_drop_every = c.get_int("train.lr_drop_every");
    t.momentum = c.get_double("train.momentum");
    t.weight_decay = c.get_double("train.weight_decay");
    t.iterations = c.get_int("train.iterations");
    t.batch_videos = c.get_int("train.batch_videos");
    t.frames_per_video = c.get_int("train.frames_per_video");
    t.unroll = c.get_int("train.unroll");
    t.seed = static_cast<uint64_t>(c.get_int("train.seed"));
    t.use_reid = c.get_bool("train.use_reid");
    t.use_mask = c.get_bool("train.use_mask");
    t.use_remp = c.get_bool("train.use_remp");
    t.feat_width = c.get_int("feat.width");
    t.feat_depth = c.get_int("feat.depth");
    t.reid_width = c.get_int("reid.width");
    t.embed_dim = c.get_int("reid.embed_dim");
    t.m = c.get_int("reid.roi_m");
    t.hidden_dim = c.get_int("remp.hidden_dim");
    t.attention = c.get_bool("remp.attention");
    t.box_margin = c.get_double("remp.box_margin");
    t.tau = c.get_double("reid.tau");
    t.mu = c.get_double("reid.mu");
    t.validate();
    return t;
}

template <typename T>
TensorPtr<T> combine_losses(Tape<T>* tape, const TensorPtr<T>& reid, const TensorPtr<T>& mask,
                            const TensorPtr<T>& remp, double lambda) {
    auto aux = ops::scale<T>(tape, ops::add<T>(tape, mask, remp), lambda);
    return ops::add<T>(tape, reid, aux);
}

template <typename T>
JointLoss<T> compute_joint_loss(Tape<T>* tape, const TrainBatch& batch,
                                const ParamStore<T>& params, const Tensor<T>& lut,
                                Tensor<T>* updated_lut, const TrainConfig& cfg) {
    require(!batch.samples.empty(), "joint loss: empty batch");

    std::vector<TensorPtr<T>> embeddings;
    std::vector<int> labels;
    std::vector<TensorPtr<T>> mask_terms, remp_terms;
    // Diverged parameters overflow the activations, and the wreckage can
    // surface as a non-finite or non-unit embedding before the loss value
    // itself goes bad. That must read as divergence, not as a contract
    // violation out of oim_loss, so it is flagged here and turned into a NaN
    // reid loss for the trainer's finiteness check to catch.
    bool numeric_blowup = false;

    for (const auto& s : batch.samples) {
        require(s.seq != nullptr, "joint loss: sample without a sequence");
        const Sequence& seq = *s.seq;
        require(seq.has_gt(), "joint loss: sequence '" + seq.name + "' has no ground truth");
        require(s.frame >= 1 && s.frame + s.num_frames - 1 <= seq.num_frames(),
                "joint loss: window outside the sequence");
        require(s.num_frames >= cfg.unroll + 1, "joint loss: window shorter than unroll + 1");
        const int W = seq.width(), H = seq.height();
        const int K = seq.num_identities();

        std::vector<TensorPtr<T>> feats;
        for (int j = 0; j < s.num_frames; ++j) {
            auto frame = cast_tensor<T>(*seq.frame(s.frame + j));
            feats.push_back(extract_features<T>(tape, frame, params, cfg.feat_depth));
        }

        for (int j = 0; j < s.num_frames; ++j) {
            const InstanceMap& gt = seq.gt_at(s.frame + j);
            for (int k = 1; k <= K; ++k) {
                const Mask mk = gt.instance_mask(k);
                if (mk.empty()) continue;
                const Box box = propagation_box(mk, cfg.box_margin, W, H);
                auto roi = roi_align<T>(tape, feats[j], box, cfg.m);
                if (cfg.use_mask) {
                    auto logits = mask_head_logits<T>(tape, roi, params);
                    auto target = cast_tensor<T>(*roi_rasterize(mk, box, cfg.m));
                    mask_terms.push_back(ops::bce_with_logits_mean<T>(tape, logits, target));
                }
                if (cfg.use_reid) {
                    try {
                        auto e = embed_head<T>(tape, roi, params);
                        double n2 = 0.0;
                        bool finite = true;
                        for (T v : e->data) {
                            if (!std::isfinite(static_cast<double>(v))) finite = false;
                            n2 += static_cast<double>(v) * static_cast<double>(v);
                        }
                        if (finite && std::abs(std::sqrt(n2) - 1.0) < 1e-3) {
                            embeddings.push_back(e);
                            labels.push_back(s.label_base + k - 1);
                        } else {
                            numeric_blowup = true;
                        }
                    } catch (const DegenerateEmbedding&) {
                        // reject the proposal, keep the batch
                    }
                }
            }
        }

        if (cfg.use_remp) {
            require(seq.has_flow(),
                    "joint loss: L_remp needs flow for sequence '" + seq.name + "'");
            const InstanceMap& gt1 = seq.gt_at(s.frame);
            for (int k = 1; k <= K; ++k) {
                const Mask mk = gt1.instance_mask(k);
                if (mk.empty()) continue;  // teacher forcing needs a visible start
                const Box box = propagation_box(mk, cfg.box_margin, W, H);
                auto zero = make_tensor<T>(Shape{cfg.hidden_dim, cfg.m, cfg.m});
                auto h = recurrent_net<T>(tape, zero, roi_align<T>(tape, feats[0], box, cfg.m),
                                          params);
                for (int u = 1; u <= cfg.unroll; ++u) {
                    auto rf = cast_tensor<T>(
                        *roi_flow(downsample_flow8(seq.flow_bw(s.frame + u)), box, box, cfg.m));
                    auto step = remp_step_logits<T>(tape, h, roi_align<T>(tape, feats[u], box, cfg.m),
                                                    rf, params, cfg.attention);
                    const Mask next = seq.gt_at(s.frame + u).instance_mask(k);
                    auto target = cast_tensor<T>(*roi_rasterize(next, box, cfg.m));
                    remp_terms.push_back(
                        ops::bce_with_logits_mean<T>(tape, step.logits, target));
                    h = step.hidden;
                }
            }
        }
    }

    require(!cfg.use_reid || !embeddings.empty() || numeric_blowup,
            "joint loss: reid enabled but the batch has no usable instance");
    require(!cfg.use_mask || !mask_terms.empty(),
            "joint loss: mask head enabled but the batch has no instance box");
    require(!cfg.use_remp || !remp_terms.empty(),
            "joint loss: propagation enabled but no window starts with a visible instance");

    auto zero_scalar = [] { return make_tensor<T>(Shape::scalar()); };
    TensorPtr<T> l_reid;
    if (!cfg.use_reid) {
        l_reid = zero_scalar();
    } else if (numeric_blowup) {
        l_reid = zero_scalar();
        l_reid->data[0] = std::numeric_limits<T>::quiet_NaN();
    } else {
        l_reid = oim_loss<T>(tape, embeddings, labels, lut, cfg.tau, cfg.mu, updated_lut);
    }
    JointLoss<T> out;
    auto l_mask = cfg.use_mask ? ops::mean_of<T>(tape, mask_terms) : zero_scalar();
    auto l_remp = cfg.use_remp ? ops::mean_of<T>(tape, remp_terms) : zero_scalar();
    out.total = combine_losses<T>(tape, l_reid, l_mask, l_remp, cfg.lambda);
    out.reid = static_cast<double>(l_reid->data[0]);
    out.mask = static_cast<double>(l_mask->data[0]);
    out.remp = static_cast<double>(l_remp->data[0]);
    return out;
}

ParamStore<float> init_dyenet_params(const TrainConfig& cfg, Rng& rng) {
    ParamStore<float> params;
    init_feature_net<float>(params, cfg.feat_width, cfg.feat_depth, rng);
    init_reid_heads<float>(params, cfg.feat_width, cfg.reid_width, cfg.embed_dim, rng);
    init_remp_net<float>(params, cfg.feat_width, cfg.hidden_dim, rng);
    return params;
}

TrainResult train(const std::vector<Sequence>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    require(!dataset.empty(), "train: empty dataset");
    for (const auto& s : dataset) {
        require(s.has_gt(), "train: sequence '" + s.name + "' has no ground truth");
        require(!cfg.use_remp || s.has_flow(),
                "train: sequence '" + s.name + "' has no flow");
        require(s.num_frames() >= cfg.frames_per_video,
                "train: sequence '" + s.name + "' is shorter than frames_per_video");
    }
    std::vector<int> label_base(dataset.size(), 0);
    int total_ids = 0;
    for (size_t i = 0; i < dataset.size(); ++i) {
        label_base[i] = total_ids;
        total_ids += dataset[i].num_identities();
    }
    require(total_ids > 0, "train: dataset has no instances");

    Rng rng(cfg.seed);
    ParamStore<float> params = init_dyenet_params(cfg, rng);
    for (const auto& p : cfg.frozen) params.freeze_group(p);
    if (!cfg.use_reid) params.freeze_group("reid.embed.");
    if (!cfg.use_mask) params.freeze_group("reid.mask.");
    if (!cfg.use_remp) params.freeze_group("remp.");
    if (cfg.use_remp && !cfg.attention) params.freeze_group("remp.att.");
    Tensor<float> lut = make_oim_lut<float>(total_ids, cfg.embed_dim, rng);

    const int drop_every =
        cfg.lr_drop_every > 0 ? cfg.lr_drop_every : std::max(1, cfg.iterations / 3);

    TrainResult out;
    out.curve.reserve(static_cast<size_t>(cfg.iterations));
    for (int step = 0; step < cfg.iterations; ++step) {
        TrainBatch batch;
        for (int b = 0; b < cfg.batch_videos; ++b) {
            int si = 0, f = 1;
            bool ok = false;
            for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
                si = rng.uniform_int(static_cast<int>(dataset.size()));
                f = 1 + rng.uniform_int(dataset[si].num_frames() - cfg.frames_per_video + 1);
                // every loss component can anchor on the window's first frame
                ok = dataset[si].gt_at(f).max_id() > 0;
            }
            require(ok, "train: no sampled window starts with a visible instance");
            batch.samples.push_back({&dataset[si], f, cfg.frames_per_video, label_base[si]});
        }

        const double lr = cfg.lr / std::pow(cfg.lr_drop_factor, step / drop_every);
        Tape<float> tape;
        Tensor<float> new_lut;
        JointLoss<float> jl = compute_joint_loss<float>(
            &tape, batch, params, lut, cfg.use_reid ? &new_lut : nullptr, cfg);
        if (!std::isfinite(jl.total->data[0]))
            throw TrainingDiverged(step,
                                   "train: loss is not finite at step " + std::to_string(step));
        tape.backward(jl.total);
        sgd_momentum_step(params, lr, cfg.momentum, cfg.weight_decay);
        if (cfg.use_reid) lut = std::move(new_lut);
        out.curve.push_back(
            {step, static_cast<double>(jl.total->data[0]), jl.reid, jl.mask, jl.remp});
    }
    out.params = std::move(params);
    return out;
}

void write_loss_csv(const std::string& path, const std::vector<LossRow>& curve) {
    std::ofstream f(path);
    if (!f) throw IoError("loss csv: cannot open '" + path + "' for writing");
    f << "step,L,L_reid,L_mask,L_remp\n";
    char line[160];
    for (const auto& r : curve) {
        std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", r.step, r.total, r.reid,
                      r.mask, r.remp);
        f << line;
    }
    if (!f) throw IoError("loss csv: write to '" + path + "' failed");
}

template TensorPtr<float> combine_losses<float>(Tape<float>*, const TensorPtr<float>&,
                                                const TensorPtr<float>&, const TensorPtr<float>&,
                                                double);
template TensorPtr<double> combine_losses<double>(Tape<double>*, const TensorPtr<double>&,
                                                  const TensorPtr<double>&,
                                                  const TensorPtr<double>&, double);
template JointLoss<float> compute_joint_loss<float>(Tape<float>*, const TrainBatch&,
                                                    const ParamStore<float>&, const Tensor<float>&,
                                                    Tensor<float>*, const TrainConfig&);
template JointLoss<double> compute_joint_loss<double>(Tape<double>*, const TrainBatch&,
                                                      const ParamStore<double>&,
                                                      const Tensor<double>&, Tensor<double>*,
                                                      const TrainConfig&);

}  // namespace dyenet
