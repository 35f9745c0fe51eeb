#pragma once

#include <string>
#include <vector>

#include "dyenet/config.hpp"
#include "dyenet/param_store.hpp"
#include "dyenet/sequence.hpp"
#include "dyenet/tape.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// Joint training of the backbone, the reid heads, and the propagation cell
// under L = L_reid + lambda * (L_mask + L_remp). L_reid is the OIM loss over
// ground-truth-box embeddings, L_mask the BCE of the mask head against
// rasterized gt rois, L_remp the BCE of teacher-forced propagation steps
// against the next frames' gt.

struct TrainConfig {
    double lambda = 1.0;
    double lr = 1e-3;
    double lr_drop_factor = 10.0;
    int lr_drop_every = 0;  // steps between lr drops; 0 = iterations/3
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int iterations = 2000;
    int batch_videos = 2;
    int frames_per_video = 2;
    int unroll = 1;  // teacher-forced steps per L_remp chain, 1..3
    uint64_t seed = 1;
    bool use_reid = true, use_mask = true, use_remp = true;
    std::vector<std::string> frozen;  // parameter prefixes excluded from updates

    // network dimensions, shared with inference
    int feat_width = 32, feat_depth = 4;
    int reid_width = 32, embed_dim = 256, m = 14;
    int hidden_dim = 32;
    bool attention = true;
    double box_margin = 0.2;
    double tau = 0.1, mu = 0.5;  // OIM temperature / lookup-table momentum

    void validate() const;
    static TrainConfig from_config(const Config& cfg);
};

// One training window: frames [frame .. frame + num_frames - 1] of *seq.
// label_base maps the sequence's identities onto global OIM rows.
struct TrainSample {
    const Sequence* seq = nullptr;
    int frame = 1;
    int num_frames = 2;
    int label_base = 0;
};

struct TrainBatch {
    std::vector<TrainSample> samples;
};

// L = reid + lambda * (mask + remp), recorded on the tape.
template <typename T>
TensorPtr<T> combine_losses(Tape<T>* tape, const TensorPtr<T>& reid, const TensorPtr<T>& mask,
                            const TensorPtr<T>& remp, double lambda);

template <typename T>
struct JointLoss {
    TensorPtr<T> total;  // scalar node; backward() reaches every live parameter
    double reid = 0.0, mask = 0.0, remp = 0.0;
};

// Builds the batch loss. Boxes are derived from ground-truth masks (dilated
// by box_margin), so the graph's sampling locations never depend on the
// parameters. Disabled components contribute a constant zero. updated_lut
// (when non-null) receives the OIM table after this batch's running-mean
// updates; the input lut itself is untouched.
template <typename T>
JointLoss<T> compute_joint_loss(Tape<T>* tape, const TrainBatch& batch,
                                const ParamStore<T>& params, const Tensor<T>& lut,
                                Tensor<T>* updated_lut, const TrainConfig& cfg);

// Fresh Kaiming-initialized parameter set for the configured dimensions.
ParamStore<float> init_dyenet_params(const TrainConfig& cfg, Rng& rng);

struct LossRow {
    int step = 0;
    double total = 0.0, reid = 0.0, mask = 0.0, remp = 0.0;
};

struct TrainResult {
    ParamStore<float> params;
    std::vector<LossRow> curve;
};

// SGD with momentum over cfg.iterations sampled batches; the lr divides by
// lr_drop_factor every drop interval. Deterministic given cfg.seed. Throws
// TrainingDiverged when the loss stops being finite.
TrainResult train(const std::vector<Sequence>& dataset, const TrainConfig& cfg);

// step,L,L_reid,L_mask,L_remp rows with 6-decimal values.
void write_loss_csv(const std::string& path, const std::vector<LossRow>& curve);

}  // namespace dyenet
