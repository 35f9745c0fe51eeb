#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyenet/config.hpp"
#include "dyenet/flow.hpp"
#include "dyenet/linker.hpp"
#include "dyenet/param_store.hpp"
#include "dyenet/proposals.hpp"
#include "dyenet/reid.hpp"
#include "dyenet/remp.hpp"
#include "dyenet/sequence.hpp"

namespace dyenet {

// The outer DyeNet loop: re-identification turns proposals into starting
// points, recurrent propagation grows them into tracklets, linking assembles
// mask tubes, and confident matches expand the template set so the next
// round can re-identify appearances the first-frame templates missed.

struct InferenceConfig {
    double rho_reid = 0.7;
    double rho_expand = -1.0;  // template-expansion threshold; -1 = use rho_reid
    int max_iters = 4;
    bool use_reid = true;  // off: propagation-only ablation, first-frame starts only
    double theta_skip = 0.8;
    double theta_agree = 0.5;
    int feat_depth = 4;
    ProposalParams proposals;
    RempConfig remp;  // remp.m doubles as the reid roi resolution
    FlowMode flow_mode = FlowMode::GroundTruth;
    uint64_t seed = 1;  // consumed only by stochastic proposal modes

    double expand_threshold() const { return rho_expand < 0.0 ? rho_reid : rho_expand; }
    void validate() const;
    static InferenceConfig from_config(const Config& cfg);
};

// One row per iteration. Counts are cumulative where noted; precision/recall
// stay -1 when the sequence carries no ground truth. A starting point counts
// as correct when its mask overlaps the ground-truth mask of its identity on
// its frame with IoU >= 0.5.
struct IterationReport {
    int iteration = 0;            // 1-based
    int proposals_matched = 0;    // re-id matches above rho_reid this iteration
    int new_starting_points = 0;  // accepted after dedup and propagated this iteration
    int tracklets = 0;            // cumulative tracklet count
    int templates = 0;            // template set size after this iteration's expansion
    double sp_precision = -1.0;   // correct starting points / all propagated (cumulative)
    double sp_recall = -1.0;      // covered gt (identity, frame) pairs / all such pairs
};

struct DyeNetResult {
    std::vector<MaskTube> tubes;
    std::vector<IterationReport> iterations;
    TemplateSet templates;            // final set: first-frame entries + expansions
    std::vector<Tracklet> tracklets;  // everything propagated, in creation order
};

// Per-identity masks of frame 1, for seeding run_dyenet from an annotated
// sequence. Every identity must be visible on the first frame.
std::vector<Mask> first_frame_masks(const Sequence& seq);

// Iteration t: (1) features are extracted once and cached; (2) boxes are
// proposed on frames 2..N (the first frame's instances are given, so a
// tracklet whose origin sits on frame 1 is always a seed); (3) every
// proposal's embedding is matched against the current template set at
// rho_reid, skipping proposals already covered by a tracklet mask on the
// same frame with IoU >= theta_skip; (4) each surviving starting point is
// propagated bidirectionally; (5) tracklets are linked into tubes; (6) the
// embedding of every newly matched starting point with similarity >=
// rho_expand joins the template set with provenance t. The loop stops when
// an iteration propagates no new starting point or after max_iters rounds.
// Proposal masks and embeddings depend only on the parameters, so they are
// computed once and re-matched as the template set grows.
DyeNetResult run_dyenet(const Sequence& seq, const std::vector<Mask>& first_frame_masks,
                        const ParamStore<float>& params, const InferenceConfig& cfg);

std::string iteration_report_csv(const std::vector<IterationReport>& rows);

}  // namespace dyenet
