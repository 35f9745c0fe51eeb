#include "dyenet/driver.hpp"

#include <cstdio>
#include <set>
#include <utility>

#include "dyenet/errors.hpp"
#include "dyenet/feature_net.hpp"

namespace dyenet {

void InferenceConfig::validate() const {
    require(rho_reid > 0.0 && rho_reid < 1.0, "inference: rho_reid must lie in (0,1)");
    require(rho_expand == -1.0 || (rho_expand > 0.0 && rho_expand <= 1.0),
            "inference: rho_expand must be -1 or lie in (0,1]");
    require(max_iters >= 1, "inference: max_iters must be >= 1");
    require(theta_skip > 0.0 && theta_skip <= 1.0, "inference: theta_skip must lie in (0,1]");
    require(theta_agree > 0.0 && theta_agree <= 1.0, "inference: theta_agree must lie in (0,1]");
    require(feat_depth >= 3, "inference: feature depth must be >= 3");
    require(remp.m >= 2, "inference: roi resolution must be >= 2");
    require(remp.hidden_dim >= 1, "inference: hidden_dim must be >= 1");
    require(remp.theta_abort > 0.0 && remp.theta_abort < 1.0,
            "inference: theta_abort must lie in (0,1)");
    require(remp.box_margin >= 0.0, "inference: box_margin must be >= 0");
}

InferenceConfig InferenceConfig::from_config(const Config& c) {
    InferenceConfig cfg;
    cfg.rho_reid = c.get_double("reid.rho");
    cfg.rho_expand = c.get_double("infer.rho_expand");
    cfg.max_iters = c.get_int("infer.max_iters");
    cfg.use_reid = c.get_bool("infer.reid");
    cfg.theta_skip = c.get_double("link.theta_skip");
    cfg.theta_agree = c.get_double("link.theta_agree");
    cfg.feat_depth = c.get_int("feat.depth");
    cfg.proposals.mode = parse_proposal_mode(c.get_string("proposals.mode"));
    cfg.proposals.diff_threshold = c.get_double("proposals.diff_threshold");
    cfg.proposals.jitter_scale = c.get_double("proposals.jitter_scale");
    cfg.proposals.grid_sizes = c.get_int_list("proposals.grid_sizes");
    cfg.proposals.grid_stride = c.get_int("proposals.grid_stride");
    cfg.remp.m = c.get_int("reid.roi_m");
    cfg.remp.hidden_dim = c.get_int("remp.hidden_dim");
    cfg.remp.theta_abort = c.get_double("remp.theta_abort");
    cfg.remp.box_margin = c.get_double("remp.box_margin");
    cfg.remp.attention = c.get_bool("remp.attention");
    cfg.flow_mode = parse_flow_mode(c.get_string("flow.mode"));
    cfg.seed = static_cast<uint64_t>(c.get_int("infer.seed"));
    cfg.validate();
    return cfg;
}

namespace {

// A scored proposal: predicted mask plus identity embedding. Both depend only
// on the parameters, never on the template set, so one pass suffices.
struct Candidate {
    int frame = 0;
    Mask mask;
    std::vector<float> embedding;
};

std::vector<float> to_vec(const TensorPtrF& t) {
    return std::vector<float>(t->data.begin(), t->data.end());
}

long mask_overlap(const Mask& a, const Mask& b) {
    long n = 0;
    for (size_t i = 0; i < a.v.size(); ++i) n += a.v[i] & b.v[i];
    return n;
}

}  // namespace

std::vector<Mask> first_frame_masks(const Sequence& seq) {
    require(seq.has_gt(), "first_frame_masks: sequence carries no ground truth");
    require(seq.num_frames() >= 1, "first_frame_masks: sequence has no frames");
    const InstanceMap& gt1 = seq.gt_at(1);
    const int num_ids = seq.num_identities();
    require(num_ids >= 1, "first_frame_masks: ground truth names no identity");
    std::vector<Mask> masks;
    for (int k = 1; k <= num_ids; ++k) {
        Mask m = gt1.instance_mask(k);
        require(!m.empty(), "first_frame_masks: identity " + std::to_string(k) +
                                " is not visible on frame 1");
        masks.push_back(std::move(m));
    }
    return masks;
}

DyeNetResult run_dyenet(const Sequence& seq, const std::vector<Mask>& first_frame_masks,
                        const ParamStore<float>& params, const InferenceConfig& cfg) {
    cfg.validate();
    const int num_frames = seq.num_frames();
    require(num_frames >= 1, "run_dyenet: sequence has no frames");
    const int h = seq.height();
    const int w = seq.width();
    require(h % 8 == 0 && w % 8 == 0, "run_dyenet: frame size must be a multiple of 8");
    const int num_ids = static_cast<int>(first_frame_masks.size());
    require(num_ids >= 1, "run_dyenet: first-frame masks must not be empty");
    for (int k = 0; k < num_ids; ++k) {
        const Mask& m = first_frame_masks[k];
        require(m.h == h && m.w == w, "run_dyenet: first-frame mask size mismatch");
        require(!m.empty(), "run_dyenet: first-frame mask " + std::to_string(k + 1) + " is empty");
        for (int l = 0; l < k; ++l)
            require(mask_overlap(first_frame_masks[l], m) == 0,
                    "run_dyenet: first-frame masks must be disjoint");
    }

    std::vector<TensorPtrF> features;
    features.reserve(num_frames);
    for (int j = 1; j <= num_frames; ++j)
        features.push_back(extract_features<float>(nullptr, seq.frame(j), params, cfg.feat_depth));
    FlowCache flows(seq, cfg.flow_mode);

    // Identity k is the position in first_frame_masks; its template anchors
    // the whole matching process with provenance 0.
    TemplateSet templates;
    for (int k = 1; k <= num_ids; ++k) {
        Box box = propagation_box(first_frame_masks[k - 1], cfg.remp.box_margin, w, h);
        auto roi = roi_align<float>(nullptr, features[0], box, cfg.remp.m);
        templates.push_back({to_vec(embed_head<float>(nullptr, roi, params)), k, 0});
    }

    std::vector<Candidate> candidates;
    if (cfg.use_reid) {
        Rng rng(cfg.seed);
        for (int j = 2; j <= num_frames; ++j) {
            const InstanceMap* gt = seq.has_gt() ? &seq.gt_at(j) : nullptr;
            auto boxes = propose(seq.frame(j), seq.frame(j - 1), gt, cfg.proposals, rng);
            for (Box b : boxes) {
                // The heads see the same margin-dilated roi convention that
                // propagation boxes use, whatever the proposal source.
                b = dilate_box(b, cfg.remp.box_margin, w, h);
                if (!b.valid()) continue;
                auto roi = roi_align<float>(nullptr, features[j - 1], b, cfg.remp.m);
                Mask m = paste_mask(*mask_head<float>(nullptr, roi, params), b, w, h);
                if (m.empty()) continue;
                std::vector<float> e;
                try {
                    e = to_vec(embed_head<float>(nullptr, roi, params));
                } catch (const DegenerateEmbedding&) {
                    continue;
                }
                candidates.push_back({j, std::move(m), std::move(e)});
            }
        }
    }

    // Ground-truth bookkeeping for the report: which (identity, frame) pairs
    // exist, and which have been hit by a propagated starting point so far.
    long gt_pairs = 0;
    const int gt_ids = seq.has_gt() ? seq.num_identities() : 0;
    if (seq.has_gt())
        for (int k = 1; k <= gt_ids; ++k)
            for (int j = 1; j <= num_frames; ++j)
                if (!seq.gt_at(j).instance_mask(k).empty()) ++gt_pairs;
    std::set<std::pair<int, int>> covered_pairs;
    long starts_total = 0;
    long starts_correct = 0;

    DyeNetResult res;
    for (int t = 1; t <= cfg.max_iters; ++t) {
        std::vector<StartingPoint> fresh;
        if (t == 1)
            for (int k = 1; k <= num_ids; ++k)
                fresh.push_back(
                    {first_frame_masks[k - 1], 1, k, 1.0, templates[k - 1].embedding});
        int matched = 0;
        if (cfg.use_reid) {
            for (const Candidate& cand : candidates) {
                auto mr = match_templates(cand.embedding, templates, cfg.rho_reid);
                if (!mr) continue;
                ++matched;
                fresh.push_back({cand.mask, cand.frame, mr->identity, mr->similarity,
                                 cand.embedding});
            }
        }
        auto accepted = dedup_starting_points(std::move(fresh), res.tracklets, cfg.theta_skip);

        const size_t before = res.tracklets.size();
        int added = 0;
        for (const StartingPoint& sp : accepted) {
            // Tracklets grown earlier in this very iteration also cover.
            bool covered = false;
            for (size_t i = before; i < res.tracklets.size() && !covered; ++i) {
                const Tracklet& tr = res.tracklets[i];
                covered = tr.covers(sp.frame) &&
                          mask_iou(tr.mask_at(sp.frame), sp.mask) >= cfg.theta_skip;
            }
            if (covered) continue;
            res.tracklets.push_back(
                propagate_bidirectional(sp, seq, features, flows, params, cfg.remp));
            ++added;
            if (seq.has_gt()) {
                ++starts_total;
                if (sp.identity <= gt_ids &&
                    mask_iou(seq.gt_at(sp.frame).instance_mask(sp.identity), sp.mask) >= 0.5) {
                    ++starts_correct;
                    covered_pairs.insert({sp.identity, sp.frame});
                }
            }
        }

        res.tubes = link_tracklets(res.tracklets, templates, cfg.theta_agree);

        const double expand_rho = cfg.expand_threshold();
        for (size_t i = before; i < res.tracklets.size(); ++i) {
            const StartingPoint& o = res.tracklets[i].origin;
            if (o.frame <= 1) continue;  // first-frame seeds already are templates
            if (o.similarity < expand_rho || o.embedding.empty()) continue;
            templates.push_back({o.embedding, o.identity, t});
        }

        IterationReport row;
        row.iteration = t;
        row.proposals_matched = matched;
        row.new_starting_points = added;
        row.tracklets = static_cast<int>(res.tracklets.size());
        row.templates = static_cast<int>(templates.size());
        if (seq.has_gt() && gt_pairs > 0) {
            row.sp_precision =
                starts_total > 0 ? static_cast<double>(starts_correct) / starts_total : 0.0;
            row.sp_recall = static_cast<double>(covered_pairs.size()) / gt_pairs;
        }
        res.iterations.push_back(row);
        if (added == 0) break;
    }
    res.templates = std::move(templates);
    return res;
}

std::string iteration_report_csv(const std::vector<IterationReport>& rows) {
    std::string out = "iteration,matched,new_starting_points,tracklets,templates,"
                      "sp_precision,sp_recall\n";
    char buf[160];
    for (const IterationReport& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%d", r.iteration, r.proposals_matched,
                      r.new_starting_points, r.tracklets, r.templates);
        out += buf;
        if (r.sp_precision >= 0.0) {
            std::snprintf(buf, sizeof(buf), ",%.6f,%.6f", r.sp_precision, r.sp_recall);
            out += buf;
        } else {
            out += ",,";
        }
        out += '\n';
    }
    return out;
}

}  // namespace dyenet
