#include "dyenet/reid.hpp"

#include <algorithm>
#include <cmath>

#include "dyenet/ops.hpp"

namespace dyenet {

template <typename T>
TensorPtr<T> roi_align(Tape<T>* tape, const TensorPtr<T>& feature, const Box& box, int m) {
    require(feature->shape.rank == 3, "roi_align: feature must be CxHxW");
    require(box.valid(), "roi_align: invalid box " + box.str());
    require(m >= 2, "roi_align: m must be at least 2");
    const int C = feature->shape[0];
    const double bw = box.width() / m;
    const double bh = box.height() / m;
    std::vector<std::pair<double, double>> points;
    points.reserve(static_cast<size_t>(m) * m);
    for (int gy = 0; gy < m; ++gy) {
        for (int gx = 0; gx < m; ++gx) {
            const double px = box.x0 + (gx + 0.5) * bw;
            const double py = box.y0 + (gy + 0.5) * bh;
            points.emplace_back(px / 8.0, py / 8.0);
        }
    }
    auto sampled = ops::bilinear_sample(tape, feature, points);
    // Cx(m*m) row-major is already the CxMxM layout; relabel the shape.
    auto out = make_tensor<T>(Shape{C, m, m});
    out->data = sampled->data;
    if (tape) {
        tape->record([sampled, out] {
            if (!out->has_grad()) return;
            sampled->ensure_grad();
            for (size_t i = 0; i < out->grad.size(); ++i) sampled->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
void init_reid_heads(ParamStore<T>& params, int feat_width, int head_width, int embed_dim,
                     Rng& rng) {
    require(feat_width >= 1 && head_width >= 1 && embed_dim >= 1, "init_reid_heads: bad widths");
    params.add_kaiming("reid.mask.conv1.w", Shape{head_width, feat_width, 3, 3}, rng);
    params.add("reid.mask.conv1.b", Shape{head_width});
    params.add_kaiming("reid.mask.conv2.w", Shape{head_width, head_width, 3, 3}, rng);
    params.add("reid.mask.conv2.b", Shape{head_width});
    params.add_kaiming("reid.mask.out.w", Shape{1, head_width, 3, 3}, rng);
    params.add("reid.mask.out.b", Shape{1});
    params.add_kaiming("reid.embed.conv1.w", Shape{head_width, feat_width, 3, 3}, rng);
    params.add("reid.embed.conv1.b", Shape{head_width});
    params.add_kaiming("reid.embed.conv2.w", Shape{head_width, head_width, 3, 3}, rng);
    params.add("reid.embed.conv2.b", Shape{head_width});
    params.add_kaiming("reid.embed.fc.w", Shape{embed_dim, head_width}, rng);
    params.add("reid.embed.fc.b", Shape{embed_dim});
}

template <typename T>
TensorPtr<T> mask_head_logits(Tape<T>* tape, const TensorPtr<T>& roi,
                              const ParamStore<T>& params) {
    auto h = ops::conv2d(tape, roi, params.at("reid.mask.conv1.w"), params.at("reid.mask.conv1.b"),
                         1, 1, 1);
    h = ops::relu(tape, h);
    h = ops::conv2d(tape, h, params.at("reid.mask.conv2.w"), params.at("reid.mask.conv2.b"), 1, 1,
                    1);
    h = ops::relu(tape, h);
    return ops::conv2d(tape, h, params.at("reid.mask.out.w"), params.at("reid.mask.out.b"), 1, 1,
                       1);
}

template <typename T>
TensorPtr<T> mask_head(Tape<T>* tape, const TensorPtr<T>& roi, const ParamStore<T>& params) {
    return ops::sigmoid(tape, mask_head_logits(tape, roi, params));
}

template <typename T>
TensorPtr<T> embed_head(Tape<T>* tape, const TensorPtr<T>& roi, const ParamStore<T>& params) {
    auto h = ops::conv2d(tape, roi, params.at("reid.embed.conv1.w"),
                         params.at("reid.embed.conv1.b"), 1, 1, 1);
    h = ops::relu(tape, h);
    // stride kept at 2 here: the embedding path pools anyway, only the mask
    // path needs full roi resolution
    h = ops::conv2d(tape, h, params.at("reid.embed.conv2.w"), params.at("reid.embed.conv2.b"), 2,
                    1, 1);
    h = ops::relu(tape, h);
    auto pooled = ops::global_avg_pool(tape, h);
    auto fc = ops::fully_connected(tape, pooled, params.at("reid.embed.fc.w"),
                                   params.at("reid.embed.fc.b"));
    return ops::l2_normalize(tape, fc);
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    require(a.size() == b.size() && !a.empty(), "cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    require(na > 1e-24 && nb > 1e-24, "cosine: zero-length vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::optional<MatchResult> match_templates(const std::vector<float>& embedding,
                                           const TemplateSet& templates, double rho_reid) {
    require(!templates.empty(), "match_templates: empty template set");
    require(rho_reid > 0.0 && rho_reid < 1.0, "match_templates: rho_reid must lie in (0,1)");
    int best = -1;
    double best_sim = -2.0;
    for (size_t i = 0; i < templates.size(); ++i) {
        const double s = cosine(embedding, templates[i].embedding);
        if (s > best_sim) {
            best_sim = s;
            best = static_cast<int>(i);
        }
    }
    if (best_sim > rho_reid) return MatchResult{templates[best].identity, best_sim};
    return std::nullopt;
}

template <typename T>
TensorPtr<T> oim_loss(Tape<T>* tape, const std::vector<TensorPtr<T>>& embeddings,
                      const std::vector<int>& labels, const Tensor<T>& lut, double tau, double mu,
                      Tensor<T>* updated_lut) {
    require(!embeddings.empty(), "oim_loss: empty batch");
    require(embeddings.size() == labels.size(), "oim_loss: embeddings/labels size mismatch");
    require(lut.shape.rank == 2, "oim_loss: lut must be KxD");
    require(tau > 0.0, "oim_loss: tau must be positive");
    require(mu >= 0.0 && mu <= 1.0, "oim_loss: mu must lie in [0,1]");
    const int K = lut.shape[0], D = lut.shape[1];

    std::vector<TensorPtr<T>> terms;
    terms.reserve(embeddings.size());
    for (size_t i = 0; i < embeddings.size(); ++i) {
        const auto& e = embeddings[i];
        require(e->shape.rank == 1 && e->shape[0] == D, "oim_loss: embedding dim mismatch");
        double n2 = 0.0;
        for (T v : e->data) n2 += static_cast<double>(v) * static_cast<double>(v);
        require(std::abs(std::sqrt(n2) - 1.0) < 1e-2, "oim_loss: embeddings must be unit length");
        require(labels[i] >= 0 && labels[i] < K,
                "oim_loss: label " + std::to_string(labels[i]) + " has no lut row");
        // unit embeddings against unit rows: the matvec is the cosine vector
        auto scores = ops::matvec_const_table(tape, lut, e);
        auto logits = ops::scale(tape, scores, 1.0 / tau);
        terms.push_back(ops::softmax_cross_entropy(tape, logits, labels[i]));
    }
    auto loss = ops::mean_of(tape, terms);

    if (updated_lut) {
        *updated_lut = lut;
        for (size_t i = 0; i < embeddings.size(); ++i) {
            T* row = updated_lut->data.data() + static_cast<size_t>(labels[i]) * D;
            std::vector<double> mixed(D);
            double n2 = 0.0;
            for (int d = 0; d < D; ++d) {
                mixed[d] = mu * static_cast<double>(row[d]) +
                           (1.0 - mu) * static_cast<double>(embeddings[i]->data[d]);
                n2 += mixed[d] * mixed[d];
            }
            // a row can only cancel out when the embedding exactly opposes
            // it; keep the old row rather than divide by ~0
            if (n2 < 1e-24) continue;
            const double inv = 1.0 / std::sqrt(n2);
            for (int d = 0; d < D; ++d) row[d] = static_cast<T>(mixed[d] * inv);
        }
    }
    return loss;
}

template <typename T>
Tensor<T> make_oim_lut(int num_identities, int embed_dim, Rng& rng) {
    require(num_identities >= 1 && embed_dim >= 1, "make_oim_lut: bad dimensions");
    Tensor<T> lut(Shape{num_identities, embed_dim});
    for (int k = 0; k < num_identities; ++k) {
        T* row = lut.data.data() + static_cast<size_t>(k) * embed_dim;
        double n2 = 0.0;
        while (n2 < 1e-16) {
            n2 = 0.0;
            for (int d = 0; d < embed_dim; ++d) {
                const double v = rng.normal();
                row[d] = static_cast<T>(v);
                n2 += v * v;
            }
        }
        const double inv = 1.0 / std::sqrt(n2);
        for (int d = 0; d < embed_dim; ++d) row[d] = static_cast<T>(row[d] * inv);
    }
    return lut;
}

template TensorPtr<float> roi_align<float>(Tape<float>*, const TensorPtr<float>&, const Box&, int);
template TensorPtr<double> roi_align<double>(Tape<double>*, const TensorPtr<double>&, const Box&,
                                             int);
template void init_reid_heads<float>(ParamStore<float>&, int, int, int, Rng&);
template void init_reid_heads<double>(ParamStore<double>&, int, int, int, Rng&);
template TensorPtr<float> mask_head_logits<float>(Tape<float>*, const TensorPtr<float>&,
                                                  const ParamStore<float>&);
template TensorPtr<double> mask_head_logits<double>(Tape<double>*, const TensorPtr<double>&,
                                                    const ParamStore<double>&);
template TensorPtr<float> mask_head<float>(Tape<float>*, const TensorPtr<float>&,
                                           const ParamStore<float>&);
template TensorPtr<double> mask_head<double>(Tape<double>*, const TensorPtr<double>&,
                                             const ParamStore<double>&);
template TensorPtr<float> embed_head<float>(Tape<float>*, const TensorPtr<float>&,
                                            const ParamStore<float>&);
template TensorPtr<double> embed_head<double>(Tape<double>*, const TensorPtr<double>&,
                                              const ParamStore<double>&);
template TensorPtr<float> oim_loss<float>(Tape<float>*, const std::vector<TensorPtr<float>>&,
                                          const std::vector<int>&, const Tensor<float>&, double,
                                          double, Tensor<float>*);
template TensorPtr<double> oim_loss<double>(Tape<double>*, const std::vector<TensorPtr<double>>&,
                                            const std::vector<int>&, const Tensor<double>&, double,
                                            double, Tensor<double>*);
template Tensor<float> make_oim_lut<float>(int, int, Rng&);
template Tensor<double> make_oim_lut<double>(int, int, Rng&);

}  // namespace dyenet
