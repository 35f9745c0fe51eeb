#include "dyenet/linker.hpp"

#include <algorithm>
#include <set>

#include "dyenet/errors.hpp"

namespace dyenet {

std::vector<StartingPoint> dedup_starting_points(std::vector<StartingPoint> starts,
                                                 const std::vector<Tracklet>& existing,
                                                 double theta_skip) {
    std::stable_sort(starts.begin(), starts.end(),
                     [](const StartingPoint& a, const StartingPoint& b) {
                         if (a.similarity != b.similarity) return a.similarity > b.similarity;
                         if (a.frame != b.frame) return a.frame < b.frame;
                         return a.identity < b.identity;
                     });
    std::vector<StartingPoint> kept;
    for (auto& s : starts) {
        bool skip = false;
        for (const auto& t : existing) {
            if (!t.covers(s.frame)) continue;
            if (mask_iou(s.mask, t.mask_at(s.frame)) >= theta_skip) {
                skip = true;
                break;
            }
        }
        if (!skip) kept.push_back(std::move(s));
    }
    return kept;
}

std::vector<MaskTube> link_tracklets(const std::vector<Tracklet>& tracklets,
                                     const TemplateSet& templates, double theta_agree) {
    require(!templates.empty(), "link_tracklets: empty template set");
    std::set<int> known;
    for (const auto& t : templates) known.insert(t.identity);
    for (const auto& t : tracklets)
        require(known.count(t.identity) > 0, "link_tracklets: tracklet identity " +
                                                 std::to_string(t.identity) +
                                                 " has no template");

    std::vector<int> order(tracklets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const Tracklet& ta = tracklets[a];
        const Tracklet& tb = tracklets[b];
        if (ta.similarity != tb.similarity) return ta.similarity > tb.similarity;
        if (ta.first_frame != tb.first_frame) return ta.first_frame < tb.first_frame;
        return ta.identity < tb.identity;
    });

    std::map<int, MaskTube> tubes;  // identity -> tube under construction
    for (int idx : order) {
        const Tracklet& t = tracklets[idx];
        auto it = tubes.find(t.identity);
        if (it == tubes.end()) {
            MaskTube tube;
            tube.identity = t.identity;
            for (int f = t.first_frame; f <= t.last_frame(); ++f) tube.masks[f] = t.mask_at(f);
            tube.tracklets.push_back(idx);
            tubes.emplace(t.identity, std::move(tube));
            continue;
        }
        MaskTube& tube = it->second;
        bool contradiction = false;
        for (int f = t.first_frame; f <= t.last_frame() && !contradiction; ++f) {
            if (tube.covers(f) && mask_iou(t.mask_at(f), tube.mask_at(f)) < theta_agree)
                contradiction = true;
        }
        if (contradiction) continue;
        // earlier tracklets have higher similarity, so shared frames keep the
        // tube's mask and this tracklet fills only uncovered frames
        for (int f = t.first_frame; f <= t.last_frame(); ++f)
            if (!tube.covers(f)) tube.masks[f] = t.mask_at(f);
        tube.tracklets.push_back(idx);
    }

    std::vector<MaskTube> out;
    for (auto& kv : tubes) out.push_back(std::move(kv.second));
    return out;
}

}  // namespace dyenet
