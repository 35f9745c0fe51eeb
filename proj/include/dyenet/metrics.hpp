#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dyenet/geometry.hpp"
#include "dyenet/linker.hpp"
#include "dyenet/sequence.hpp"

namespace dyenet {

// Region measure J: |pred & gt| / |pred | gt|. Both empty -> 1.0 (a correctly
// predicted absence is a perfect region match).
double jaccard(const Mask& pred, const Mask& gt);

// Boundary measure F. Boundary pixels are mask pixels 4-adjacent to
// background, with everything outside the frame counting as background (so
// mask pixels on the frame edge are boundary). Precision = fraction of pred
// boundary pixels within Chebyshev distance tol of some gt boundary pixel
// (computed by box dilation); recall symmetric; F = 2PR/(P+R), 0 when
// P+R = 0, and 1.0 when both boundaries are empty.
double boundary_f(const Mask& pred, const Mask& gt, int tol);

// G = (J + F)/2; both inputs must lie in [0,1].
double g_mean(double j, double f);

// Rounds to one decimal, halves away from zero. The tiny nudge keeps values
// that sit a float ulp below the .05 boundary (e.g. a mean of 68.15 assembled
// from inexact doubles) from dropping to the lower tenth. Used for the
// percent columns of the human-readable table.
double round1(double v);

struct InstanceEval {
    int identity = 0;
    double j = 0.0, f = 0.0, g = 0.0;  // per-frame means over evaluated frames
    bool small_object = false;         // mean gt area (when present) < 2% of frame
    bool occluded = false;             // gt empty on some evaluated frame, present on another
};

// Per-instance scores plus dataset means and a G breakdown by the two
// ground-truth attributes. A bucket mean is absent when no instance falls in
// that bucket.
struct EvalReport {
    std::vector<InstanceEval> instances;
    double mean_j = 0.0, mean_f = 0.0, mean_g = 0.0;
    std::optional<double> g_small, g_large, g_occluded, g_visible;
};

// Scores `tubes` against seq's ground truth. Frame 1 is excluded (its masks
// are the given starting condition, matching benchmark convention); a frame
// not covered by an identity's tube counts as an empty prediction; masks are
// cropped to the pre-padding size before scoring. An identity with no tube
// at all is scored with empty predictions everywhere.
EvalReport evaluate(const Sequence& seq, const std::vector<MaskTube>& tubes,
                    int boundary_tol = 1);

std::string report_csv(const EvalReport& rep);    // machine form, 6 decimals
std::string report_table(const EvalReport& rep);  // human form, percent scale

}  // namespace dyenet
