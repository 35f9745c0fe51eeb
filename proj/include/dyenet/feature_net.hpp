#pragma once

#include "dyenet/param_store.hpp"
#include "dyenet/tape.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// Backbone N_feat: `depth` 3x3 conv+ReLU blocks, the first three at stride 2
// (1/8 resolution), the remainder dilated (dilation 2, stride 1, padding 2).
// Parameters are feat.conv<k>.w / feat.conv<k>.b, k = 1..depth, all `width`
// channels wide.

template <typename T>
void init_feature_net(ParamStore<T>& params, int width, int depth, Rng& rng);

// frame is 3xHxW with H, W divisible by 8; result is width x H/8 x W/8.
template <typename T>
TensorPtr<T> extract_features(Tape<T>* tape, const TensorPtr<T>& frame,
                              const ParamStore<T>& params, int depth);

}  // namespace dyenet
