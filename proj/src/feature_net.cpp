#include "dyenet/feature_net.hpp"

#include "dyenet/ops.hpp"

namespace dyenet {

template <typename T>
void init_feature_net(ParamStore<T>& params, int width, int depth, Rng& rng) {
    require(width >= 1, "feature net: width must be positive");
    require(depth >= 3, "feature net: need at least the three stride-2 blocks");
    int in_ch = 3;
    for (int k = 1; k <= depth; ++k) {
        const std::string base = "feat.conv" + std::to_string(k);
        params.add_kaiming(base + ".w", Shape{width, in_ch, 3, 3}, rng);
        params.add(base + ".b", Shape{width});
        in_ch = width;
    }
}

template <typename T>
TensorPtr<T> extract_features(Tape<T>* tape, const TensorPtr<T>& frame,
                              const ParamStore<T>& params, int depth) {
    require(frame->shape.rank == 3 && frame->shape[0] == 3, "extract_features: frame must be 3xHxW");
    require(frame->shape[1] % 8 == 0 && frame->shape[2] % 8 == 0,
            "extract_features: frame dimensions must be divisible by 8 (pad first)");
    TensorPtr<T> x = frame;
    for (int k = 1; k <= depth; ++k) {
        const std::string base = "feat.conv" + std::to_string(k);
        const bool strided = k <= 3;
        x = ops::conv2d<T>(tape, x, params.at(base + ".w"), params.at(base + ".b"),
                           strided ? 2 : 1, strided ? 1 : 2, strided ? 1 : 2);
        x = ops::relu<T>(tape, x);
    }
    return x;
}

template void init_feature_net<float>(ParamStore<float>&, int, int, Rng&);
template void init_feature_net<double>(ParamStore<double>&, int, int, Rng&);
template TensorPtr<float> extract_features<float>(Tape<float>*, const TensorPtr<float>&,
                                                  const ParamStore<float>&, int);
template TensorPtr<double> extract_features<double>(Tape<double>*, const TensorPtr<double>&,
                                                    const ParamStore<double>&, int);

}  // namespace dyenet
