#pragma once

#include <string>

#include "dyenet/tensor.hpp"

namespace dyenet {

// DYFL flow files: magic bytes "DYFL", little-endian uint32 H, uint32 W, then
// H*W*2 little-endian float32 values row-major with (dx, dy) interleaved per
// pixel. In memory a flow field is a 2xHxW tensor, plane 0 = dx, plane 1 = dy.

TensorF load_dyfl(const std::string& path);
void save_dyfl(const std::string& path, const TensorF& flow);

}  // namespace dyenet
