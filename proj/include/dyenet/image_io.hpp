#pragma once

#include <string>

#include "dyenet/geometry.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// Binary PNM I/O. Frames are PPM (P6) converted to [0,1] floats; instance-id
// masks are PGM (P5) with raw ids (0 = background). maxval is fixed at 255.

TensorF load_ppm(const std::string& path);                  // 3xHxW in [0,1]
void save_ppm(const std::string& path, const TensorF& img);

InstanceMap load_pgm(const std::string& path);
void save_pgm(const std::string& path, const InstanceMap& m);

}  // namespace dyenet
