#pragma once

#include <string>

#include "dyenet/param_store.hpp"

namespace dyenet {

// DYCK checkpoints: magic "DYCK", little-endian uint32 entry count, then a
// key table sorted by name — per entry uint32 name length, UTF-8 name bytes,
// uint32 rank, uint32 extents[rank] — followed by the float32 LE data blobs
// in table order. Parameters only; momentum buffers are not persisted.

void save_checkpoint(const std::string& path, const ParamStore<float>& store);
ParamStore<float> load_checkpoint(const std::string& path);

}  // namespace dyenet
