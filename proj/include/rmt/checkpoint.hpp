#pragma once

#include <string>

#include "rmt/optim.hpp"

namespace rmt {

// Checkpoint layout, little-endian throughout:
//   magic "RMT1"
//   u32 header length, then header bytes (key=value text, may be empty)
//   u32 parameter count
//   per parameter: u32 name length, name bytes, u32 rank, u64 dims..., f64 data
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const std::string& header,
                     const ParamMap& params);

struct Checkpoint {
    std::string header;
    ParamMap params;
};

Checkpoint load_checkpoint(const std::string& path, bool requires_grad = false);

}  // namespace rmt
