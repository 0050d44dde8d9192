#pragma once

#include <string>

#include "vrrae/model.hpp"

namespace vrrae {

/// Binary model container: magic "VRRA", version u32, spec block, tensor
/// table (name length / name / ndims / dims / little-endian f64 payload),
/// FNV-1a checksum footer. Round-trips bit-exactly; writes go through a
/// temporary file and an atomic rename.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace vrrae
