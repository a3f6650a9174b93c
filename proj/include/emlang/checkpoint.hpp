#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emlang/ad/tape.hpp"

namespace emlang {

// Versioned binary checkpoint: magic + format version, the config digest,
// then named tensors as (name, rows, cols, 64-bit little-endian values).
// Round-trips are bit-exact.
void save_checkpoint(const std::filesystem::path& path,
                     const std::string& config_digest,
                     const std::vector<const ad::ParamTensor*>& params);

// Loads into matching-named tensors; throws io_error on any mismatch
// (missing tensor, shape change, or digest mismatch when expected_digest is
// non-empty).
void load_checkpoint(const std::filesystem::path& path,
                     const std::string& expected_digest,
                     const std::vector<ad::ParamTensor*>& params);

std::string checkpoint_digest(const std::filesystem::path& path);

}  // namespace emlang
