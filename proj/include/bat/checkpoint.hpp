// SPDX-License-Identifier: Apache-2.0
#pragma once
// "BATM" model checkpoints.
//
// Layout (little-endian):
//   magic "BATM" | version u32 | record count u32
//   record*: name_len u32 | name bytes | rank u32 | dims u64[rank] | f64 data (row-major)
//   trailer: json_len u64 | JSON object with the model hyperparameters
//
// Records hold every trainable tensor plus the background vector "background".

#include <filesystem>

#include "bat/ntm.hpp"

namespace bat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ntm::ModelParams& params);
/// Throws DataError with the byte offset of the first inconsistency.
ntm::ModelParams load_checkpoint(const std::filesystem::path& path);

} // namespace bat
