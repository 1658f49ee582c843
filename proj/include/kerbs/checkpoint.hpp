#pragma once

#include "kerbs/training.hpp"

#include <string>

namespace kerbs {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, little-endian:
//   "KBS1" | u32 version | u32 V | u32 d | u32 d_h | u32 M_sum | u16 counts[V]
//   f32 arrays: gru w_z u_z b_z w_r u_r b_r w_h u_h b_h, projection,
//               sense embeddings (word-major rows), theta
//   f64 stats: log_p[V], usage[M_sum], starve_count[V], beta
//   trailer: u8 head | u64 step | f64 lr | u64 adam step | Adam moments (f64)
//            | config text | vocabulary tokens | "KEND"
// Throws IoError when the path cannot be written.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws IoError (unreadable), FormatError (magic or version), CorruptionError
// (truncated or inconsistent). Nothing is returned on failure.
Checkpoint load_checkpoint(const std::string& path);

// As load_checkpoint, additionally throwing VocabError when the stored
// vocabulary size differs from expected_vocab.
Checkpoint load_checkpoint(const std::string& path, int expected_vocab);

// Rounds every stored-as-f32 parameter to float precision in place, so an
// in-memory model matches what a save/load round trip produces.
void quantize_to_storage(LanguageModel& model);

}  // namespace kerbs
