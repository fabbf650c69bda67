/* Copyright 2026 The MetaLSTM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef METALSTM_CHECKPOINT_HPP_
#define METALSTM_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metalstm/multitask.hpp"
#include "metalstm/types.hpp"

namespace metalstm {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what)
      : std::runtime_error(what) {}
};

// Self-describing binary container: a header with (d, h, m, z, architecture,
// vocab hash), then named tensors as shape plus little-endian float64
// payload in row-major order, then an FNV-1a checksum of everything before
// it. Full checkpoints prefix names with "shared/" or "task/<id>/";
// meta-only checkpoints hold exactly the shared meta tensor names.
struct CheckpointHeader {
  std::int32_t d = 0, h = 0, m = 0, z = 0;
  std::string arch;
  std::uint64_t vocab_hash = 0;
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix* find(const std::string& name) const;
};

// Writes via a temporary file and renames, so a failed run leaves no
// partial checkpoint behind.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_model(const MultiTaskModel& model,
                                 std::uint64_t vocab_hash);
Checkpoint meta_checkpoint_from_model(const MultiTaskModel& model,
                                      std::uint64_t vocab_hash);

// Strict restore: every checkpoint tensor must exist with matching shape.
void restore_model(MultiTaskModel& model, const Checkpoint& ckpt);

// FNV-1a over a store's tensor bytes in name order; used to verify the
// frozen meta after transfer.
std::uint64_t store_hash(const ParamStore& store,
                         const std::string& name_prefix = "");

}  // namespace metalstm

#endif  // METALSTM_CHECKPOINT_HPP_
