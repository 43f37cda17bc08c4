// Copyright 2026 The AARQA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aarqa/autodiff.hpp"
#include "json.hpp"

namespace aarqa {

struct NamedTensor {
  std::string name;
  ad::Mat value;
};

// Named-tensor container. On disk it is a JSON manifest
//   {"format": ..., "blob": "<file>", "meta": {...},
//    "tensors": [{"name", "shape": [rows, cols], "offset"}]}
// next to a blob of little-endian float64 values in row-major order.
// Offsets are byte offsets into the blob.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

// Writes `manifest` and a sibling blob with the same stem and ".bin".
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest);
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

}  // namespace aarqa
