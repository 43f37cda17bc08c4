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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aarqa/kb_store.hpp"
#include "json.hpp"

namespace aarqa {

// Predicted and gold entity sets of one question (both sorted, unique) and
// the top-ranked entity.
struct QuestionOutcome {
  std::vector<EntityId> predicted;
  std::vector<EntityId> gold;
  std::optional<EntityId> best;
};

struct Metrics {
  std::size_t questions = 0;
  std::size_t num_predicted = 0;  // sum of |pred|
  std::size_t num_gold = 0;       // sum of |gold|
  std::size_t num_correct = 0;    // sum of |pred & gold|
  double precision = 0;           // micro
  double recall = 0;              // micro
  double accuracy = 0;            // hits@1: best entity is gold
  double micro_f1 = 0;
  double macro_f1 = 0;            // mean of per-question F1
};

// 2PR / (P + R), or 0 when P + R is 0.
double f1_score(double precision, double recall);

Metrics compute_metrics(std::span<const QuestionOutcome> outcomes);

nlohmann::json to_json(const Metrics& m);

// Column header and one aligned row in the order
// # Ans, Precision, Recall, Accuracy, Micro-F1, Macro-F1.
std::string metrics_header(std::size_t label_width);
std::string metrics_row(const std::string& label, const Metrics& m,
                        std::size_t label_width);

}  // namespace aarqa
