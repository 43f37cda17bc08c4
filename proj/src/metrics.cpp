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

#include "aarqa/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>

namespace aarqa {

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0 ? 2 * precision * recall / sum : 0.0;
}

Metrics compute_metrics(std::span<const QuestionOutcome> outcomes) {
  Metrics m;
  double macro = 0;
  std::size_t hits = 0;
  for (const auto& q : outcomes) {
    std::vector<EntityId> common;
    std::set_intersection(q.predicted.begin(), q.predicted.end(), q.gold.begin(),
                          q.gold.end(), std::back_inserter(common));
    m.num_predicted += q.predicted.size();
    m.num_gold += q.gold.size();
    m.num_correct += common.size();
    const double p = q.predicted.empty()
                         ? 0.0
                         : static_cast<double>(common.size()) / q.predicted.size();
    const double r =
        q.gold.empty() ? 0.0 : static_cast<double>(common.size()) / q.gold.size();
    macro += f1_score(p, r);
    if (q.best && std::binary_search(q.gold.begin(), q.gold.end(), *q.best)) ++hits;
  }
  m.questions = outcomes.size();
  if (m.num_predicted > 0) {
    m.precision = static_cast<double>(m.num_correct) / m.num_predicted;
  }
  if (m.num_gold > 0) m.recall = static_cast<double>(m.num_correct) / m.num_gold;
  m.micro_f1 = f1_score(m.precision, m.recall);
  if (m.questions > 0) {
    m.macro_f1 = macro / m.questions;
    m.accuracy = static_cast<double>(hits) / m.questions;
  }
  return m;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"questions", m.questions},   {"num_predicted", m.num_predicted},
          {"num_gold", m.num_gold},     {"num_correct", m.num_correct},
          {"precision", m.precision},   {"recall", m.recall},
          {"accuracy", m.accuracy},     {"micro_f1", m.micro_f1},
          {"macro_f1", m.macro_f1}};
}

std::string metrics_header(std::size_t label_width) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %9s %9s %9s %9s %9s", static_cast<int>(label_width),
                "Model", "# Ans", "Precision", "Recall", "Accuracy", "Micro-F1", "Macro-F1");
  return buf;
}

std::string metrics_row(const std::string& label, const Metrics& m,
                        std::size_t label_width) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8zu %9.4f %9.4f %9.4f %9.4f %9.4f",
                static_cast<int>(label_width), label.c_str(), m.num_predicted, m.precision,
                m.recall, m.accuracy, m.micro_f1, m.macro_f1);
  return buf;
}

}  // namespace aarqa
