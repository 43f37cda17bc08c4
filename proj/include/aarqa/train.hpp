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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aarqa/candidates.hpp"
#include "aarqa/metrics.hpp"
#include "aarqa/model.hpp"
#include "aarqa/qa_templates.hpp"
#include "json.hpp"

namespace aarqa {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 10;
  std::size_t batch_size = 32;  // training pairs per optimizer step
  double margin = 0.2;          // hinge margin
  double threshold = 0.2;       // inference margin
  std::uint64_t seed = 0;
  ModelConfig model;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int jobs = 1;
  int max_hops = 3;
};

// Throws ConfigError on out-of-range values.
void validate(const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& config);
// Overlays the keys present in `obj` onto `base`.
TrainConfig train_config_from_json(const nlohmann::json& obj, TrainConfig base = {});

struct TrainingPair {
  const QAInstance* question = nullptr;
  const CandidateAnswer* positive = nullptr;
  const CandidateAnswer* negative = nullptr;
};

// One positive entry per gold entity (the entry on a gold answer path when
// the question records them) paired with a uniformly drawn non-gold entry.
// Returns an empty list and sets *skipped when no gold or no non-gold entry
// exists.
std::vector<TrainingPair> sample_pairs(const QAInstance& q, const CandidateSet& cands,
                                       std::uint64_t seed, bool* skipped = nullptr);

// Adaptive-moment optimizer over a fixed parameter list. Parameters that
// received no gradient since the last zero_grad() are left untouched.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);

  void zero_grad();
  void step();
  long steps() const { return t_; }

 private:
  std::vector<ad::Var> params_;
  std::vector<ad::Mat> m_;
  std::vector<ad::Mat> v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;  // mean hinge loss over the epoch's pairs
  std::size_t pairs = 0;
  double dev_micro_f1 = 0;
};

struct TrainResult {
  Model model;  // parameters of the best dev epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  Metrics best_dev;
  std::size_t skipped_questions = 0;  // per epoch
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Candidate sets for a list of questions, computed on `jobs` threads.
std::vector<CandidateSet> build_candidates(const KnowledgeBase& kb,
                                           const std::vector<const QAInstance*>& questions,
                                           int jobs, int max_hops = 3);

TrainResult train(const std::vector<QAInstance>& data, const KnowledgeBase& kb,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

std::vector<QuestionOutcome> predict_outcomes(const Model& model, const KnowledgeBase& kb,
                                              const std::vector<const QAInstance*>& questions,
                                              const std::vector<CandidateSet>& cands,
                                              double threshold, int jobs);

Metrics evaluate(const Model& model, const KnowledgeBase& kb,
                 const std::vector<const QAInstance*>& questions, double threshold,
                 int jobs = 1);
Metrics evaluate(const Model& model, const KnowledgeBase& kb,
                 const std::vector<const QAInstance*>& questions,
                 const std::vector<CandidateSet>& cands, double threshold, int jobs = 1);

struct AblationRow {
  std::string label;  // e.g. "type+path"
  AspectSet aspects;
  int best_epoch = 0;
  Metrics dev;
  Metrics test;
};

// Trains and evaluates one model per aspect subset with identical seeds.
// Rows come back in report order: full, entity+context, type, path,
// type+path, then any other subsets in the order given.
std::vector<AblationRow> ablate(const std::vector<QAInstance>& data, const KnowledgeBase& kb,
                                const TrainConfig& config,
                                const std::vector<AspectSet>& subsets);

nlohmann::json to_json(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows, ModelKind kind);

}  // namespace aarqa
