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

// Attention-based aspect reasoning ranker.
//
// A question is encoded by word embeddings followed by a single-layer
// bidirectional LSTM into hidden states H = (h_1 .. h_n) and their mean
// H_avg. Each candidate contributes four aspect vectors (entity, type, path
// to the root, mean of context entity embeddings). For aspect x with vector
// h_x:
//
//   u_i = h_x . tanh(W_x h_i + b_x)      alpha = softmax(u)
//   r_x = sum_i alpha_i h_i
//   s_x = h_x . r_x                      w_x = H_avg . r_x
//   S   = sum_x w_x s_x
//
// Training minimizes max(0, margin - S(q, a) + S(q, a')) over (gold,
// non-gold) pairs; inference predicts every entity whose score exceeds the
// best score minus a threshold.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aarqa/autodiff.hpp"
#include "aarqa/candidates.hpp"
#include "aarqa/checkpoint.hpp"
#include "aarqa/kb_store.hpp"
#include "aarqa/qa_templates.hpp"
#include "aarqa/rng.hpp"

namespace aarqa {

enum class Aspect : std::uint8_t { kEntity = 0, kType = 1, kPath = 2, kContext = 3 };

inline constexpr std::array<Aspect, 4> kAllAspects = {
    Aspect::kEntity, Aspect::kType, Aspect::kPath, Aspect::kContext};

const char* to_string(Aspect a);

class AspectSet {
 public:
  constexpr AspectSet() = default;
  static constexpr AspectSet all() { return AspectSet(0xf); }

  constexpr bool contains(Aspect a) const { return bits_ & bit(a); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr AspectSet with(Aspect a) const { return AspectSet(bits_ | bit(a)); }
  constexpr std::uint8_t bits() const { return bits_; }

  // "entity+context", or "full" for all four.
  std::string to_string() const;

  friend constexpr bool operator==(AspectSet, AspectSet) = default;

 private:
  constexpr explicit AspectSet(std::uint8_t bits) : bits_(bits) {}
  static constexpr std::uint8_t bit(Aspect a) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(a));
  }
  std::uint8_t bits_ = 0;
};

// Accepts aspect names joined by '+' or '&' ("type+path"), or "full"/"all".
AspectSet parse_aspects(std::string_view text);

enum class ModelKind : std::uint8_t { kAar = 0, kSgemb = 1 };

const char* to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view text);

// kUniform draws every parameter from uniform(-init_scale, init_scale).
// kTorch mirrors the PyTorch layer defaults: embeddings N(0, 1), LSTM
// weights and the sum of its two biases uniform(+-1/sqrt(hidden)),
// projections uniform(+-1/sqrt(fan_in)).
enum class InitScheme : std::uint8_t { kUniform = 0, kTorch = 1 };

const char* to_string(InitScheme s);
InitScheme parse_init_scheme(std::string_view text);

struct ModelConfig {
  ModelKind kind = ModelKind::kAar;
  int dim = 300;  // embedding size; each LSTM direction has dim / 2 units
  AspectSet aspects = AspectSet::all();
  bool normalize_aspect_weights = false;  // softmax over active w_x
  InitScheme init = InitScheme::kUniform;
  double init_scale = 0.08;  // bound of kUniform
  // Training-time probability of scoring a known path through the mean of
  // its relation-step embeddings, so those embeddings are learned for paths
  // never seen in training.
  double path_fallback_rate = 0.1;
};

// String to row index. Reserved entries occupy the first rows; lookups of
// unknown strings return `unknown`.
class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(std::vector<std::string> reserved, std::size_t unknown);

  std::size_t add(const std::string& s);
  std::optional<std::size_t> find(const std::string& s) const;
  std::size_t lookup(const std::string& s) const;
  std::size_t size() const { return names_.size(); }
  std::size_t unknown() const { return unknown_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t unknown_ = 0;
};

struct LstmParams {
  ad::Var input_weight;   // dim x 4h, gate order i, f, g, o
  ad::Var hidden_weight;  // h x 4h
  ad::Var bias;           // 1 x 4h
};

struct Projection {
  ad::Var weight;  // dim x dim
  ad::Var bias;    // 1 x dim
};

struct ModelParams {
  ad::Var word_emb;      // |words| x dim
  ad::Var entity_emb;    // |entities| x dim, also used for context entries
  ad::Var type_emb;      // |types| x dim
  ad::Var path_emb;      // |path keys| x dim
  ad::Var relation_emb;  // |relation steps| x dim, path fallback
  LstmParams forward;
  LstmParams backward;
  std::array<Projection, 4> projection;  // indexed by Aspect

  std::vector<std::pair<std::string, ad::Var>> named() const;
  std::vector<ad::Var> all() const;
};

struct QuestionEncoding {
  ad::Var states;  // n x dim, row i is h_i
  ad::Var mean;    // 1 x dim
};

// Row indexes of one candidate's aspects.
struct CandidateFeatures {
  EntityId entity = 0;
  Eigen::Index entity_row = 0;
  Eigen::Index type_row = 0;
  std::optional<Eigen::Index> path_row;  // nullopt: unseen path key
  std::vector<Eigen::Index> step_rows;
  std::vector<Eigen::Index> context_rows;
  std::string path_key;
};

struct AspectTrace {
  bool active = false;
  ad::Var alpha;       // n x 1 attention over question positions
  ad::Var repr;        // 1 x dim aspect-to-question representation
  ad::Var similarity;  // s_x
  ad::Var weight;      // w_x (after normalization when enabled)
};

struct ScoreTrace {
  ad::Var score;
  std::array<AspectTrace, 4> aspects;
};

// Plain-value view of a ScoreTrace.
struct ScoreBreakdown {
  std::array<bool, 4> active{};
  std::array<std::vector<double>, 4> alpha;
  std::array<std::vector<double>, 4> repr;
  std::array<double, 4> similarity{};
  std::array<double, 4> weight{};
  double score = 0;
};

ScoreBreakdown to_breakdown(const ScoreTrace& trace);

// Per-question state shared by all of its candidates.
struct QuestionState {
  std::vector<Eigen::Index> word_rows;
  QuestionEncoding encoding;
  std::array<ad::Var, 4> keys;  // tanh(H W_x + b_x), n x dim
  ad::Var word_mean;            // SGEmb question vector
};

struct Prediction {
  std::vector<EntityId> entities;  // ascending
  std::optional<EntityId> best;
  double best_score = 0;
  bool empty_candidates = false;
};

// max(0, margin - positive + negative).
double hinge_loss(double positive, double negative, double margin);
ad::Var hinge_loss(const ad::Var& positive, const ad::Var& negative, double margin);

// Margin-threshold inference over precomputed scores, one per candidate
// entry: the best entry (ties: lowest entity id, then path key) plus every
// entity with an entry scoring strictly above best - threshold.
Prediction predict_from_scores(const CandidateSet& cands,
                               const std::vector<double>& scores, double threshold);

class Model {
 public:
  Model() = default;

  // Fresh parameters. Words and path keys normally come from the training
  // split; entities, types and relation steps come from the KB.
  Model(const ModelConfig& config, const KnowledgeBase& kb,
        const std::vector<std::string>& words,
        const std::vector<std::string>& path_keys, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  int dim() const { return config_.dim; }

  const Lexicon& words() const { return words_; }
  const Lexicon& path_keys() const { return paths_; }

  // Rebuilds the KB-id to row maps for a (possibly different) KB; entities
  // are matched by (name, etype).
  void bind(const KnowledgeBase& kb);

  std::vector<Eigen::Index> word_rows(const std::vector<std::string>& tokens) const;
  CandidateFeatures features(const KnowledgeBase& kb, const CandidateAnswer& cand) const;

  // Throws ValidationError on an empty token list.
  QuestionEncoding encode_question(const std::vector<std::string>& tokens) const;
  QuestionState prepare(const QAInstance& q) const;

  // Attention of one aspect vector over the question states.
  std::pair<ad::Var, ad::Var> aspect_attention(const QuestionState& state,
                                               Aspect aspect,
                                               const ad::Var& aspect_vector) const;

  // Full score with per-aspect detail. When `fallback_rng` is given, known
  // paths are replaced by their compositional embedding with probability
  // config().path_fallback_rate (training only).
  ScoreTrace score(const QuestionState& state, const CandidateFeatures& cand,
                   Rng* fallback_rng = nullptr) const;

  ad::Var sgemb_score(const QuestionState& state, const CandidateFeatures& cand) const;

  // Dispatches on config().kind.
  ad::Var score_var(const QuestionState& state, const CandidateFeatures& cand,
                    Rng* fallback_rng = nullptr) const;

  // Scores every entry without recording gradients.
  std::vector<double> score_all(const KnowledgeBase& kb, const QAInstance& q,
                                const CandidateSet& cands) const;

  Prediction predict(const KnowledgeBase& kb, const QAInstance& q,
                     const CandidateSet& cands, double threshold) const;

  Checkpoint to_checkpoint() const;
  static Model from_checkpoint(const Checkpoint& ckpt, const KnowledgeBase& kb);

  // Deep copy of parameter values (not of the graph).
  std::vector<ad::Mat> snapshot() const;
  void restore(const std::vector<ad::Mat>& values);

 private:
  ad::Var aspect_vector(Aspect a, const CandidateFeatures& cand, Rng* fallback_rng) const;
  ad::Var path_vector(const CandidateFeatures& cand, Rng* fallback_rng) const;
  // Hidden state per position, in question order.
  std::vector<ad::Var> run_direction(const LstmParams& p, const ad::Var& inputs,
                                     bool reverse) const;
  void allocate(std::uint64_t seed);

  ModelConfig config_;
  Lexicon words_;
  Lexicon entities_;  // key: name \t etype
  Lexicon types_;
  Lexicon paths_;
  Lexicon relations_;  // "+pred" / "-pred"
  ModelParams params_;

  // Bound KB maps.
  std::vector<Eigen::Index> entity_rows_;
  std::unordered_map<std::string, Eigen::Index> type_rows_;
  std::vector<std::array<Eigen::Index, 2>> relation_rows_;  // [out, in]
};

}  // namespace aarqa
