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

#include "aarqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aarqa/error.hpp"

namespace aarqa {

using ad::Mat;
using ad::Var;

const char* to_string(Aspect a) {
  switch (a) {
    case Aspect::kEntity: return "entity";
    case Aspect::kType: return "type";
    case Aspect::kPath: return "path";
    case Aspect::kContext: return "context";
  }
  return "entity";
}

std::string AspectSet::to_string() const {
  if (*this == all()) return "full";
  std::string out;
  for (Aspect a : kAllAspects) {
    if (!contains(a)) continue;
    if (!out.empty()) out.push_back('+');
    out += aarqa::to_string(a);
  }
  return out;
}

AspectSet parse_aspects(std::string_view text) {
  if (text == "full" || text == "all") return AspectSet::all();
  AspectSet set;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of("+&", start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view name = text.substr(start, end - start);
    bool found = false;
    for (Aspect a : kAllAspects) {
      if (name == to_string(a)) {
        set = set.with(a);
        found = true;
      }
    }
    if (!found) {
      throw ParseError("unknown aspect '" + std::string(name) + "' in '" +
                       std::string(text) + "'");
    }
    start = end + 1;
  }
  return set;
}

const char* to_string(ModelKind k) {
  return k == ModelKind::kAar ? "aar" : "sgemb";
}

const char* to_string(InitScheme s) { return s == InitScheme::kTorch ? "torch" : "uniform"; }

InitScheme parse_init_scheme(std::string_view text) {
  if (text == "uniform") return InitScheme::kUniform;
  if (text == "torch") return InitScheme::kTorch;
  throw ParseError("unknown init scheme '" + std::string(text) + "'");
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "aar") return ModelKind::kAar;
  if (text == "sgemb") return ModelKind::kSgemb;
  throw ParseError("unknown model kind '" + std::string(text) + "'");
}

Lexicon::Lexicon(std::vector<std::string> reserved, std::size_t unknown)
    : unknown_(unknown) {
  for (auto& s : reserved) add(s);
}

std::size_t Lexicon::add(const std::string& s) {
  auto [it, inserted] = index_.emplace(s, names_.size());
  if (inserted) names_.push_back(s);
  return it->second;
}

std::optional<std::size_t> Lexicon::find(const std::string& s) const {
  auto it = index_.find(s);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Lexicon::lookup(const std::string& s) const {
  auto it = index_.find(s);
  return it == index_.end() ? unknown_ : it->second;
}

std::vector<std::pair<std::string, Var>> ModelParams::named() const {
  std::vector<std::pair<std::string, Var>> out = {
      {"word_emb", word_emb},
      {"entity_emb", entity_emb},
      {"type_emb", type_emb},
      {"path_emb", path_emb},
      {"relation_emb", relation_emb},
      {"lstm_fwd.input_weight", forward.input_weight},
      {"lstm_fwd.hidden_weight", forward.hidden_weight},
      {"lstm_fwd.bias", forward.bias},
      {"lstm_bwd.input_weight", backward.input_weight},
      {"lstm_bwd.hidden_weight", backward.hidden_weight},
      {"lstm_bwd.bias", backward.bias},
  };
  for (Aspect a : kAllAspects) {
    const auto& p = projection[static_cast<int>(a)];
    out.emplace_back(std::string("proj.") + to_string(a) + ".weight", p.weight);
    out.emplace_back(std::string("proj.") + to_string(a) + ".bias", p.bias);
  }
  return out;
}

std::vector<Var> ModelParams::all() const {
  std::vector<Var> out;
  for (auto& [name, v] : named()) out.push_back(v);
  return out;
}

ScoreBreakdown to_breakdown(const ScoreTrace& trace) {
  ScoreBreakdown b;
  b.score = trace.score.item();
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = trace.aspects[i];
    b.active[i] = a.active;
    if (!a.active) continue;
    const Mat& alpha = a.alpha.value();
    b.alpha[i].assign(alpha.data(), alpha.data() + alpha.size());
    const Mat& repr = a.repr.value();
    b.repr[i].assign(repr.data(), repr.data() + repr.size());
    b.similarity[i] = a.similarity.item();
    b.weight[i] = a.weight.item();
  }
  return b;
}

double hinge_loss(double positive, double negative, double margin) {
  return std::max(0.0, margin - positive + negative);
}

Var hinge_loss(const Var& positive, const Var& negative, double margin) {
  return ad::hinge(ad::add(negative - positive, Var::scalar(margin)));
}

Prediction predict_from_scores(const CandidateSet& cands,
                               const std::vector<double>& scores, double threshold) {
  Prediction pred;
  if (cands.candidates.empty()) {
    pred.empty_candidates = true;
    return pred;
  }
  if (scores.size() != cands.candidates.size()) {
    throw ValidationError("predict: score count does not match candidate count");
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& c = cands.candidates[i];
    const auto& b = cands.candidates[*best];
    if (scores[i] > scores[*best] ||
        (scores[i] == scores[*best] &&
         (c.entity < b.entity || (c.entity == b.entity && c.path.key < b.path.key)))) {
      best = i;
    }
  }
  if (!best) return pred;
  pred.best = cands.candidates[*best].entity;
  pred.best_score = scores[*best];
  const double cut = pred.best_score - threshold;
  pred.entities.push_back(*pred.best);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > cut) pred.entities.push_back(cands.candidates[i].entity);
  }
  std::sort(pred.entities.begin(), pred.entities.end());
  pred.entities.erase(std::unique(pred.entities.begin(), pred.entities.end()),
                      pred.entities.end());
  return pred;
}

namespace {

std::string entity_key(const Entity& e) { return e.name + '\t' + e.etype; }

Mat uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

// Standard normal entries by the Box-Muller transform.
Mat normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    m.data()[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  return m;
}

}  // namespace

Model::Model(const ModelConfig& config, const KnowledgeBase& kb,
             const std::vector<std::string>& words,
             const std::vector<std::string>& path_keys, std::uint64_t seed)
    : config_(config),
      words_({"<pad>", "<unk>"}, 1),
      entities_({"<unk>"}, 0),
      types_({"<unk>"}, 0),
      paths_({"<unk>"}, 0),
      relations_({"<unk>"}, 0) {
  if (config_.dim < 2 || config_.dim % 2 != 0) {
    throw ValidationError("model dim must be a positive even number, got " +
                          std::to_string(config_.dim));
  }
  for (const auto& w : words) words_.add(w);
  for (const auto& e : kb.entities()) entities_.add(entity_key(e));
  for (const auto& t : kb.types()) types_.add(t);
  for (const auto& p : path_keys) paths_.add(p);
  for (const auto& r : kb.relations()) {
    relations_.add("+" + r);
    relations_.add("-" + r);
  }
  allocate(seed);
  bind(kb);
}

void Model::allocate(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index d = config_.dim;
  const Eigen::Index h = d / 2;
  const bool torch = config_.init == InitScheme::kTorch;
  const double s = config_.init_scale;
  const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(h));
  const double proj_bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto lex = [&](const Lexicon& l) {
    const auto rows = static_cast<Eigen::Index>(l.size());
    return Var::parameter(torch ? normal_matrix(rng, rows, d) : uniform_matrix(rng, rows, d, s));
  };
  auto uni = [&](Eigen::Index rows, Eigen::Index cols, double bound) {
    return Var::parameter(uniform_matrix(rng, rows, cols, torch ? bound : s));
  };
  params_.word_emb = lex(words_);
  params_.word_emb.mutable_value().row(0).setZero();  // <pad>
  params_.entity_emb = lex(entities_);
  params_.type_emb = lex(types_);
  params_.path_emb = lex(paths_);
  params_.relation_emb = lex(relations_);
  for (LstmParams* p : {&params_.forward, &params_.backward}) {
    p->input_weight = uni(d, 4 * h, lstm_bound);
    p->hidden_weight = uni(h, 4 * h, lstm_bound);
    p->bias = uni(1, 4 * h, lstm_bound);
    if (torch) p->bias.mutable_value() += uniform_matrix(rng, 1, 4 * h, lstm_bound);
  }
  for (auto& p : params_.projection) {
    p.weight = uni(d, d, proj_bound);
    p.bias = uni(1, d, proj_bound);
  }
}

void Model::bind(const KnowledgeBase& kb) {
  entity_rows_.assign(kb.entity_count(), 0);
  for (const auto& e : kb.entities()) {
    entity_rows_[e.id] = static_cast<Eigen::Index>(entities_.lookup(entity_key(e)));
  }
  type_rows_.clear();
  for (const auto& t : kb.types()) {
    type_rows_[t] = static_cast<Eigen::Index>(types_.lookup(t));
  }
  relation_rows_.assign(kb.relation_count(), {0, 0});
  for (RelationId r = 0; r < kb.relation_count(); ++r) {
    const auto& name = kb.relation_name(r);
    relation_rows_[r] = {static_cast<Eigen::Index>(relations_.lookup("+" + name)),
                         static_cast<Eigen::Index>(relations_.lookup("-" + name))};
  }
}

std::vector<Eigen::Index> Model::word_rows(const std::vector<std::string>& tokens) const {
  std::vector<Eigen::Index> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) rows.push_back(static_cast<Eigen::Index>(words_.lookup(t)));
  return rows;
}

CandidateFeatures Model::features(const KnowledgeBase& kb,
                                  const CandidateAnswer& cand) const {
  (void)kb;
  CandidateFeatures f;
  f.entity = cand.entity;
  f.entity_row = cand.entity < entity_rows_.size() ? entity_rows_[cand.entity] : 0;
  auto t = type_rows_.find(cand.etype);
  f.type_row = t == type_rows_.end() ? 0 : t->second;
  f.path_key = cand.path.key;
  if (auto p = paths_.find(cand.path.key); p && *p != paths_.unknown()) {
    f.path_row = static_cast<Eigen::Index>(*p);
  }
  for (const auto& step : cand.path.steps) {
    f.step_rows.push_back(step.predicate < relation_rows_.size()
                              ? relation_rows_[step.predicate][static_cast<int>(step.direction)]
                              : 0);
  }
  f.context_rows.reserve(cand.context.size());
  for (EntityId c : cand.context) {
    f.context_rows.push_back(c < entity_rows_.size() ? entity_rows_[c] : 0);
  }
  return f;
}

std::vector<Var> Model::run_direction(const LstmParams& p, const Var& inputs,
                                      bool reverse) const {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index h = config_.dim / 2;
  // Input contributions for all positions at once.
  const Var projected = ad::add(ad::matmul(inputs, p.input_weight), p.bias);
  std::vector<Var> out(static_cast<std::size_t>(n));
  Var hidden, cell;
  for (Eigen::Index step = 0; step < n; ++step) {
    const Eigen::Index t = reverse ? n - 1 - step : step;
    Var pre = ad::slice(projected, t, 1, 0, 4 * h);
    if (hidden.defined()) pre = ad::add(pre, ad::matmul(hidden, p.hidden_weight));
    const Var in_gate = ad::sigmoid(ad::slice(pre, 0, 1, 0, h));
    const Var forget_gate = ad::sigmoid(ad::slice(pre, 0, 1, h, h));
    const Var candidate = ad::tanh(ad::slice(pre, 0, 1, 2 * h, h));
    const Var out_gate = ad::sigmoid(ad::slice(pre, 0, 1, 3 * h, h));
    cell = cell.defined() ? ad::add(ad::mul(forget_gate, cell), ad::mul(in_gate, candidate))
                          : ad::mul(in_gate, candidate);
    hidden = ad::mul(out_gate, ad::tanh(cell));
    out[static_cast<std::size_t>(t)] = hidden;
  }
  return out;
}

QuestionEncoding Model::encode_question(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw ValidationError("encode_question: empty token list");
  const Var inputs = ad::gather_rows(params_.word_emb, word_rows(tokens));
  const auto fwd = run_direction(params_.forward, inputs, false);
  const auto bwd = run_direction(params_.backward, inputs, true);
  std::vector<Var> rows;
  rows.reserve(fwd.size());
  for (std::size_t t = 0; t < fwd.size(); ++t) rows.push_back(ad::concat<double>({fwd[t], bwd[t]}, 1));
  QuestionEncoding enc;
  enc.states = ad::concat(rows, 0);
  enc.mean = ad::mean(enc.states, 0);
  return enc;
}

QuestionState Model::prepare(const QAInstance& q) const {
  if (q.tokens.empty()) {
    throw ValidationError("question " + std::to_string(q.id) + " has no tokens");
  }
  QuestionState state;
  state.word_rows = word_rows(q.tokens);
  if (config_.kind == ModelKind::kSgemb) {
    state.word_mean = ad::mean(ad::gather_rows(params_.word_emb, state.word_rows), 0);
    return state;
  }
  state.encoding = encode_question(q.tokens);
  for (Aspect a : kAllAspects) {
    if (!config_.aspects.contains(a)) continue;
    const auto& p = params_.projection[static_cast<int>(a)];
    state.keys[static_cast<int>(a)] =
        ad::tanh(ad::add(ad::matmul(state.encoding.states, p.weight), p.bias));
  }
  return state;
}

Var Model::path_vector(const CandidateFeatures& cand, Rng* fallback_rng) const {
  bool compose = !cand.path_row.has_value();
  if (!compose && fallback_rng != nullptr && config_.path_fallback_rate > 0) {
    compose = fallback_rng->uniform() < config_.path_fallback_rate;
  }
  if (!compose) return ad::gather_rows(params_.path_emb, {*cand.path_row});
  if (cand.step_rows.empty()) return ad::gather_rows(params_.path_emb, {0});
  return ad::mean(ad::gather_rows(params_.relation_emb, cand.step_rows), 0);
}

Var Model::aspect_vector(Aspect a, const CandidateFeatures& cand, Rng* fallback_rng) const {
  switch (a) {
    case Aspect::kEntity: return ad::gather_rows(params_.entity_emb, {cand.entity_row});
    case Aspect::kType: return ad::gather_rows(params_.type_emb, {cand.type_row});
    case Aspect::kPath: return path_vector(cand, fallback_rng);
    case Aspect::kContext:
      return ad::mean(ad::gather_rows(params_.entity_emb, cand.context_rows), 0);
  }
  throw ValidationError("unknown aspect");
}

std::pair<Var, Var> Model::aspect_attention(const QuestionState& state, Aspect aspect,
                                            const Var& aspect_vector) const {
  const Var& keys = state.keys[static_cast<int>(aspect)];
  if (!keys.defined()) {
    throw ValidationError(std::string("aspect_attention: aspect '") + to_string(aspect) +
                          "' is not active in this model");
  }
  const Var alpha = ad::softmax(ad::matmul(keys, ad::transpose(aspect_vector)));
  const Var repr = ad::matmul(ad::transpose(alpha), state.encoding.states);
  return {alpha, repr};
}

ScoreTrace Model::score(const QuestionState& state, const CandidateFeatures& cand,
                        Rng* fallback_rng) const {
  ScoreTrace trace;
  std::vector<int> active;
  for (Aspect a : kAllAspects) {
    if (!config_.aspects.contains(a)) continue;
    // A leaf entity has no context; the aspect then contributes nothing.
    if (a == Aspect::kContext && cand.context_rows.empty()) continue;
    auto& t = trace.aspects[static_cast<int>(a)];
    const Var hx = aspect_vector(a, cand, fallback_rng);
    auto [alpha, repr] = aspect_attention(state, a, hx);
    t.active = true;
    t.alpha = alpha;
    t.repr = repr;
    t.similarity = ad::dot(hx, repr);
    t.weight = ad::dot(state.encoding.mean, repr);
    active.push_back(static_cast<int>(a));
  }
  if (active.empty()) {
    trace.score = Var::scalar(0.0);
    return trace;
  }
  if (config_.normalize_aspect_weights) {
    std::vector<Var> raw;
    for (int i : active) raw.push_back(trace.aspects[i].weight);
    const Var norm = ad::softmax(ad::concat(raw, 0));
    for (std::size_t k = 0; k < active.size(); ++k) {
      trace.aspects[active[k]].weight =
          ad::slice(norm, static_cast<Eigen::Index>(k), 1, 0, 1);
    }
  }
  Var total;
  for (int i : active) {
    const Var term = ad::mul(trace.aspects[i].weight, trace.aspects[i].similarity);
    total = total.defined() ? ad::add(total, term) : term;
  }
  trace.score = total;
  return trace;
}

Var Model::sgemb_score(const QuestionState& state, const CandidateFeatures& cand) const {
  const Var question = state.word_mean.defined()
                           ? state.word_mean
                           : ad::mean(ad::gather_rows(params_.word_emb, state.word_rows), 0);
  Var answer;
  auto accumulate = [&](const Var& v) { answer = answer.defined() ? ad::add(answer, v) : v; };
  if (config_.aspects.contains(Aspect::kEntity)) {
    accumulate(ad::gather_rows(params_.entity_emb, {cand.entity_row}));
  }
  if (config_.aspects.contains(Aspect::kPath)) accumulate(path_vector(cand, nullptr));
  if (config_.aspects.contains(Aspect::kContext) && !cand.context_rows.empty()) {
    accumulate(ad::mean(ad::gather_rows(params_.entity_emb, cand.context_rows), 0));
  }
  if (!answer.defined()) return Var::scalar(0.0);
  return ad::dot(question, answer);
}

Var Model::score_var(const QuestionState& state, const CandidateFeatures& cand,
                     Rng* fallback_rng) const {
  if (config_.kind == ModelKind::kSgemb) return sgemb_score(state, cand);
  return score(state, cand, fallback_rng).score;
}

std::vector<double> Model::score_all(const KnowledgeBase& kb, const QAInstance& q,
                                     const CandidateSet& cands) const {
  ad::NoGradGuard no_grad;
  std::vector<double> scores;
  scores.reserve(cands.candidates.size());
  if (cands.candidates.empty()) return scores;
  const QuestionState state = prepare(q);
  for (const auto& c : cands.candidates) {
    scores.push_back(score_var(state, features(kb, c)).item());
  }
  return scores;
}

Prediction Model::predict(const KnowledgeBase& kb, const QAInstance& q,
                          const CandidateSet& cands, double threshold) const {
  return predict_from_scores(cands, score_all(kb, q, cands), threshold);
}

Checkpoint Model::to_checkpoint() const {
  Checkpoint ckpt;
  nlohmann::json cfg;
  cfg["kind"] = to_string(config_.kind);
  cfg["dim"] = config_.dim;
  cfg["aspects"] = config_.aspects.to_string();
  cfg["normalize_aspect_weights"] = config_.normalize_aspect_weights;
  cfg["init"] = to_string(config_.init);
  cfg["init_scale"] = config_.init_scale;
  cfg["path_fallback_rate"] = config_.path_fallback_rate;
  ckpt.meta["config"] = cfg;
  nlohmann::json entities = nlohmann::json::array();
  for (std::size_t i = 1; i < entities_.size(); ++i) {
    const auto& key = entities_.names()[i];
    const auto tab = key.find('\t');
    entities.push_back({key.substr(0, tab), key.substr(tab + 1)});
  }
  ckpt.meta["lexicons"] = {
      {"words", std::vector<std::string>(words_.names().begin() + 2, words_.names().end())},
      {"entities", entities},
      {"types", std::vector<std::string>(types_.names().begin() + 1, types_.names().end())},
      {"paths", std::vector<std::string>(paths_.names().begin() + 1, paths_.names().end())},
      {"relations",
       std::vector<std::string>(relations_.names().begin() + 1, relations_.names().end())},
  };
  for (auto& [name, v] : params_.named()) ckpt.tensors.push_back({name, v.value()});
  return ckpt;
}

Model Model::from_checkpoint(const Checkpoint& ckpt, const KnowledgeBase& kb) {
  Model m;
  try {
    const auto& cfg = ckpt.meta.at("config");
    m.config_.kind = parse_model_kind(cfg.at("kind").get<std::string>());
    m.config_.dim = cfg.at("dim").get<int>();
    m.config_.aspects = parse_aspects(cfg.at("aspects").get<std::string>());
    m.config_.normalize_aspect_weights = cfg.at("normalize_aspect_weights").get<bool>();
    m.config_.init = parse_init_scheme(cfg.value("init", "uniform"));
    m.config_.init_scale = cfg.value("init_scale", 0.08);
    m.config_.path_fallback_rate = cfg.value("path_fallback_rate", 0.1);
    const auto& lex = ckpt.meta.at("lexicons");
    m.words_ = Lexicon({"<pad>", "<unk>"}, 1);
    for (const auto& w : lex.at("words")) m.words_.add(w.get<std::string>());
    m.entities_ = Lexicon({"<unk>"}, 0);
    for (const auto& e : lex.at("entities")) {
      m.entities_.add(e.at(0).get<std::string>() + '\t' + e.at(1).get<std::string>());
    }
    m.types_ = Lexicon({"<unk>"}, 0);
    for (const auto& t : lex.at("types")) m.types_.add(t.get<std::string>());
    m.paths_ = Lexicon({"<unk>"}, 0);
    for (const auto& p : lex.at("paths")) m.paths_.add(p.get<std::string>());
    m.relations_ = Lexicon({"<unk>"}, 0);
    for (const auto& r : lex.at("relations")) m.relations_.add(r.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint meta: ") + e.what());
  }
  // Allocate to get the expected shapes, then overwrite from the blob.
  m.allocate(0);
  for (auto& [name, v] : m.params_.named()) {
    const NamedTensor* t = ckpt.find(name);
    if (t == nullptr) throw ParseError("checkpoint is missing tensor '" + name + "'");
    if (t->value.rows() != v.rows() || t->value.cols() != v.cols()) {
      std::ostringstream msg;
      msg << "checkpoint tensor '" << name << "' has shape [" << t->value.rows() << "x"
          << t->value.cols() << "], expected [" << v.rows() << "x" << v.cols() << "]";
      throw ParseError(msg.str());
    }
    Var target = v;
    target.mutable_value() = t->value;
  }
  m.bind(kb);
  return m;
}

std::vector<Mat> Model::snapshot() const {
  std::vector<Mat> out;
  for (const auto& v : params_.all()) out.push_back(v.value());
  return out;
}

void Model::restore(const std::vector<Mat>& values) {
  auto params = params_.all();
  if (values.size() != params.size()) {
    throw ValidationError("restore: parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_value() = values[i];
}

}  // namespace aarqa
