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

#include "aarqa/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "aarqa/error.hpp"

namespace aarqa {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// Report position of the standard ablation subsets; others sort last.
int report_rank(AspectSet s) {
  static const AspectSet kOrder[] = {
      AspectSet::all(),
      AspectSet().with(Aspect::kEntity).with(Aspect::kContext),
      AspectSet().with(Aspect::kType),
      AspectSet().with(Aspect::kPath),
      AspectSet().with(Aspect::kType).with(Aspect::kPath),
  };
  for (int i = 0; i < 5; ++i) {
    if (kOrder[i] == s) return i;
  }
  return 5;
}

}  // namespace

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(c.learning_rate >= 0) || !std::isfinite(c.learning_rate)) {
    fail("learning_rate must be a non-negative number");
  }
  if (c.epochs < 1) fail("epochs must be >= 1");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (!(c.margin > 0 && c.margin < 1)) fail("margin must lie in (0, 1)");
  if (!(c.threshold >= 0)) fail("threshold must be >= 0");
  if (c.model.dim <= 0 || c.model.dim % 2 != 0) fail("dim must be a positive even number");
  if (c.model.aspects.empty()) fail("at least one aspect must be active");
  if (!(c.model.path_fallback_rate >= 0 && c.model.path_fallback_rate <= 1)) {
    fail("path_fallback_rate must lie in [0, 1]");
  }
  if (!(c.model.init_scale > 0)) fail("init_scale must be positive");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1)) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(c.adam_epsilon > 0)) fail("adam_epsilon must be positive");
  if (c.jobs < 1) fail("jobs must be >= 1");
  if (c.max_hops < 1) fail("max_hops must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"margin", c.margin},
          {"threshold", c.threshold},
          {"seed", c.seed},
          {"model", to_string(c.model.kind)},
          {"dim", c.model.dim},
          {"aspects", c.model.aspects.to_string()},
          {"normalize_aspect_weights", c.model.normalize_aspect_weights},
          {"init", to_string(c.model.init)},
          {"init_scale", c.model.init_scale},
          {"path_fallback_rate", c.model.path_fallback_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"jobs", c.jobs},
          {"max_hops", c.max_hops}};
}

TrainConfig train_config_from_json(const nlohmann::json& obj, TrainConfig c) {
  if (!obj.is_object()) throw ConfigError("expected a JSON object");
  static const std::set<std::string> kKnown = {
      "learning_rate", "lr",     "epochs",    "batch_size", "margin",
      "gamma",         "threshold", "seed",   "model",      "dim",
      "aspects",       "normalize_aspect_weights", "init", "init_scale",
      "path_fallback_rate", "beta1", "beta2", "adam_epsilon", "jobs", "max_hops"};
  for (const auto& [key, value] : obj.items()) {
    if (!kKnown.count(key)) throw ConfigError("unknown key '" + key + "'");
  }
  try {
    if (obj.contains("model")) c.model.kind = parse_model_kind(obj["model"].get<std::string>());
    if (obj.contains("aspects")) {
      c.model.aspects = parse_aspects(obj["aspects"].get<std::string>());
    }
    if (obj.contains("init")) c.model.init = parse_init_scheme(obj["init"].get<std::string>());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    if (obj.contains("learning_rate")) c.learning_rate = obj["learning_rate"].get<double>();
    if (obj.contains("lr")) c.learning_rate = obj["lr"].get<double>();
    if (obj.contains("epochs")) c.epochs = obj["epochs"].get<int>();
    if (obj.contains("batch_size")) c.batch_size = obj["batch_size"].get<std::size_t>();
    if (obj.contains("gamma")) {
      c.margin = c.threshold = obj["gamma"].get<double>();
    }
    if (obj.contains("margin")) c.margin = obj["margin"].get<double>();
    if (obj.contains("threshold")) c.threshold = obj["threshold"].get<double>();
    if (obj.contains("seed")) c.seed = obj["seed"].get<std::uint64_t>();
    if (obj.contains("dim")) c.model.dim = obj["dim"].get<int>();
    if (obj.contains("normalize_aspect_weights")) {
      c.model.normalize_aspect_weights = obj["normalize_aspect_weights"].get<bool>();
    }
    if (obj.contains("init_scale")) c.model.init_scale = obj["init_scale"].get<double>();
    if (obj.contains("path_fallback_rate")) {
      c.model.path_fallback_rate = obj["path_fallback_rate"].get<double>();
    }
    if (obj.contains("beta1")) c.beta1 = obj["beta1"].get<double>();
    if (obj.contains("beta2")) c.beta2 = obj["beta2"].get<double>();
    if (obj.contains("adam_epsilon")) c.adam_epsilon = obj["adam_epsilon"].get<double>();
    if (obj.contains("jobs")) c.jobs = obj["jobs"].get<int>();
    if (obj.contains("max_hops")) c.max_hops = obj["max_hops"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  return c;
}

std::vector<TrainingPair> sample_pairs(const QAInstance& q, const CandidateSet& cands,
                                       std::uint64_t seed, bool* skipped) {
  std::vector<TrainingPair> pairs;
  std::vector<const CandidateAnswer*> negatives;
  for (const auto& c : cands.candidates) {
    if (!std::binary_search(q.gold.begin(), q.gold.end(), c.entity)) negatives.push_back(&c);
  }
  std::vector<const CandidateAnswer*> positives;
  for (EntityId g : q.gold) {
    const CandidateAnswer* first = nullptr;
    const CandidateAnswer* on_path = nullptr;
    // Candidates are sorted by entity, so the entries of g are contiguous.
    auto it = std::lower_bound(
        cands.candidates.begin(), cands.candidates.end(), g,
        [](const CandidateAnswer& c, EntityId e) { return c.entity < e; });
    for (; it != cands.candidates.end() && it->entity == g; ++it) {
      if (!first) first = &*it;
      if (!on_path && std::find(q.answer_paths.begin(), q.answer_paths.end(),
                                it->path.key) != q.answer_paths.end()) {
        on_path = &*it;
      }
    }
    if (on_path) {
      positives.push_back(on_path);
    } else if (first) {
      positives.push_back(first);
    }
  }
  if (positives.empty() || negatives.empty()) {
    if (skipped) *skipped = true;
    return pairs;
  }
  if (skipped) *skipped = false;
  Rng rng(seed);
  for (const auto* p : positives) {
    pairs.push_back({&q, p, negatives[rng.below(negatives.size())]});
  }
  return pairs;
}

Adam::Adam(std::vector<ad::Var> params, double learning_rate, double beta1, double beta2,
           double epsilon)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2),
      eps_(epsilon) {
  for (const auto& p : params_) {
    m_.push_back(ad::Mat::Zero(p.rows(), p.cols()));
    v_.push_back(ad::Mat::Zero(p.rows(), p.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const ad::Mat& g = p.grad();
    if (g.size() == 0) continue;
    m_[i] = beta1_ * m_[i] + (1 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1 - beta2_) * g.cwiseProduct(g);
    p.mutable_value().array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

std::vector<CandidateSet> build_candidates(const KnowledgeBase& kb,
                                           const std::vector<const QAInstance*>& questions,
                                           int jobs, int max_hops) {
  std::vector<CandidateSet> out(questions.size());
  parallel_for(questions.size(), jobs, [&](std::size_t i) {
    out[i] = generate_candidates(kb, *questions[i], max_hops);
  });
  return out;
}

std::vector<QuestionOutcome> predict_outcomes(const Model& model, const KnowledgeBase& kb,
                                              const std::vector<const QAInstance*>& questions,
                                              const std::vector<CandidateSet>& cands,
                                              double threshold, int jobs) {
  if (cands.size() != questions.size()) {
    throw ValidationError("predict: candidate sets do not match questions");
  }
  std::vector<QuestionOutcome> out(questions.size());
  parallel_for(questions.size(), jobs, [&](std::size_t i) {
    const Prediction p = model.predict(kb, *questions[i], cands[i], threshold);
    out[i].predicted = p.entities;
    out[i].gold = questions[i]->gold;
    out[i].best = p.best;
  });
  return out;
}

Metrics evaluate(const Model& model, const KnowledgeBase& kb,
                 const std::vector<const QAInstance*>& questions,
                 const std::vector<CandidateSet>& cands, double threshold, int jobs) {
  const auto outcomes = predict_outcomes(model, kb, questions, cands, threshold, jobs);
  return compute_metrics(outcomes);
}

Metrics evaluate(const Model& model, const KnowledgeBase& kb,
                 const std::vector<const QAInstance*>& questions, double threshold,
                 int jobs) {
  return evaluate(model, kb, questions, build_candidates(kb, questions, jobs), threshold,
                  jobs);
}

TrainResult train(const std::vector<QAInstance>& data, const KnowledgeBase& kb,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  const auto train_q = select_split(data, Split::kTrain);
  const auto dev_q = select_split(data, Split::kDev);
  if (train_q.empty()) throw ValidationError("train: the train split is empty");
  if (dev_q.empty()) throw ValidationError("train: the dev split is empty");

  const auto train_c = build_candidates(kb, train_q, config.jobs, config.max_hops);
  const auto dev_c = build_candidates(kb, dev_q, config.jobs, config.max_hops);

  std::set<std::string> words, keys;
  for (const auto* q : train_q) words.insert(q->tokens.begin(), q->tokens.end());
  for (const auto& cs : train_c) {
    for (const auto& c : cs.candidates) keys.insert(c.path.key);
  }

  TrainResult result;
  result.model = Model(config.model, kb, {words.begin(), words.end()},
                       {keys.begin(), keys.end()}, derive_seed(config.seed, 1));
  Model& model = result.model;
  Adam adam(model.params().all(), config.learning_rate, config.beta1, config.beta2,
            config.adam_epsilon);

  std::vector<ad::Mat> best = model.snapshot();
  bool have_best = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(config.seed, 1000 + epoch);
    std::vector<std::size_t> order(train_q.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(epoch_seed, 0));
    shuffle_rng.shuffle(order);

    // (question index, pair) in visiting order; pairs of one question stay
    // adjacent so their batch shares one encoding.
    std::vector<std::pair<std::size_t, TrainingPair>> pairs;
    std::size_t skipped = 0;
    for (std::size_t qi : order) {
      bool skip = false;
      const auto qp = sample_pairs(*train_q[qi], train_c[qi],
                                   derive_seed(epoch_seed, 1 + train_q[qi]->id), &skip);
      if (skip) ++skipped;
      for (const auto& p : qp) pairs.emplace_back(qi, p);
    }
    result.skipped_questions = skipped;

    Rng fallback_rng(derive_seed(epoch_seed, 0x7fffffff));
    double loss_total = 0;
    for (std::size_t start = 0; start < pairs.size(); start += config.batch_size) {
      const std::size_t end = std::min(pairs.size(), start + config.batch_size);
      adam.zero_grad();
      ad::Var batch_loss;
      QuestionState state;
      std::size_t state_q = SIZE_MAX;
      for (std::size_t k = start; k < end; ++k) {
        const auto& [qi, pair] = pairs[k];
        if (qi != state_q) {
          state = model.prepare(*train_q[qi]);
          state_q = qi;
        }
        const ad::Var pos =
            model.score_var(state, model.features(kb, *pair.positive), &fallback_rng);
        const ad::Var neg =
            model.score_var(state, model.features(kb, *pair.negative), &fallback_rng);
        const ad::Var l = hinge_loss(pos, neg, config.margin);
        batch_loss = batch_loss.defined() ? batch_loss + l : l;
      }
      const ad::Var mean = ad::scale(batch_loss, 1.0 / static_cast<double>(end - start));
      const double value = mean.item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << ", batch "
            << start / config.batch_size;
        throw DivergenceError(msg.str());
      }
      loss_total += value * static_cast<double>(end - start);
      mean.backward();
      adam.step();
    }

    EpochLog log;
    log.epoch = epoch;
    log.pairs = pairs.size();
    log.train_loss = pairs.empty() ? 0.0 : loss_total / static_cast<double>(pairs.size());
    const Metrics dev = evaluate(model, kb, dev_q, dev_c, config.threshold, config.jobs);
    log.dev_micro_f1 = dev.micro_f1;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (!have_best || dev.micro_f1 > result.best_dev.micro_f1) {
      have_best = true;
      best = model.snapshot();
      result.best_epoch = epoch;
      result.best_dev = dev;
    }
  }
  if (!have_best) {
    result.best_dev = evaluate(model, kb, dev_q, dev_c, config.threshold, config.jobs);
  }
  model.restore(best);
  return result;
}

std::vector<AblationRow> ablate(const std::vector<QAInstance>& data, const KnowledgeBase& kb,
                                const TrainConfig& config,
                                const std::vector<AspectSet>& subsets) {
  const auto test_q = select_split(data, Split::kTest);
  if (test_q.empty()) throw ValidationError("ablate: the test split is empty");
  const auto test_c = build_candidates(kb, test_q, config.jobs, config.max_hops);
  // Subsets train independently; each run is deterministic on its own, so
  // spreading them over threads leaves the rows unchanged.
  std::vector<AblationRow> rows(subsets.size());
  parallel_for(subsets.size(), config.jobs, [&](std::size_t i) {
    TrainConfig c = config;
    c.model.aspects = subsets[i];
    c.jobs = 1;
    TrainResult r = train(data, kb, c);
    AblationRow& row = rows[i];
    row.label = subsets[i].to_string();
    row.aspects = subsets[i];
    row.best_epoch = r.best_epoch;
    row.dev = r.best_dev;
    row.test = evaluate(r.model, kb, test_q, test_c, c.threshold, 1);
  });
  std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
    return report_rank(a.aspects) < report_rank(b.aspects);
  });
  return rows;
}

nlohmann::json to_json(const std::vector<AblationRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"aspects", r.label},
                   {"best_epoch", r.best_epoch},
                   {"dev", to_json(r.dev)},
                   {"test", to_json(r.test)}});
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows, ModelKind kind) {
  const std::string prefix = kind == ModelKind::kAar ? "AAR" : "SGEmb";
  std::vector<std::string> labels;
  std::size_t width = 5;
  for (const auto& r : rows) {
    labels.push_back(r.aspects == AspectSet::all() ? prefix
                                                   : prefix + " (" + r.label + ")");
    width = std::max(width, labels.back().size());
  }
  std::string out = metrics_header(width) + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += metrics_row(labels[i], rows[i].test, width) + "\n";
  }
  return out;
}

}  // namespace aarqa
