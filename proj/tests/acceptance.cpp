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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "aarqa/candidates.hpp"
#include "aarqa/grad_check.hpp"
#include "aarqa/metrics.hpp"
#include "aarqa/model.hpp"
#include "aarqa/synth.hpp"
#include "aarqa/train.hpp"
#include "oracles.hpp"

#ifndef AARQA_CLI
#error "AARQA_CLI must name the command-line binary"
#endif

namespace {

using namespace aarqa;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// 1. Loss gradient against central differences on a toy instance.
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  KnowledgeBase kb;
  const EntityId p = kb.add_entity("p1", "patient");
  std::vector<EntityId> meds;
  for (const char* m : {"m1", "m2", "m3"}) {
    meds.push_back(kb.add_entity(m, "medication"));
    kb.add_triple(p, "prescribed_with", meds.back());
  }
  kb.add_triple(meds[0], "has_reason", kb.add_entity("d1", "disease"));
  QAInstance q;
  q.tokens = {"what", "does", "p1", "take"};
  q.root = p;
  q.topic_entities = {p};
  q.answer_type = "medication";
  q.gold = {meds[0]};
  const CandidateSet cands = generate_candidates(kb, q);
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.init_scale = 0.5;
  const Model m(cfg, kb, q.tokens, {"+prescribed_with"}, 21);
  std::vector<CandidateFeatures> f;
  for (const auto& c : cands.candidates) f.push_back(m.features(kb, c));
  // Pairs (gold, each other candidate) under the ranking margin.
  auto loss = [&] {
    const QuestionState st = m.prepare(q);
    const ad::Var pos = m.score_var(st, f[0]);
    ad::Var total;
    for (std::size_t k = 1; k < f.size(); ++k) {
      const ad::Var l = hinge_loss(pos, m.score_var(st, f[k]), 0.9);
      total = total.defined() ? ad::add(total, l) : l;
    }
    return total;
  };
  const double l0 = loss().item();
  const auto res = ad::grad_check<double>(loss, m.params().all(), 1e-4);
  const double secs = seconds_since(t0);
  return {f.size() == 3 && l0 > 0 && res.max_rel_error < 1e-4 && secs < 10,
          fmt("candidates %zu, %zu coordinates, max rel error %.2e (analytic %.3e vs "
              "numeric %.3e), step 1e-4, %.1fs",
              f.size(), res.coordinates, res.max_rel_error, res.analytic, res.numeric, secs)};
}

// 2. Candidate generation against exhaustive DFS on random KBs.
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(20261019);
  int agree = 0;
  std::size_t total_entries = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 20 + rng.below(181);
    const std::size_t m = 2 * n + rng.below(2 * n);
    const std::size_t types = 1 + rng.below(3);
    const auto kb = testing::random_kb(rng.below(1u << 31), n, m, types, 1 + rng.below(3));
    QAInstance q;
    q.root = static_cast<EntityId>(rng.below(n));
    q.topic_entities = {q.root};
    q.answer_type = "t" + std::to_string(rng.below(types));
    // Half the questions carry a constraint taken from inside some path.
    const auto paths = testing::brute_force_paths(kb, q.root, 3);
    if (rng.below(2) && !paths.empty()) {
      const auto& seq = std::get<2>(paths[rng.below(paths.size())]);
      if (seq.size() > 2) {
        q.constraints = {seq[1 + rng.below(seq.size() - 2)]};
        q.topic_entities.push_back(q.constraints[0]);
      }
    }
    std::multiset<std::pair<EntityId, std::string>> got, want;
    for (const auto& c : generate_candidates(kb, q).candidates) {
      got.emplace(c.entity, c.path.key);
    }
    std::set<std::pair<EntityId, std::string>> seen;
    for (const auto& [e, key, seq] :
         testing::brute_force_pruned(kb, q.root, q.constraints, q.answer_type)) {
      if (e != q.root && seen.emplace(e, key).second) want.emplace(e, key);
    }
    agree += got == want;
    total_entries += got.size();
  }
  const double secs = seconds_since(t0);
  return {agree == 100 && secs < 60,
          fmt("%d/100 KBs agree, %zu entries, %.1fs", agree, total_entries, secs)};
}

// 3. The worked pruning example.
Outcome worked_example() {
  const auto kb = testing::walkthrough_kb();
  QAInstance q;
  q.root = *kb.find("P961115", "patient");
  const EntityId ibu = *kb.find("ibuprofen", "medication");
  q.topic_entities = {q.root, ibu};
  q.constraints = {ibu};
  q.answer_type = "disease";
  const auto cands = generate_candidates(kb, q);
  std::vector<std::string> names;
  for (EntityId e : candidate_entities(cands)) names.push_back(kb.entity(e).name);
  const EntityId ctl = *kb.find("pain control", "treatment");
  bool three_hop = false;
  for (const auto& c : extract_subgraph(kb, q.root).candidates) {
    three_hop |= c.entity == ctl && c.path.steps.size() == 3;
  }
  const bool ok = names == std::vector<std::string>{"right leg pain"} && three_hop;
  std::string got;
  for (const auto& s : names) got += (got.empty() ? "" : ", ") + s;
  return {ok, "survivors {" + got + "}, 3-hop 'pain control' " +
                  (three_hop ? "extracted then pruned" : "missing from subgraph")};
}

// 4. Overfitting a 50-question dataset whose answers are one hop away.
Outcome overfit() {
  const auto t0 = Clock::now();
  Rng rng(4);
  KnowledgeBase kb;
  std::vector<EntityId> patients, meds, diseases;
  for (int i = 0; i < 50; ++i) {
    patients.push_back(kb.add_entity("P" + std::to_string(900100 + i), "patient"));
    meds.push_back(kb.add_entity("drug" + std::to_string(i), "medication"));
  }
  for (int i = 0; i < 12; ++i) diseases.push_back(kb.add_entity("dx" + std::to_string(i), "disease"));
  for (int i = 0; i < 50; ++i) {
    kb.add_triple(patients[i], "prescribed_with", meds[i]);
    kb.add_triple(patients[i], "diagnosed_with", diseases[rng.below(diseases.size())]);
    kb.add_triple(meds[i], "has_reason", diseases[rng.below(diseases.size())]);
  }
  Template t = parse_template("what is patient |Patient| prescribed with ?");
  t.answer_type = "medication";
  t.answer_paths = {"+prescribed_with"};
  t.cap = 50;
  const auto data = generate_dataset(kb, {t}, 3, {3, 1, 1});
  TrainConfig c;
  c.model.dim = 32;
  c.learning_rate = 1e-3;
  c.epochs = 30;
  c.batch_size = 8;
  c.seed = 1;
  const auto r = train(data, kb, c);
  const double secs = seconds_since(t0);
  std::size_t answers = 0;
  for (const auto& q : data) answers += q.gold.size();
  return {data.size() == 50 && answers == 50 && r.best_dev.micro_f1 >= 0.9 && secs < 300,
          fmt("%zu questions, best dev micro-F1 %.3f at epoch %d, %.1fs", data.size(),
              r.best_dev.micro_f1, r.best_epoch, secs)};
}

// 5. Direction of the aspect ablation on the desk benchmark.
Outcome ablation_direction() {
  const auto t0 = Clock::now();
  const std::vector<AspectSet> subsets = {parse_aspects("entity+context"),
                                          parse_aspects("type"), parse_aspects("path"),
                                          parse_aspects("type+path")};
  int held_a = 0, held_b = 0, held_c = 0;
  std::string detail;
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const KnowledgeBase kb = generate_kb(desk_profile(), seed);
    const auto data = generate_dataset(kb, desk_templates(), derive_seed(seed, 1));
    TrainConfig c;  // dim 300, lr 1e-4, 10 epochs, batch 32, gamma 0.2
    c.model.init = InitScheme::kTorch;
    c.seed = seed;
    c.jobs = jobs();
    const auto rows = ablate(data, kb, c, subsets);
    auto find = [&](const char* label) {
      return std::find_if(rows.begin(), rows.end(),
                          [&](const AblationRow& r) { return r.label == label; })
          ->test;
    };
    const Metrics ec = find("entity+context"), ty = find("type"), pa = find("path"),
                  tp = find("type+path");
    const bool a = ec.precision > ec.recall && ec.num_predicted < ec.num_gold;
    const bool b = ty.recall > ty.precision && ty.num_predicted > 3 * ty.num_gold;
    const bool cc = tp.micro_f1 >= ty.micro_f1 && tp.micro_f1 >= pa.micro_f1;
    held_a += a;
    held_b += b;
    held_c += cc;
    detail += fmt(
        "\n      seed %llu (gold %zu): e+c #%zu P %.3f R %.3f [%s]; type #%zu P %.3f R %.3f "
        "[%s]; F1 type %.3f path %.3f type+path %.3f [%s]",
        static_cast<unsigned long long>(seed), ec.num_gold, ec.num_predicted, ec.precision,
        ec.recall, a ? "a" : "-", ty.num_predicted, ty.precision, ty.recall, b ? "b" : "-",
        ty.micro_f1, pa.micro_f1, tp.micro_f1, cc ? "c" : "-");
  }
  return {held_a >= 2 && held_b >= 2 && held_c >= 2,
          fmt("(a) %d/3 (b) %d/3 (c) %d/3 seeds, %.0fs", held_a, held_b, held_c,
              seconds_since(t0)) +
              detail};
}

// 6. Exact score ties under type-only and path-only scoring.
Outcome tie_invariants() {
  const KnowledgeBase kb = generate_kb(desk_profile(), 7);
  const auto data = generate_dataset(kb, desk_templates(), derive_seed(7, 1));
  std::vector<const QAInstance*> qs;
  for (const auto& q : data) qs.push_back(&q);
  const auto cands = build_candidates(kb, qs, jobs());
  std::set<std::string> keys;
  for (const auto& cs : cands) {
    for (const auto& c : cs.candidates) keys.insert(c.path.key);
  }
  std::set<std::string> words;
  for (const auto& q : data) words.insert(q.tokens.begin(), q.tokens.end());
  Rng rng(6);
  std::size_t checked[2] = {0, 0}, violations[2] = {0, 0};
  for (int mode = 0; mode < 2; ++mode) {
    ModelConfig cfg;
    cfg.dim = 32;
    cfg.init = InitScheme::kTorch;
    cfg.aspects = parse_aspects(mode == 0 ? "type" : "path");
    const Model m(cfg, kb, {words.begin(), words.end()}, {keys.begin(), keys.end()}, 5);
    for (int guard = 0; checked[mode] < 1000 && guard < 200000; ++guard) {
      const std::size_t qi = rng.below(qs.size());
      const auto& cs = cands[qi].candidates;
      if (cs.size() < 2) continue;
      const auto& a = cs[rng.below(cs.size())];
      const auto& b = cs[rng.below(cs.size())];
      if (&a == &b || a.etype != b.etype) continue;
      if (mode == 1 && a.path.key != b.path.key) continue;
      const QuestionState st = m.prepare(*qs[qi]);
      ad::NoGradGuard no_grad;
      const double sa = m.score_var(st, m.features(kb, a)).item();
      const double sb = m.score_var(st, m.features(kb, b)).item();
      ++checked[mode];
      violations[mode] += sa != sb;
    }
  }
  return {checked[0] == 1000 && checked[1] == 1000 && violations[0] + violations[1] == 0,
          fmt("type-only %zu/%zu violations, path-only %zu/%zu violations", violations[0],
              checked[0], violations[1], checked[1])};
}

// 7. Metrics against a counting oracle, and monotone prediction counts.
Outcome metric_correctness() {
  Rng rng(77);
  double worst = 0;
  std::size_t mismatched_counts = 0, identity_failures = 0, monotone_failures = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    std::vector<QuestionOutcome> o(n);
    std::vector<std::vector<EntityId>> pred(n), gold(n);
    std::vector<long> best(n, -1);
    for (std::size_t q = 0; q < n; ++q) {
      CandidateSet cs;
      std::vector<double> scores;
      const std::size_t k = 1 + rng.below(12);
      for (std::size_t i = 0; i < k; ++i) {
        CandidateAnswer c;
        c.entity = static_cast<EntityId>(rng.below(15));
        cs.candidates.push_back(c);
        scores.push_back(rng.uniform(-1, 1));
      }
      std::sort(cs.candidates.begin(), cs.candidates.end(),
                [](const auto& a, const auto& b) { return a.entity < b.entity; });
      std::set<EntityId> g;
      const std::size_t ng = 1 + rng.below(5);
      for (std::size_t i = 0; i < ng; ++i) g.insert(static_cast<EntityId>(rng.below(15)));
      std::size_t last = 0;
      for (double gamma = 0; gamma <= 2.05; gamma += 0.1) {
        const auto n_pred = predict_from_scores(cs, scores, gamma).entities.size();
        monotone_failures += n_pred < last;
        last = n_pred;
      }
      const Prediction p = predict_from_scores(cs, scores, rng.uniform(0, 1));
      o[q] = {p.entities, {g.begin(), g.end()}, p.best};
      pred[q] = p.entities;
      std::reverse(pred[q].begin(), pred[q].end());  // the oracle takes any order
      gold[q] = o[q].gold;
      best[q] = static_cast<long>(*p.best);
    }
    const Metrics m = compute_metrics(o);
    const auto r = testing::count_metrics(pred, gold, best);
    mismatched_counts += m.num_predicted != r.predicted || m.num_gold != r.gold ||
                         m.num_correct != r.correct;
    for (double d : {m.precision - r.precision, m.recall - r.recall, m.micro_f1 - r.f1,
                     m.macro_f1 - r.macro_f1, m.accuracy - r.accuracy}) {
      worst = std::max(worst, std::abs(d));
    }
    const double pr = m.precision + m.recall;
    const double expect = pr > 0 ? 2 * m.precision * m.recall / pr : 0;
    identity_failures += std::abs(m.micro_f1 - expect) > 1e-12;
  }
  return {worst <= 1e-12 && mismatched_counts == 0 && identity_failures == 0 &&
              monotone_failures == 0,
          fmt("500 trials: max deviation %.1e, count mismatches %zu, F1 identity failures "
              "%zu, gamma monotonicity failures %zu",
              worst, mismatched_counts, identity_failures, monotone_failures)};
}

int shell(const std::string& args) {
  const std::string cmd = std::string(AARQA_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. synth -> train -> eval twice through the command-line tool.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("aarqa_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> metrics;
  bool ran = true;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    const std::string data =
        " --kb " + (d / "synth/kb.tsv").string() + " --dataset " + (d / "synth/dataset.jsonl").string();
    ran &= shell("synth --profile desk --seed 11 --out " + (d / "synth").string()) == 0;
    ran &= shell("train" + data + " --seed 11 --dim 16 --epochs 2 --lr 0.005 --jobs " +
                 std::to_string(jobs()) + " --out " + (d / "train").string()) == 0;
    ran &= shell("eval" + data + " --checkpoint " + (d / "train/model.json").string() +
                 " --split test --out " + (d / "eval").string()) == 0;
    metrics.push_back(slurp(d / "eval/metrics.json"));
  }
  const bool same = ran && !metrics[0].empty() && metrics[0] == metrics[1];
  const bool ckpt = slurp(root / "a/train/model.bin") == slurp(root / "b/train/model.bin");
  fs::remove_all(root);
  return {same && ckpt, std::string(ran ? "pipeline ran" : "pipeline failed") +
                            ", metrics JSON " + (same ? "identical" : "differs") +
                            ", checkpoint bytes " + (ckpt ? "identical" : "differ")};
}

// 9. Medications profile at one tenth scale.
Outcome calibration() {
  const KnowledgeBase kb = generate_kb(medications_profile(0.1), 2026);
  const double e = static_cast<double>(kb.entity_count());
  const double t = static_cast<double>(kb.triples().size());
  const double de = std::abs(e - 2882.1) / 2882.1;
  const double dt = std::abs(t - 5351.9) / 5351.9;
  const std::size_t types = kb.types().size();
  return {de <= 0.05 && dt <= 0.05 && types == 46 && kb.relation_count() == 14,
          fmt("%.0f entities (%.2f%% off), %.0f triples (%.2f%% off), %zu types, %zu relations",
              e, 100 * de, t, 100 * dt, types, kb.relation_count())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"candidate oracle equivalence", oracle_equivalence},
      {"worked pruning example", worked_example},
      {"overfit sanity", overfit},
      {"ablation direction", ablation_direction},
      {"tie invariants", tie_invariants},
      {"metric correctness", metric_correctness},
      {"pipeline determinism", determinism},
      {"synthetic calibration", calibration},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
