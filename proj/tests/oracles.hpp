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

// Independent reference implementations used by the tests. They share no
// code with the library beyond the KB container and favor obviousness over
// speed.

#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "aarqa/kb_store.hpp"
#include "aarqa/rng.hpp"

namespace aarqa::testing {

// Random KB with `n` entities over `types` types and up to `triples`
// distinct triples over `relations` predicates.
inline KnowledgeBase random_kb(std::uint64_t seed, std::size_t n, std::size_t triples,
                               std::size_t types = 3, std::size_t relations = 3) {
  Rng rng(seed);
  KnowledgeBase kb;
  for (std::size_t i = 0; i < n; ++i) {
    kb.add_entity("e" + std::to_string(i), "t" + std::to_string(rng.below(types)));
  }
  std::set<std::tuple<EntityId, std::size_t, EntityId>> seen;
  for (std::size_t k = 0; k < triples * 4 && seen.size() < triples; ++k) {
    const auto s = static_cast<EntityId>(rng.below(n));
    const auto o = static_cast<EntityId>(rng.below(n));
    const std::size_t r = rng.below(relations);
    if (s == o || !seen.insert({s, r, o}).second) continue;
    kb.add_triple(s, "r" + std::to_string(r), o);
  }
  return kb;
}

// Incident triples of `id` by a scan over the triple list.
inline std::size_t scan_degree(const KnowledgeBase& kb, EntityId id) {
  std::size_t n = 0;
  for (const auto& t : kb.triples()) n += (t.subject == id) + (t.object == id);
  return n;
}

// One enumerated path: endpoint, key, and the full entity sequence.
using PathRecord = std::tuple<EntityId, std::string, std::vector<EntityId>>;

// Every simple path of 1..max_hops steps from root by exhaustive DFS over
// the raw triple list, in either edge direction.
inline std::vector<PathRecord> brute_force_paths(const KnowledgeBase& kb, EntityId root,
                                                 int max_hops) {
  std::vector<PathRecord> out;
  std::vector<EntityId> seq{root};
  std::vector<std::string> steps;
  auto join = [&] {
    std::string key;
    for (std::size_t i = 0; i < steps.size(); ++i) key += (i ? "/" : "") + steps[i];
    return key;
  };
  auto dfs = [&](auto&& self, EntityId at) -> void {
    if (static_cast<int>(steps.size()) == max_hops) return;
    for (const auto& t : kb.triples()) {
      for (int dir = 0; dir < 2; ++dir) {
        const EntityId from = dir == 0 ? t.subject : t.object;
        const EntityId to = dir == 0 ? t.object : t.subject;
        if (from != at) continue;
        if (std::find(seq.begin(), seq.end(), to) != seq.end()) continue;
        seq.push_back(to);
        steps.push_back((dir == 0 ? "+" : "-") + kb.relation_name(t.predicate));
        out.emplace_back(to, join(), seq);
        self(self, to);
        seq.pop_back();
        steps.pop_back();
      }
    }
  };
  dfs(dfs, root);
  std::sort(out.begin(), out.end());
  return out;
}

// Filters brute-force paths by answer type and by constraints appearing
// strictly inside the path (a constraint equal to the root always holds).
inline std::vector<PathRecord> brute_force_pruned(const KnowledgeBase& kb, EntityId root,
                                                  const std::vector<EntityId>& constraints,
                                                  const std::string& answer_type,
                                                  int max_hops = 3) {
  std::vector<PathRecord> out;
  for (auto& rec : brute_force_paths(kb, root, max_hops)) {
    const auto& [entity, key, seq] = rec;
    if (kb.entity(entity).etype != answer_type) continue;
    bool ok = true;
    for (EntityId c : constraints) {
      if (c == root) continue;
      if (std::find(seq.begin() + 1, seq.end() - 1, c) == seq.end() - 1) ok = false;
    }
    if (ok) out.push_back(rec);
  }
  return out;
}

struct CountOracle {
  double precision = 0, recall = 0, f1 = 0, macro_f1 = 0, accuracy = 0;
  std::size_t predicted = 0, gold = 0, correct = 0;
};

// Counts hits element by element over unsorted input.
inline CountOracle count_metrics(const std::vector<std::vector<EntityId>>& pred,
                                 const std::vector<std::vector<EntityId>>& gold,
                                 const std::vector<long>& best) {
  CountOracle o;
  double macro = 0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < pred.size(); ++q) {
    std::size_t c = 0;
    for (EntityId p : pred[q]) {
      for (EntityId g : gold[q]) c += p == g;
    }
    o.predicted += pred[q].size();
    o.gold += gold[q].size();
    o.correct += c;
    const double p = pred[q].empty() ? 0 : double(c) / pred[q].size();
    const double r = gold[q].empty() ? 0 : double(c) / gold[q].size();
    macro += p + r > 0 ? 2 * p * r / (p + r) : 0;
    for (EntityId g : gold[q]) hits += best[q] == static_cast<long>(g);
  }
  o.precision = o.predicted ? double(o.correct) / o.predicted : 0;
  o.recall = o.gold ? double(o.correct) / o.gold : 0;
  o.f1 = o.precision + o.recall > 0 ? 2 * o.precision * o.recall / (o.precision + o.recall) : 0;
  if (!pred.empty()) {
    o.macro_f1 = macro / pred.size();
    o.accuracy = double(hits) / pred.size();
  }
  return o;
}

// The patient subgraph of the worked candidate-generation example: a
// patient on two drugs, one prescribed for leg pain that has a comorbid
// treatment goal.
inline KnowledgeBase walkthrough_kb() {
  KnowledgeBase kb;
  const EntityId p = kb.add_entity("P961115", "patient");
  const EntityId ibu = kb.add_entity("ibuprofen", "medication");
  const EntityId alb = kb.add_entity("albuterol", "medication");
  const EntityId pain = kb.add_entity("right leg pain", "disease");
  const EntityId ctl = kb.add_entity("pain control", "treatment");
  const EntityId wheeze = kb.add_entity("wheezing", "disease");
  kb.add_triple(p, "prescribed_with", ibu);
  kb.add_triple(p, "prescribed_with", alb);
  kb.add_triple(ibu, "has_reason", pain);
  kb.add_triple(pain, "has_comorbidity", ctl);
  kb.add_triple(alb, "has_reason", wheeze);
  return kb;
}

}  // namespace aarqa::testing
