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

#include "aarqa/candidates.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "aarqa/error.hpp"

namespace aarqa {

std::string format_step(const KnowledgeBase& kb, const PathStep& step) {
  std::string s(1, step.direction == Direction::kOut ? '+' : '-');
  s += kb.relation_name(step.predicate);
  return s;
}

std::string format_path_key(const KnowledgeBase& kb,
                            std::span<const PathStep> steps) {
  std::string key;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) key.push_back('/');
    key += format_step(kb, steps[i]);
  }
  return key;
}

std::vector<std::pair<std::string, Direction>> parse_path_key(
    std::string_view key) {
  std::vector<std::pair<std::string, Direction>> steps;
  std::size_t start = 0;
  while (start <= key.size()) {
    std::size_t slash = key.find('/', start);
    if (slash == std::string_view::npos) slash = key.size();
    std::string_view step = key.substr(start, slash - start);
    if (step.size() < 2 || (step[0] != '+' && step[0] != '-')) {
      throw ParseError("malformed path step '" + std::string(step) +
                       "' in path key '" + std::string(key) + "'");
    }
    steps.emplace_back(std::string(step.substr(1)),
                       step[0] == '+' ? Direction::kOut : Direction::kIn);
    start = slash + 1;
  }
  return steps;
}

namespace {

struct Walker {
  const KnowledgeBase& kb;
  int max_hops;
  std::vector<EntityId> route;
  std::vector<PathStep> steps;
  // (entity, key) -> index into out.
  std::map<std::pair<EntityId, std::string>, std::size_t> index;
  std::vector<CandidateAnswer> out;

  void record() {
    const EntityId entity = route.back();
    std::string key = format_path_key(kb, steps);
    auto [it, inserted] = index.emplace(std::make_pair(entity, key), out.size());
    if (inserted) {
      CandidateAnswer cand;
      cand.entity = entity;
      cand.path.steps = steps;
      cand.path.key = std::move(key);
      out.push_back(std::move(cand));
    }
    out[it->second].routes.push_back(route);
  }

  void walk(EntityId at) {
    if (static_cast<int>(steps.size()) == max_hops) return;
    for (const Incidence& inc : kb.neighbors(at)) {
      if (std::find(route.begin(), route.end(), inc.neighbor) != route.end()) {
        continue;
      }
      route.push_back(inc.neighbor);
      steps.push_back(PathStep{inc.predicate, inc.direction});
      record();
      walk(inc.neighbor);
      steps.pop_back();
      route.pop_back();
    }
  }
};

void fill_context(const KnowledgeBase& kb, std::vector<CandidateAnswer>& cands) {
  for (auto& c : cands) {
    auto nbrs = kb.neighbors(c.entity);
    c.context.clear();
    c.context.reserve(nbrs.size());
    for (const Incidence& inc : nbrs) c.context.push_back(inc.neighbor);
  }
}

// Sorted candidates with etype and routes but no context yet.
CandidateSet extract_bare(const KnowledgeBase& kb, EntityId root, int max_hops) {
  if (root >= kb.entity_count()) {
    throw ValidationError("extract_subgraph: unknown root entity id " +
                          std::to_string(root));
  }
  if (max_hops < 1) {
    throw ValidationError("extract_subgraph: max_hops must be >= 1");
  }
  Walker walker{kb, max_hops, {root}, {}, {}, {}};
  walker.walk(root);
  CandidateSet set;
  set.root = root;
  set.candidates = std::move(walker.out);
  auto& cands = set.candidates;
  for (auto& c : cands) {
    c.etype = kb.entity(c.entity).etype;
    std::sort(c.routes.begin(), c.routes.end());
  }
  std::sort(cands.begin(), cands.end(),
            [](const CandidateAnswer& a, const CandidateAnswer& b) {
              return std::tie(a.entity, a.path.key) <
                     std::tie(b.entity, b.path.key);
            });
  return set;
}

bool route_satisfies(const std::vector<EntityId>& route, EntityId root,
                     std::span<const EntityId> constraints) {
  for (EntityId c : constraints) {
    if (c == root) continue;
    // Interior entities only: the candidate itself cannot be its own
    // constraint.
    bool found = false;
    for (std::size_t i = 1; i + 1 < route.size(); ++i) {
      if (route[i] == c) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

CandidateSet extract_subgraph(const KnowledgeBase& kb, EntityId root,
                              int max_hops) {
  CandidateSet set = extract_bare(kb, root, max_hops);
  fill_context(kb, set.candidates);
  return set;
}

CandidateSet prune(CandidateSet cands, std::span<const EntityId> constraints,
                   std::string_view answer_type) {
  std::vector<CandidateAnswer> kept;
  kept.reserve(cands.candidates.size());
  for (auto& c : cands.candidates) {
    if (c.etype != answer_type) continue;
    std::vector<std::vector<EntityId>> routes;
    for (auto& r : c.routes) {
      if (route_satisfies(r, cands.root, constraints)) {
        routes.push_back(std::move(r));
      }
    }
    if (routes.empty()) continue;
    c.routes = std::move(routes);
    kept.push_back(std::move(c));
  }
  cands.candidates = std::move(kept);
  return cands;
}

CandidateSet generate_candidates(const KnowledgeBase& kb, const QAInstance& q,
                                 int max_hops) {
  if (q.topic_entities.empty()) {
    throw ValidationError("question " + std::to_string(q.id) +
                          " has no topic entities");
  }
  for (EntityId id : q.topic_entities) {
    if (id >= kb.entity_count()) {
      throw ValidationError("question " + std::to_string(q.id) +
                            ": unresolved topic entity id " +
                            std::to_string(id));
    }
  }
  // Context lists are only materialized for the candidates that survive.
  CandidateSet set =
      prune(extract_bare(kb, q.root, max_hops), q.constraints, q.answer_type);
  fill_context(kb, set.candidates);
  return set;
}

std::vector<EntityId> candidate_entities(const CandidateSet& cands) {
  std::vector<EntityId> ids;
  ids.reserve(cands.candidates.size());
  for (const auto& c : cands.candidates) ids.push_back(c.entity);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace aarqa
