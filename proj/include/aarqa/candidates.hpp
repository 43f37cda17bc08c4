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

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aarqa/kb_store.hpp"
#include "aarqa/qa_templates.hpp"

namespace aarqa {

struct PathStep {
  RelationId predicate = 0;
  Direction direction = Direction::kOut;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

// Relation sequence from the root to a candidate. The key joins steps as
// "+pred" (edge followed forward) or "-pred" (edge followed backward)
// separated by '/'.
struct RelationPath {
  std::vector<PathStep> steps;
  std::string key;
};

std::string format_step(const KnowledgeBase& kb, const PathStep& step);
std::string format_path_key(const KnowledgeBase& kb,
                            std::span<const PathStep> steps);

// Splits a path key into (predicate name, direction) pairs. Throws
// ParseError on a step without a leading '+' or '-'.
std::vector<std::pair<std::string, Direction>> parse_path_key(
    std::string_view key);

// One (entity, relation path) candidate. Distinct simple paths that share
// the same entity and relation sequence are merged into one candidate and
// listed in `routes`, each as the entity sequence root..entity.
struct CandidateAnswer {
  EntityId entity = 0;
  std::string etype;
  RelationPath path;
  std::vector<EntityId> context;  // neighbors(entity) projected to ids
  std::vector<std::vector<EntityId>> routes;
};

struct CandidateSet {
  EntityId root = 0;
  std::vector<CandidateAnswer> candidates;  // sorted by (entity, path key)
};

// Every simple path of 1..max_hops steps from root, following edges in
// either direction.
CandidateSet extract_subgraph(const KnowledgeBase& kb, EntityId root,
                              int max_hops = 3);

// Keeps candidates of answer_type with at least one route that passes
// through every constraint (a constraint equal to the root always holds).
// Routes that fail the constraints are dropped.
CandidateSet prune(CandidateSet cands, std::span<const EntityId> constraints,
                   std::string_view answer_type);

CandidateSet generate_candidates(const KnowledgeBase& kb, const QAInstance& q,
                                 int max_hops = 3);

// Distinct candidate entities, ascending.
std::vector<EntityId> candidate_entities(const CandidateSet& cands);

}  // namespace aarqa
