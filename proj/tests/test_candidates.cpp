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


#include <map>

#include "aarqa/candidates.hpp"
#include "aarqa/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

namespace aarqa {
namespace {

using testing::PathRecord;

// Flattens candidates into (entity, key, route) records.
std::vector<PathRecord> records(const CandidateSet& set) {
  std::vector<PathRecord> out;
  for (const auto& c : set.candidates) {
    for (const auto& r : c.routes) out.emplace_back(c.entity, c.path.key, r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<EntityId, std::string>> entries(const CandidateSet& set) {
  std::vector<std::pair<EntityId, std::string>> out;
  for (const auto& c : set.candidates) out.emplace_back(c.entity, c.path.key);
  return out;
}

QAInstance question(EntityId root, std::vector<EntityId> constraints, std::string type) {
  QAInstance q;
  q.root = root;
  q.topic_entities = {root};
  q.topic_entities.insert(q.topic_entities.end(), constraints.begin(), constraints.end());
  q.constraints = std::move(constraints);
  q.answer_type = std::move(type);
  return q;
}

TEST_CASE("star: one single-step candidate per leaf") {
  KnowledgeBase kb;
  const EntityId c = kb.add_entity("center", "t");
  for (int i = 0; i < 3; ++i) kb.add_triple(c, "r", kb.add_entity("l" + std::to_string(i), "t"));
  const auto set = extract_subgraph(kb, c);
  REQUIRE(set.candidates.size() == 3);
  for (const auto& cand : set.candidates) {
    CHECK(cand.path.steps.size() == 1);
    CHECK(cand.path.key == "+r");
  }
}

TEST_CASE("chain: entities beyond three hops are excluded") {
  KnowledgeBase kb;
  std::vector<EntityId> ids;
  for (const char* n : {"r", "a", "b", "c", "d"}) ids.push_back(kb.add_entity(n, "t"));
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) kb.add_triple(ids[i], "next", ids[i + 1]);
  const auto set = extract_subgraph(kb, ids[0]);
  CHECK(candidate_entities(set) == std::vector<EntityId>{ids[1], ids[2], ids[3]});
  CHECK(records(set) == testing::brute_force_paths(kb, ids[0], 3));
}

TEST_CASE("triangle: an entity reached by one and two steps") {
  KnowledgeBase kb;
  const EntityId r = kb.add_entity("r", "t");
  const EntityId a = kb.add_entity("a", "t");
  const EntityId b = kb.add_entity("b", "t");
  kb.add_triple(r, "p", a);
  kb.add_triple(a, "q", b);
  kb.add_triple(b, "s", r);
  const auto set = extract_subgraph(kb, r);
  std::map<std::string, int> keys_of_a;
  for (const auto& c : set.candidates) {
    if (c.entity == a) keys_of_a[c.path.key] = static_cast<int>(c.path.steps.size());
  }
  CHECK(keys_of_a == std::map<std::string, int>{{"+p", 1}, {"-s/-q", 2}});
  CHECK(records(set) == testing::brute_force_paths(kb, r, 3));
}

TEST_CASE("candidates are sorted and never include the root") {
  const auto kb = testing::random_kb(11, 30, 70);
  const auto set = extract_subgraph(kb, 0);
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    CHECK(set.candidates[i].entity != 0);
    if (i > 0) CHECK(entries(set)[i - 1] < entries(set)[i]);
    const auto& c = set.candidates[i];
    std::vector<EntityId> ctx;
    for (const auto& n : kb.neighbors(c.entity)) ctx.push_back(n.neighbor);
    CHECK(c.context == ctx);
  }
}

TEST_CASE("walkthrough: constraint and answer type leave right leg pain") {
  const auto kb = testing::walkthrough_kb();
  const EntityId p = *kb.find("P961115", "patient");
  const EntityId ibu = *kb.find("ibuprofen", "medication");
  const EntityId pain = *kb.find("right leg pain", "disease");
  const EntityId ctl = *kb.find("pain control", "treatment");

  const auto all = extract_subgraph(kb, p);
  bool saw_extension = false;
  for (const auto& c : all.candidates) {
    saw_extension |= c.entity == ctl && c.path.key == "+prescribed_with/+has_reason/+has_comorbidity";
  }
  CHECK(saw_extension);

  const auto set = generate_candidates(kb, question(p, {ibu}, "disease"));
  REQUIRE(set.candidates.size() == 1);
  CHECK(set.candidates[0].entity == pain);
  CHECK(set.candidates[0].path.key == "+prescribed_with/+has_reason");
  CHECK(set.candidates[0].routes == std::vector<std::vector<EntityId>>{{p, ibu, pain}});
}

TEST_CASE("prune edge cases") {
  const auto kb = testing::random_kb(5, 25, 50, 1);
  const auto all = extract_subgraph(kb, 0);
  const std::vector<EntityId> none;
  CHECK(entries(prune(all, none, "t0")) == entries(all));

  KnowledgeBase kb2 = testing::walkthrough_kb();
  const EntityId island = kb2.add_entity("island", "medication");
  const EntityId p = *kb2.find("P961115", "patient");
  const std::vector<EntityId> unreachable{island};
  CHECK(prune(extract_subgraph(kb2, p), unreachable, "disease").candidates.empty());
  const std::vector<EntityId> root_only{p};
  CHECK(prune(extract_subgraph(kb2, p), root_only, "disease").candidates.size() == 2);
}

TEST_CASE("prune is idempotent and shrinking") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto kb = testing::random_kb(seed, 40, 90);
    const auto all = extract_subgraph(kb, 0);
    const std::vector<EntityId> cons{1};
    const auto once = prune(all, cons, "t1");
    const auto twice = prune(once, cons, "t1");
    CHECK(records(once) == records(twice));
    const auto base = records(all);
    for (const auto& r : records(once)) {
      CHECK(std::binary_search(base.begin(), base.end(), r));
    }
  }
}

TEST_CASE("generate_candidates matches the exhaustive oracle") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto kb = testing::random_kb(seed, 60, 140);
    Rng rng(seed);
    const auto root = static_cast<EntityId>(rng.below(60));
    std::vector<EntityId> cons;
    if (seed % 2) cons.push_back(static_cast<EntityId>(rng.below(60)));
    const std::string type = "t" + std::to_string(rng.below(3));
    const auto set = generate_candidates(kb, question(root, cons, type));
    CHECK(records(set) == testing::brute_force_pruned(kb, root, cons, type));
  }
}

TEST_CASE("isolated root and bad ids") {
  KnowledgeBase kb;
  const EntityId r = kb.add_entity("r", "t");
  CHECK(generate_candidates(kb, question(r, {}, "t")).candidates.empty());
  CHECK_THROWS_AS(extract_subgraph(kb, 5), ValidationError);
  CHECK_THROWS_AS(extract_subgraph(kb, r, 0), ValidationError);
  CHECK_THROWS_AS(generate_candidates(kb, question(9, {}, "t")), ValidationError);
}

TEST_CASE("path keys round trip") {
  const auto steps = parse_path_key("+prescribed_with/-has_reason");
  REQUIRE(steps.size() == 2);
  CHECK(steps[0] == std::make_pair(std::string("prescribed_with"), Direction::kOut));
  CHECK(steps[1] == std::make_pair(std::string("has_reason"), Direction::kIn));
  CHECK_THROWS_AS(parse_path_key("prescribed_with"), ParseError);
}

}  // namespace
}  // namespace aarqa
