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


#include <fstream>
#include <set>
#include <sstream>

#include "aarqa/candidates.hpp"
#include "aarqa/error.hpp"
#include "aarqa/synth.hpp"
#include "doctest.h"

#ifndef AARQA_DATA_DIR
#error "AARQA_DATA_DIR must point at the data/ directory"
#endif

namespace aarqa {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string kb_text(const KnowledgeBase& kb) {
  const auto path = std::filesystem::temp_directory_path() / "aarqa_synth_kb.tsv";
  save_kb(kb, path);
  std::string text = read_file(path);
  std::filesystem::remove(path);
  return text;
}

std::size_t types_in(const KnowledgeBase& kb) { return kb.types().size(); }

TEST_CASE("desk profile realizes its counts") {
  const KnowledgeBase kb = generate_kb(desk_profile(), 7);
  CHECK(kb.entity_count() == 1000);
  CHECK(kb.triples().size() == 3000);
  CHECK(types_in(kb) == 10);
  CHECK(kb.relation_count() == 8);
  std::size_t patients = 0;
  for (const auto& e : kb.entities()) patients += e.etype == "patient";
  CHECK(patients == 50);
  CHECK(kb_text(kb) == kb_text(generate_kb(desk_profile(), 7)));
  CHECK(kb_text(kb) != kb_text(generate_kb(desk_profile(), 8)));
}

TEST_CASE("relation signatures are respected") {
  KBProfile p;
  p.name = "pair";
  p.entities = 20;
  p.triples = 30;
  p.patients = 5;
  p.types = {"patient", "drug"};
  p.relations = {{"takes", {"patient"}, {"drug"}, 1.0}};
  const KnowledgeBase kb = generate_kb(p, 3);
  CHECK(kb.triples().size() == 30);
  for (const auto& t : kb.triples()) {
    CHECK(kb.entity(t.subject).etype == "patient");
    CHECK(kb.entity(t.object).etype == "drug");
  }
  // 5 patients x 15 drugs cannot hold 80 distinct triples.
  p.triples = 80;
  CHECK_THROWS_AS(generate_kb(p, 3), ValidationError);
  p.triples = 30;
  p.relations[0].object_types = {"vehicle"};
  CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("medications profile at one tenth scale") {
  const KBProfile p = resolve_profile("medications@0.1");
  const KnowledgeBase kb = generate_kb(p, 11);
  CHECK(types_in(kb) == 46);
  CHECK(kb.relation_count() == 14);
  CHECK(std::abs(static_cast<double>(kb.entity_count()) - 2882.1) <= 0.05 * 2882.1);
  CHECK(std::abs(static_cast<double>(kb.triples().size()) - 5351.9) <= 0.05 * 5351.9);
  const KBProfile full = medications_profile();
  CHECK(full.entities == 28821);
  CHECK(full.triples == 53519);
  CHECK(full.types.size() == 46);
  CHECK(full.relations.size() == 14);
  CHECK_THROWS_AS(resolve_profile("medications@-1"), ValidationError);
}

TEST_CASE("profile JSON round trip and shipped copies") {
  const KBProfile d = desk_profile();
  CHECK(to_json(profile_from_json(to_json(d))) == to_json(d));
  const std::filesystem::path data = AARQA_DATA_DIR;
  CHECK(to_json(load_profile(data / "profiles" / "desk.json")) == to_json(d));
  CHECK(to_json(load_profile(data / "profiles" / "medications.json")) ==
        to_json(medications_profile()));
  CHECK(to_json(load_profile(data / "profiles" / "medications_tenth.json")) ==
        to_json(medications_profile(0.1)));
  CHECK(nlohmann::json::parse(templates_to_json(load_templates(data / "templates" / "desk.json"))) ==
        nlohmann::json::parse(templates_to_json(desk_templates())));
}

TEST_CASE("split proportions") {
  std::vector<QAInstance> data(8952);
  assign_splits(data, {}, 1);
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(data[i].id == i);
    ++counts[static_cast<int>(data[i].split)];
  }
  CHECK(counts[0] == 5952);
  CHECK(counts[1] == 1000);
  CHECK(counts[2] == 2000);
  CHECK_THROWS_AS(assign_splits(data, {0, 0, 0}, 1), ValidationError);
}

TEST_CASE("desk dataset is answerable and capped") {
  const KnowledgeBase kb = generate_kb(desk_profile(), 7);
  const auto templates = desk_templates();
  const auto data = generate_dataset(kb, templates, 3);
  REQUIRE(!data.empty());
  std::set<int> used;
  for (const auto& q : data) {
    used.insert(q.template_index);
    REQUIRE(!q.gold.empty());
    const auto cands = candidate_entities(generate_candidates(kb, q));
    for (EntityId g : q.gold) CHECK(std::binary_search(cands.begin(), cands.end(), g));
  }
  CHECK(used.size() > templates.size() / 2);
  for (int t : used) {
    const auto n = std::count_if(data.begin(), data.end(),
                                 [&](const QAInstance& q) { return q.template_index == t; });
    CHECK(static_cast<std::size_t>(n) <= templates[t].cap);
  }

  auto one = templates;
  for (auto& t : one) t.cap = 1;
  CHECK(generate_dataset(kb, one, 3).size() <= templates.size());

  std::ostringstream a, b;
  write_dataset(a, kb, data);
  write_dataset(b, kb, generate_dataset(kb, templates, 3));
  CHECK(a.str() == b.str());
}

}  // namespace
}  // namespace aarqa
