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


#include <sstream>

#include "aarqa/candidates.hpp"
#include "aarqa/error.hpp"
#include "aarqa/qa_templates.hpp"
#include "doctest.h"
#include "oracles.hpp"

namespace aarqa {
namespace {

Template q3_template() {
  Template t = parse_template("what does patient |Patient| take |Medication| for ?");
  t.answer_type = "disease";
  t.answer_paths = {"+prescribed_with/+has_reason"};
  return t;
}

TEST_CASE("placeholders of the two-entity template") {
  const Template t = parse_template("what does patient |Patient| take |Medication| for ?");
  REQUIRE(t.placeholders.size() == 2);
  CHECK(t.placeholders[0].name == "Patient");
  CHECK(t.placeholders[0].column == 19);
  CHECK(t.placeholders[1].name == "Medication");
  CHECK(t.root_placeholder == 0);
}

TEST_CASE("single placeholder template") {
  const Template t =
      parse_template("give me all patients who have been prescribed with |Medication| .");
  CHECK(t.placeholders.size() == 1);
}

TEST_CASE("template syntax errors") {
  CHECK_THROWS_AS(parse_template("what is the weather ?"), ParseError);
  try {
    parse_template("what does |Patient take ?");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("column 11") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_template("empty || here"), ParseError);
}

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("What does patient P961115 take ibuprofen for?") ==
        std::vector<std::string>{"what", "does", "patient", "p961115", "take", "ibuprofen",
                                 "for", "?"});
  CHECK(tokenize("dose, (daily).") ==
        std::vector<std::string>{"dose", ",", "(", "daily", ")", "."});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("walkthrough population yields the has_reason answers") {
  const auto kb = testing::walkthrough_kb();
  const auto inst = populate(q3_template(), kb, 30, 1);
  REQUIRE(inst.size() == 2);
  const EntityId ibu = *kb.find("ibuprofen", "medication");
  const EntityId pain = *kb.find("right leg pain", "disease");
  bool found = false;
  for (const auto& q : inst) {
    CHECK(q.root == *kb.find("P961115", "patient"));
    if (q.constraints == std::vector<EntityId>{ibu}) {
      found = true;
      CHECK(q.gold == std::vector<EntityId>{pain});
      CHECK(q.question == "what does patient P961115 take ibuprofen for ?");
    }
  }
  CHECK(found);
}

TEST_CASE("cap and unanswerable templates") {
  KnowledgeBase kb;
  for (int i = 0; i < 20; ++i) {
    const EntityId p = kb.add_entity("p" + std::to_string(i), "patient");
    kb.add_triple(p, "prescribed_with", kb.add_entity("m" + std::to_string(i), "medication"));
  }
  kb.add_entity("d", "disease");
  Template t = parse_template("what is patient |Patient| prescribed with ?");
  t.answer_type = "medication";
  t.answer_paths = {"+prescribed_with"};
  CHECK(populate(t, kb, 5, 3).size() == 5);
  CHECK(populate(t, kb, 100, 3).size() == 20);

  Template none = t;
  none.answer_type = "disease";
  CHECK(populate(none, kb, 5, 3).empty());
  CHECK_THROWS_AS(populate(t, kb, 0, 3), ValidationError);
}

TEST_CASE("population is deterministic and gold matches the path oracle") {
  const auto kb = testing::random_kb(21, 80, 240, 3, 2);
  Template t = parse_template("which |T0| does |T1| reach ?");
  t.root_placeholder = 1;
  t.answer_type = "t2";
  t.answer_paths = {"+r0/-r1", "+r1/+r0/+r1"};
  const auto a = populate(t, kb, 25, 9);
  const auto b = populate(t, kb, 25, 9);
  REQUIRE(!a.empty());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].question == b[i].question);
    CHECK(a[i].gold == b[i].gold);
    std::set<EntityId> expect;
    for (const auto& [e, key, seq] :
         testing::brute_force_pruned(kb, a[i].root, a[i].constraints, "t2")) {
      if (key == "+r0/-r1" || key == "+r1/+r0/+r1") expect.insert(e);
    }
    CHECK(a[i].gold == std::vector<EntityId>(expect.begin(), expect.end()));
    CHECK(!a[i].gold.empty());
    // Every gold answer is a generated candidate.
    const auto cands = candidate_entities(generate_candidates(kb, a[i]));
    for (EntityId g : a[i].gold) CHECK(std::binary_search(cands.begin(), cands.end(), g));
  }
}

TEST_CASE("templates JSON round trip and validation") {
  const auto ts = parse_templates_json(R"([
    {"text": "dose of |Medication| for |Patient| ?", "root": "Patient",
     "answer_type": "dosage", "answer_paths": ["+prescribed_with/+has_dosage"], "cap": 7}])");
  REQUIRE(ts.size() == 1);
  CHECK(ts[0].root_placeholder == 1);
  CHECK(ts[0].cap == 7);
  const auto again = parse_templates_json(templates_to_json(ts));
  CHECK(again[0].text == ts[0].text);
  CHECK(again[0].root_placeholder == 1);
  CHECK(again[0].answer_paths == ts[0].answer_paths);

  CHECK_THROWS_AS(parse_templates_json(R"([{"text": "|A| ?", "root": "B",
      "answer_type": "x", "answer_paths": ["+r"]}])"), ParseError);
  const auto kb = testing::walkthrough_kb();
  Template bad = q3_template();
  bad.answer_type = "vehicle";
  CHECK_THROWS_AS(validate_template(bad, kb), ValidationError);
  CHECK_NOTHROW(validate_template(q3_template(), kb));
  CHECK(resolve_placeholder_type(kb, "MEDICATION") == std::optional<std::string>("medication"));
}

TEST_CASE("dataset JSON lines round trip") {
  const auto kb = testing::walkthrough_kb();
  auto data = populate(q3_template(), kb, 30, 1);
  data[1].split = Split::kTest;
  std::ostringstream os;
  write_dataset(os, kb, data);
  std::istringstream in(os.str());
  const auto back = read_dataset(in, kb);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].question == data[i].question);
    CHECK(back[i].tokens == data[i].tokens);
    CHECK(back[i].root == data[i].root);
    CHECK(back[i].constraints == data[i].constraints);
    CHECK(back[i].gold == data[i].gold);
    CHECK(back[i].split == data[i].split);
    CHECK(back[i].answer_paths == data[i].answer_paths);
  }
  CHECK(select_split(back, Split::kTest).size() == 1);

  KnowledgeBase other;
  other.add_entity("P961115", "patient");
  std::istringstream in2(os.str());
  try {
    read_dataset(in2, other);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("unresolved entity") != std::string::npos);
    CHECK(msg.find(":1:") != std::string::npos);
    CHECK((msg.find("ibuprofen") != std::string::npos || msg.find("albuterol") != std::string::npos));
  }
}

}  // namespace
}  // namespace aarqa
