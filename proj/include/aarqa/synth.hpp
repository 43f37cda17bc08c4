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

// Synthetic clinical knowledge bases and template-generated QA datasets.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aarqa/kb_store.hpp"
#include "aarqa/qa_templates.hpp"
#include "json.hpp"

namespace aarqa {

struct RelationSignature {
  std::string relation;
  std::vector<std::string> subject_types;
  std::vector<std::string> object_types;
  double weight = 1.0;  // share of the triple budget
};

struct KBProfile {
  std::string name;
  std::size_t entities = 0;
  std::size_t triples = 0;
  std::size_t patients = 0;
  std::string patient_type = "patient";
  std::vector<std::string> types;  // includes patient_type
  // Relative entity counts of the non-patient types (default 1 each).
  std::map<std::string, double> type_weights;
  std::vector<RelationSignature> relations;
  // Endpoints are drawn with probability proportional to 1 / rank^exponent,
  // so a few hub entities collect most edges.
  double fanout_exponent = 1.0;
};

// Throws ValidationError on inconsistent counts or unknown type names.
void validate(const KBProfile& profile);

nlohmann::json to_json(const KBProfile& profile);
KBProfile profile_from_json(const nlohmann::json& obj);
KBProfile load_profile(const std::filesystem::path& path);

// 1,000 entities, 10 types, 3,000 triples, 8 relations.
KBProfile desk_profile();
// Medication-record scale: 28,821 entities, 46 types, 53,519 triples, 14
// relations, 261 patients. Entity, triple and patient counts are multiplied
// by `scale`; type and relation counts are kept.
KBProfile medications_profile(double scale = 1.0);

// "desk", "medications", "medications@0.1", or a path to a profile JSON.
KBProfile resolve_profile(const std::string& spec);

// Exactly profile.entities entities and profile.triples distinct triples,
// every type and relation used. Throws ValidationError when the profile
// cannot be realized.
KnowledgeBase generate_kb(const KBProfile& profile, std::uint64_t seed);

std::vector<Template> desk_templates();
std::vector<Template> medications_templates();

struct SplitProportions {
  double train = 5952;
  double dev = 1000;
  double test = 2000;
};

// Assigns ids in order and splits by a seeded shuffle: round(n * train /
// total) train questions, round(n * dev / total) dev, the rest test.
void assign_splits(std::vector<QAInstance>& data, const SplitProportions& proportions,
                   std::uint64_t seed);

// Populates every template (each from its own derived seed) and splits the
// result. Throws ValidationError when no template yields an instance.
std::vector<QAInstance> generate_dataset(const KnowledgeBase& kb,
                                         const std::vector<Template>& templates,
                                         std::uint64_t seed,
                                         const SplitProportions& proportions = {});

}  // namespace aarqa
