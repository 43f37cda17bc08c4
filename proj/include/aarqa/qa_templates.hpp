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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aarqa/kb_store.hpp"

namespace aarqa {

enum class Split : std::uint8_t { kTrain = 0, kDev = 1, kTest = 2 };

const char* to_string(Split s);
Split parse_split(std::string_view s);

// Lowercases and splits on whitespace; punctuation other than '_' and '-'
// becomes a token of its own.
std::vector<std::string> tokenize(std::string_view text);

struct Placeholder {
  std::string name;         // text between the bars, e.g. "Patient"
  std::size_t column = 0;   // 1-based column of the opening bar
};

// A question template such as "what does patient |Patient| take
// |Medication| for ?". Non-root placeholders become path constraints.
struct Template {
  std::string text;
  std::vector<Placeholder> placeholders;
  std::size_t root_placeholder = 0;
  std::string answer_type;
  // Relation-path keys (see format_path_key) whose endpoints are the gold
  // answers, e.g. "+prescribed_with/+has_reason".
  std::vector<std::string> answer_paths;
  std::size_t cap = 30;
};

// Extracts placeholders; the root defaults to the first one. Throws
// ParseError (with column) on an unbalanced bar, an empty placeholder, or a
// template without placeholders.
Template parse_template(std::string_view src);

// Template file: JSON array of {text, root, answer_type, answer_paths, cap}.
std::vector<Template> parse_templates_json(std::string_view json_text);
std::vector<Template> load_templates(const std::filesystem::path& path);
std::string templates_to_json(const std::vector<Template>& templates);

// Resolves a placeholder name to a KB entity type (case-insensitive).
std::optional<std::string> resolve_placeholder_type(const KnowledgeBase& kb,
                                                    std::string_view name);

// Throws ValidationError unless every placeholder and the answer type name a
// KB type and every answer path is well formed.
void validate_template(const Template& t, const KnowledgeBase& kb);

struct QAInstance {
  std::size_t id = 0;
  std::string question;
  std::vector<std::string> tokens;
  std::vector<EntityId> topic_entities;  // placeholder order
  EntityId root = 0;
  std::vector<EntityId> constraints;     // topic entities other than root
  std::string answer_type;
  std::vector<EntityId> gold;            // sorted, unique, non-empty
  Split split = Split::kTrain;
  // Path keys that produced the gold set; empty for externally built data.
  std::vector<std::string> answer_paths;
  int template_index = -1;
};

// Populates a template against the KB: at most `cap` instances, each with a
// non-empty gold set, chosen by a seeded shuffle of all answerable
// placeholder combinations.
std::vector<QAInstance> populate(const Template& t, const KnowledgeBase& kb,
                                 std::size_t cap, std::uint64_t seed);

// Gold answers of (root, constraints) under the template's answer paths.
std::vector<EntityId> gold_answers(const KnowledgeBase& kb, EntityId root,
                                   const std::vector<EntityId>& constraints,
                                   const std::vector<std::string>& answer_paths,
                                   std::string_view answer_type);

// QA dataset file: JSON lines, entities referenced by {name, type}.
void write_dataset(std::ostream& os, const KnowledgeBase& kb,
                   const std::vector<QAInstance>& data);
std::vector<QAInstance> read_dataset(std::istream& in, const KnowledgeBase& kb,
                                     const std::string& source = "<input>");
void save_dataset(const std::filesystem::path& path, const KnowledgeBase& kb,
                  const std::vector<QAInstance>& data);
std::vector<QAInstance> load_dataset(const std::filesystem::path& path,
                                     const KnowledgeBase& kb);

std::vector<const QAInstance*> select_split(const std::vector<QAInstance>& data,
                                            Split split);

}  // namespace aarqa
