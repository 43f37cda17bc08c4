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

#include "aarqa/qa_templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "aarqa/candidates.hpp"
#include "aarqa/error.hpp"
#include "aarqa/rng.hpp"
#include "json.hpp"

namespace aarqa {

using nlohmann::json;

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '-' || c >= 0x80;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(lower(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      current.push_back(ch);
    } else {
      flush();
      tokens.emplace_back(1, ch);
    }
  }
  flush();
  return tokens;
}

Template parse_template(std::string_view src) {
  Template t;
  t.text = std::string(src);
  std::size_t i = 0;
  while (i < src.size()) {
    if (src[i] != '|') {
      ++i;
      continue;
    }
    const std::size_t close = src.find('|', i + 1);
    if (close == std::string_view::npos) {
      throw ParseError("template: unbalanced '|' at column " +
                       std::to_string(i + 1));
    }
    std::string_view name = src.substr(i + 1, close - i - 1);
    if (name.empty() ||
        std::any_of(name.begin(), name.end(),
                    [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      throw ParseError("template: invalid placeholder name at column " +
                       std::to_string(i + 1));
    }
    t.placeholders.push_back(Placeholder{std::string(name), i + 1});
    i = close + 1;
  }
  if (t.placeholders.empty()) {
    throw ParseError("template has no placeholders: '" + t.text + "'");
  }
  return t;
}

std::vector<Template> parse_templates_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("template file: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("template file must be a JSON array");
  std::vector<Template> out;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const json& obj = doc[k];
    const std::string where = "template " + std::to_string(k) + ": ";
    try {
      Template t = parse_template(obj.at("text").get<std::string>());
      if (obj.contains("root")) {
        const auto root = obj.at("root").get<std::string>();
        auto it = std::find_if(t.placeholders.begin(), t.placeholders.end(),
                               [&](const Placeholder& p) { return p.name == root; });
        if (it == t.placeholders.end()) {
          throw ParseError("root placeholder '" + root + "' not in text");
        }
        t.root_placeholder = static_cast<std::size_t>(it - t.placeholders.begin());
      }
      t.answer_type = obj.at("answer_type").get<std::string>();
      t.answer_paths = obj.at("answer_paths").get<std::vector<std::string>>();
      if (t.answer_paths.empty()) throw ParseError("answer_paths is empty");
      for (const auto& p : t.answer_paths) parse_path_key(p);
      if (obj.contains("cap")) {
        const auto cap = obj.at("cap").get<long long>();
        if (cap < 1) throw ParseError("cap must be >= 1");
        t.cap = static_cast<std::size_t>(cap);
      }
      out.push_back(std::move(t));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  return out;
}

std::vector<Template> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open template file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_templates_json(buf.str());
}

std::string templates_to_json(const std::vector<Template>& templates) {
  json doc = json::array();
  for (const auto& t : templates) {
    doc.push_back({{"text", t.text},
                   {"root", t.placeholders.at(t.root_placeholder).name},
                   {"answer_type", t.answer_type},
                   {"answer_paths", t.answer_paths},
                   {"cap", t.cap}});
  }
  return doc.dump(2) + "\n";
}

std::optional<std::string> resolve_placeholder_type(const KnowledgeBase& kb,
                                                    std::string_view name) {
  const std::string want = lower(name);
  for (const auto& type : kb.types()) {
    if (lower(type) == want) return type;
  }
  return std::nullopt;
}

void validate_template(const Template& t, const KnowledgeBase& kb) {
  const auto types = kb.types();
  if (std::find(types.begin(), types.end(), t.answer_type) == types.end()) {
    throw ValidationError("template '" + t.text + "': unknown answer type '" +
                          t.answer_type + "'");
  }
  for (const auto& p : t.placeholders) {
    if (!resolve_placeholder_type(kb, p.name)) {
      throw ValidationError("template '" + t.text + "': placeholder |" +
                            p.name + "| names no entity type");
    }
  }
  for (const auto& key : t.answer_paths) {
    const auto steps = parse_path_key(key);
    if (steps.empty() || steps.size() > 3) {
      throw ValidationError("template '" + t.text + "': answer path '" + key +
                            "' must have 1 to 3 steps");
    }
  }
}

namespace {

using Route = std::vector<EntityId>;

struct PatternStep {
  RelationId predicate;
  Direction direction;
};

// Follows the pattern steps exactly, visiting each entity at most once.
void match_pattern(const KnowledgeBase& kb, const std::vector<PatternStep>& pattern,
                   Route& route, std::vector<Route>& out) {
  const std::size_t depth = route.size() - 1;
  if (depth == pattern.size()) {
    out.push_back(route);
    return;
  }
  const PatternStep& step = pattern[depth];
  const EntityId at = route.back();
  const auto edges = step.direction == Direction::kOut ? kb.out_edges(at)
                                                       : kb.in_edges(at);
  for (const Incidence& inc : edges) {
    if (inc.predicate != step.predicate) continue;
    if (std::find(route.begin(), route.end(), inc.neighbor) != route.end()) {
      continue;
    }
    route.push_back(inc.neighbor);
    match_pattern(kb, pattern, route, out);
    route.pop_back();
  }
}

std::vector<std::vector<PatternStep>> resolve_patterns(
    const KnowledgeBase& kb, const std::vector<std::string>& keys) {
  std::vector<std::vector<PatternStep>> patterns;
  for (const auto& key : keys) {
    std::vector<PatternStep> pattern;
    bool ok = true;
    for (const auto& [name, dir] : parse_path_key(key)) {
      auto rel = kb.find_relation(name);
      if (!rel) {
        ok = false;
        break;
      }
      pattern.push_back(PatternStep{*rel, dir});
    }
    if (ok) patterns.push_back(std::move(pattern));
  }
  return patterns;
}

// All pattern routes from root whose endpoint has the answer type.
std::vector<Route> answer_routes(const KnowledgeBase& kb, EntityId root,
                                 const std::vector<std::vector<PatternStep>>& patterns,
                                 std::string_view answer_type) {
  std::vector<Route> routes;
  for (const auto& pattern : patterns) {
    Route route{root};
    std::vector<Route> found;
    match_pattern(kb, pattern, route, found);
    for (auto& r : found) {
      if (kb.entity(r.back()).etype == answer_type) routes.push_back(std::move(r));
    }
  }
  return routes;
}

bool route_contains(const Route& route, EntityId root,
                    const std::vector<EntityId>& constraints) {
  for (EntityId c : constraints) {
    if (c == root) continue;
    if (std::find(route.begin() + 1, route.end() - 1, c) == route.end() - 1) {
      return false;
    }
  }
  return true;
}

std::vector<EntityId> gold_from_routes(const std::vector<Route>& routes,
                                       EntityId root,
                                       const std::vector<EntityId>& constraints) {
  std::set<EntityId> gold;
  for (const auto& r : routes) {
    if (route_contains(r, root, constraints)) gold.insert(r.back());
  }
  return {gold.begin(), gold.end()};
}

// Assignments of distinct interior entities to the constraint placeholders.
void assign_constraints(const KnowledgeBase& kb, const Route& route,
                        const std::vector<std::string>& types, std::size_t k,
                        std::vector<EntityId>& current,
                        std::set<std::vector<EntityId>>& out) {
  if (k == types.size()) {
    out.insert(current);
    return;
  }
  for (std::size_t i = 1; i + 1 < route.size(); ++i) {
    const EntityId e = route[i];
    if (kb.entity(e).etype != types[k]) continue;
    if (std::find(current.begin(), current.end(), e) != current.end()) continue;
    current.push_back(e);
    assign_constraints(kb, route, types, k + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<EntityId> gold_answers(const KnowledgeBase& kb, EntityId root,
                                   const std::vector<EntityId>& constraints,
                                   const std::vector<std::string>& answer_paths,
                                   std::string_view answer_type) {
  const auto patterns = resolve_patterns(kb, answer_paths);
  return gold_from_routes(answer_routes(kb, root, patterns, answer_type), root,
                          constraints);
}

std::vector<QAInstance> populate(const Template& t, const KnowledgeBase& kb,
                                 std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw ValidationError("populate: cap must be >= 1");
  const auto root_type =
      resolve_placeholder_type(kb, t.placeholders.at(t.root_placeholder).name);
  if (!root_type) return {};
  std::vector<std::string> constraint_types;
  for (std::size_t i = 0; i < t.placeholders.size(); ++i) {
    if (i == t.root_placeholder) continue;
    auto type = resolve_placeholder_type(kb, t.placeholders[i].name);
    if (!type) return {};
    constraint_types.push_back(*type);
  }
  const auto patterns = resolve_patterns(kb, t.answer_paths);
  if (patterns.empty()) return {};

  struct Combo {
    EntityId root;
    std::vector<EntityId> constraints;
  };
  std::vector<Combo> combos;
  std::vector<std::vector<Route>> routes_by_root;  // parallel to roots seen
  std::vector<std::size_t> combo_root_slot;
  for (EntityId root : kb.entities_of_type(*root_type)) {
    auto routes = answer_routes(kb, root, patterns, t.answer_type);
    if (routes.empty()) continue;
    std::set<std::vector<EntityId>> assignments;
    for (const auto& r : routes) {
      std::vector<EntityId> current;
      assign_constraints(kb, r, constraint_types, 0, current, assignments);
    }
    if (assignments.empty()) continue;
    const std::size_t slot = routes_by_root.size();
    routes_by_root.push_back(std::move(routes));
    for (const auto& a : assignments) {
      combos.push_back(Combo{root, a});
      combo_root_slot.push_back(slot);
    }
  }

  std::vector<std::size_t> order(combos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<QAInstance> out;
  for (std::size_t idx : order) {
    if (out.size() >= cap) break;
    const Combo& combo = combos[idx];
    auto gold = gold_from_routes(routes_by_root[combo_root_slot[idx]],
                                 combo.root, combo.constraints);
    if (gold.empty()) continue;

    QAInstance q;
    q.root = combo.root;
    q.constraints = combo.constraints;
    std::string text;
    std::size_t next_constraint = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < t.placeholders.size(); ++i) {
      const auto& ph = t.placeholders[i];
      const std::size_t open = ph.column - 1;
      text.append(t.text, pos, open - pos);
      const EntityId e =
          i == t.root_placeholder ? combo.root : combo.constraints[next_constraint++];
      q.topic_entities.push_back(e);
      text += kb.entity(e).name;
      pos = open + ph.name.size() + 2;
    }
    text.append(t.text, pos, std::string::npos);
    q.question = std::move(text);
    q.tokens = tokenize(q.question);
    q.answer_type = t.answer_type;
    q.gold = std::move(gold);
    q.answer_paths = t.answer_paths;
    out.push_back(std::move(q));
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

namespace {

json entity_ref(const KnowledgeBase& kb, EntityId id) {
  const Entity& e = kb.entity(id);
  return {{"name", e.name}, {"type", e.etype}};
}

json entity_refs(const KnowledgeBase& kb, const std::vector<EntityId>& ids) {
  json arr = json::array();
  for (EntityId id : ids) arr.push_back(entity_ref(kb, id));
  return arr;
}

}  // namespace

void write_dataset(std::ostream& os, const KnowledgeBase& kb,
                   const std::vector<QAInstance>& data) {
  for (const auto& q : data) {
    json obj;
    obj["id"] = q.id;
    obj["question"] = q.question;
    obj["tokens"] = q.tokens;
    obj["topic_entities"] = entity_refs(kb, q.topic_entities);
    obj["root"] = entity_ref(kb, q.root);
    obj["constraints"] = entity_refs(kb, q.constraints);
    obj["answer_type"] = q.answer_type;
    obj["gold"] = entity_refs(kb, q.gold);
    obj["split"] = to_string(q.split);
    obj["answer_paths"] = q.answer_paths;
    obj["template"] = q.template_index;
    os << obj.dump() << '\n';
  }
}

std::vector<QAInstance> read_dataset(std::istream& in, const KnowledgeBase& kb,
                                     const std::string& source) {
  std::vector<QAInstance> data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    try {
      const json obj = json::parse(line);
      auto resolve = [&](const json& ref) {
        const auto name = ref.at("name").get<std::string>();
        const auto type = ref.at("type").get<std::string>();
        auto id = kb.find(name, type);
        if (!id) {
          throw ValidationError(where + "unresolved entity '" + name +
                                "' of type '" + type + "'");
        }
        return *id;
      };
      auto resolve_all = [&](const json& arr) {
        std::vector<EntityId> ids;
        for (const auto& ref : arr) ids.push_back(resolve(ref));
        return ids;
      };
      QAInstance q;
      q.id = obj.at("id").get<std::size_t>();
      q.question = obj.value("question", std::string());
      if (obj.contains("tokens")) {
        q.tokens = obj.at("tokens").get<std::vector<std::string>>();
      } else {
        q.tokens = tokenize(q.question);
      }
      q.topic_entities = resolve_all(obj.at("topic_entities"));
      if (q.topic_entities.empty()) {
        throw ValidationError(where + "question has no topic entities");
      }
      q.root = obj.contains("root") ? resolve(obj.at("root")) : q.topic_entities[0];
      if (obj.contains("constraints")) {
        q.constraints = resolve_all(obj.at("constraints"));
      } else {
        for (EntityId e : q.topic_entities) {
          if (e != q.root) q.constraints.push_back(e);
        }
      }
      q.answer_type = obj.at("answer_type").get<std::string>();
      q.gold = resolve_all(obj.at("gold"));
      std::sort(q.gold.begin(), q.gold.end());
      q.gold.erase(std::unique(q.gold.begin(), q.gold.end()), q.gold.end());
      if (q.gold.empty()) throw ValidationError(where + "empty gold answer set");
      q.split = parse_split(obj.value("split", std::string("train")));
      q.answer_paths =
          obj.value("answer_paths", std::vector<std::string>());
      q.template_index = obj.value("template", -1);
      data.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  return data;
}

void save_dataset(const std::filesystem::path& path, const KnowledgeBase& kb,
                  const std::vector<QAInstance>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  write_dataset(out, kb, data);
}

std::vector<QAInstance> load_dataset(const std::filesystem::path& path,
                                     const KnowledgeBase& kb) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  return read_dataset(in, kb, path.string());
}

std::vector<const QAInstance*> select_split(const std::vector<QAInstance>& data,
                                            Split split) {
  std::vector<const QAInstance*> out;
  for (const auto& q : data) {
    if (q.split == split) out.push_back(&q);
  }
  return out;
}

}  // namespace aarqa
