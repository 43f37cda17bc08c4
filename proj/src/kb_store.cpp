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

#include "aarqa/kb_store.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "aarqa/error.hpp"

namespace aarqa {

namespace {

std::string entity_key(std::string_view name, std::string_view etype) {
  std::string key;
  key.reserve(name.size() + etype.size() + 1);
  key.append(name).push_back('\t');
  key.append(etype);
  return key;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

const char* to_string(Direction d) {
  return d == Direction::kOut ? "out" : "in";
}

EntityId KnowledgeBase::add_entity(std::string_view name,
                                   std::string_view etype) {
  if (name.empty() || etype.empty()) {
    throw ValidationError("entity name and type must be non-empty");
  }
  std::string key = entity_key(name, etype);
  auto it = entity_ids_.find(key);
  if (it != entity_ids_.end()) return it->second;
  const auto id = static_cast<EntityId>(entities_.size());
  entities_.push_back(Entity{id, std::string(name), std::string(etype)});
  entity_ids_.emplace(std::move(key), id);
  out_index_.emplace_back();
  in_index_.emplace_back();
  incident_.emplace_back();
  return id;
}

void KnowledgeBase::check_id(EntityId id, const char* what) const {
  if (id >= entities_.size()) {
    std::ostringstream msg;
    msg << what << ": unknown entity id " << id << " (KB has "
        << entities_.size() << " entities)";
    throw ValidationError(msg.str());
  }
}

bool KnowledgeBase::incidence_less(const Incidence& a,
                                   const Incidence& b) const {
  if (a.predicate != b.predicate) {
    return relation_names_[a.predicate] < relation_names_[b.predicate];
  }
  if (a.neighbor != b.neighbor) return a.neighbor < b.neighbor;
  return a.direction < b.direction;
}

void KnowledgeBase::insert_sorted(std::vector<Incidence>& list,
                                  const Incidence& inc) {
  auto pos = std::upper_bound(
      list.begin(), list.end(), inc,
      [this](const Incidence& x, const Incidence& y) {
        return incidence_less(x, y);
      });
  list.insert(pos, inc);
}

void KnowledgeBase::add_triple(EntityId subject, std::string_view predicate,
                               EntityId object) {
  check_id(subject, "add_triple subject");
  check_id(object, "add_triple object");
  if (predicate.empty()) throw ValidationError("predicate must be non-empty");
  if (subject == object) {
    throw ValidationError("self-loop triple on entity '" +
                          entities_[subject].name + "'");
  }
  RelationId rel;
  auto it = relation_ids_.find(std::string(predicate));
  if (it == relation_ids_.end()) {
    rel = static_cast<RelationId>(relation_names_.size());
    relation_names_.emplace_back(predicate);
    relation_ids_.emplace(std::string(predicate), rel);
  } else {
    rel = it->second;
  }
  const Incidence out{rel, object, Direction::kOut};
  auto& outs = out_index_[subject];
  if (std::find(outs.begin(), outs.end(), out) != outs.end()) {
    throw ValidationError("duplicate triple (" + entities_[subject].name +
                          ", " + std::string(predicate) + ", " +
                          entities_[object].name + ")");
  }
  triples_.push_back(Triple{subject, rel, object});
  insert_sorted(outs, out);
  const Incidence in{rel, subject, Direction::kIn};
  insert_sorted(in_index_[object], in);
  insert_sorted(incident_[subject], out);
  insert_sorted(incident_[object], in);
}

std::optional<EntityId> KnowledgeBase::find(std::string_view name,
                                            std::string_view etype) const {
  auto it = entity_ids_.find(entity_key(name, etype));
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeBase::find_relation(
    std::string_view predicate) const {
  auto it = relation_ids_.find(std::string(predicate));
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

const Entity& KnowledgeBase::entity(EntityId id) const {
  check_id(id, "entity");
  return entities_[id];
}

const std::string& KnowledgeBase::relation_name(RelationId id) const {
  if (id >= relation_names_.size()) {
    throw ValidationError("unknown relation id " + std::to_string(id));
  }
  return relation_names_[id];
}

std::span<const Incidence> KnowledgeBase::out_edges(EntityId id) const {
  check_id(id, "out_edges");
  return out_index_[id];
}

std::span<const Incidence> KnowledgeBase::in_edges(EntityId id) const {
  check_id(id, "in_edges");
  return in_index_[id];
}

std::span<const Incidence> KnowledgeBase::neighbors(EntityId id) const {
  check_id(id, "neighbors");
  return incident_[id];
}

std::vector<std::string> KnowledgeBase::types() const {
  std::set<std::string> seen;
  for (const auto& e : entities_) seen.insert(e.etype);
  return {seen.begin(), seen.end()};
}

std::vector<std::string> KnowledgeBase::relations() const {
  std::vector<std::string> names = relation_names_;
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<EntityId> KnowledgeBase::entities_of_type(
    std::string_view etype) const {
  std::vector<EntityId> ids;
  for (const auto& e : entities_) {
    if (e.etype == etype) ids.push_back(e.id);
  }
  return ids;
}

KBStats KnowledgeBase::stats() const {
  KBStats s;
  s.entities = entities_.size();
  s.types = types().size();
  s.triples = triples_.size();
  s.relations = relation_names_.size();
  return s;
}

void KnowledgeBase::write(std::ostream& os) const {
  std::vector<const Entity*> ents;
  ents.reserve(entities_.size());
  for (const auto& e : entities_) ents.push_back(&e);
  std::sort(ents.begin(), ents.end(), [](const Entity* a, const Entity* b) {
    return std::tie(a->name, a->etype) < std::tie(b->name, b->etype);
  });
  for (const Entity* e : ents) os << e->name << '\t' << e->etype << '\n';

  std::vector<const Triple*> order;
  order.reserve(triples_.size());
  for (const auto& t : triples_) order.push_back(&t);
  auto key = [this](const Triple* t) {
    const Entity& s = entities_[t->subject];
    const Entity& o = entities_[t->object];
    return std::tie(s.name, s.etype, relation_names_[t->predicate], o.name,
                    o.etype);
  };
  std::sort(order.begin(), order.end(),
            [&](const Triple* a, const Triple* b) { return key(a) < key(b); });
  for (const Triple* t : order) {
    const Entity& s = entities_[t->subject];
    const Entity& o = entities_[t->object];
    os << s.name << '\t' << s.etype << '\t' << relation_names_[t->predicate]
       << '\t' << o.name << '\t' << o.etype << '\n';
  }
}

KnowledgeBase parse_kb(std::istream& in, const std::string& source) {
  struct RawTriple {
    std::size_t line;
    std::string s_name, s_type, predicate, o_name, o_type;
  };
  static constexpr const char* kTripleFields[] = {
      "subject_name", "subject_type", "predicate", "object_name",
      "object_type"};
  static constexpr const char* kEntityFields[] = {"name", "type"};

  std::map<std::pair<std::string, std::string>, std::size_t> declared;
  std::vector<RawTriple> raw;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(source + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() == 2) {
      for (std::size_t i = 0; i < 2; ++i) {
        if (fields[i].empty()) {
          fail(std::string("field '") + kEntityFields[i] + "' is empty");
        }
      }
      auto key = std::make_pair(std::string(fields[0]), std::string(fields[1]));
      auto [it, inserted] = declared.emplace(key, lineno);
      if (!inserted) {
        fail("duplicate entity declaration (" + key.first + ", " + key.second +
             "), first declared on line " + std::to_string(it->second));
      }
    } else if (fields.size() == 5) {
      for (std::size_t i = 0; i < 5; ++i) {
        if (fields[i].empty()) {
          fail(std::string("field '") + kTripleFields[i] + "' is empty");
        }
      }
      raw.push_back(RawTriple{lineno, std::string(fields[0]),
                              std::string(fields[1]), std::string(fields[2]),
                              std::string(fields[3]), std::string(fields[4])});
    } else {
      fail("expected 2 (entity) or 5 (triple) tab-separated fields, got " +
           std::to_string(fields.size()));
    }
  }

  KnowledgeBase kb;
  // std::map iteration gives the canonical (name, etype) id order.
  for (const auto& [key, unused] : declared) kb.add_entity(key.first, key.second);

  std::map<std::tuple<EntityId, std::string, EntityId>, std::size_t> seen;
  for (const auto& t : raw) {
    lineno = t.line;
    auto s = kb.find(t.s_name, t.s_type);
    if (!s) {
      fail("subject references undeclared entity (" + t.s_name + ", " +
           t.s_type + ")");
    }
    auto o = kb.find(t.o_name, t.o_type);
    if (!o) {
      fail("object references undeclared entity (" + t.o_name + ", " +
           t.o_type + ")");
    }
    if (*s == *o) fail("self-loop triple on (" + t.s_name + ", " + t.s_type + ")");
    auto [it, inserted] = seen.emplace(std::make_tuple(*s, t.predicate, *o), t.line);
    if (!inserted) {
      fail("duplicate triple (" + t.s_name + ", " + t.predicate + ", " +
           t.o_name + "), first seen on line " + std::to_string(it->second));
    }
  }
  // Insert triples in canonical order so relation ids are line-order free.
  std::vector<const RawTriple*> sorted;
  for (const auto& t : raw) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](const RawTriple* a, const RawTriple* b) {
    return std::tie(a->s_name, a->s_type, a->predicate, a->o_name, a->o_type) <
           std::tie(b->s_name, b->s_type, b->predicate, b->o_name, b->o_type);
  });
  for (const RawTriple* t : sorted) {
    kb.add_triple(*kb.find(t->s_name, t->s_type), t->predicate,
                  *kb.find(t->o_name, t->o_type));
  }
  return kb;
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open KB file " + path.string());
  return parse_kb(in, path.string());
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write KB file " + path.string());
  kb.write(out);
}

}  // namespace aarqa
