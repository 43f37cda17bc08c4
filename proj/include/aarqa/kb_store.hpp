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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aarqa {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

enum class Direction : std::uint8_t { kOut = 0, kIn = 1 };

const char* to_string(Direction d);

// An entity is identified by its (name, etype) pair; the same surface name
// may occur under several types.
struct Entity {
  EntityId id = 0;
  std::string name;
  std::string etype;
};

struct Triple {
  EntityId subject = 0;
  RelationId predicate = 0;
  EntityId object = 0;
};

// One incident triple seen from an entity.
struct Incidence {
  RelationId predicate = 0;
  EntityId neighbor = 0;
  Direction direction = Direction::kOut;

  friend bool operator==(const Incidence&, const Incidence&) = default;
};

struct KBStats {
  std::size_t entities = 0;
  std::size_t types = 0;
  std::size_t triples = 0;
  std::size_t relations = 0;

  friend bool operator==(const KBStats&, const KBStats&) = default;
};

// Typed-entity triple store with outgoing and incoming adjacency indexes.
//
// Construction goes through add_entity/add_triple from a single writer. Once
// built, every const member is safe to call from any number of threads.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  // Returns the id of (name, etype), creating the entity if needed.
  EntityId add_entity(std::string_view name, std::string_view etype);

  // Throws ValidationError on unknown ids, self loops and duplicates.
  void add_triple(EntityId subject, std::string_view predicate,
                  EntityId object);

  std::optional<EntityId> find(std::string_view name,
                               std::string_view etype) const;
  std::optional<RelationId> find_relation(std::string_view predicate) const;

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t triple_count() const { return triples_.size(); }
  std::size_t relation_count() const { return relation_names_.size(); }

  const Entity& entity(EntityId id) const;
  const std::string& relation_name(RelationId id) const;

  std::span<const Entity> entities() const { return entities_; }
  std::span<const Triple> triples() const { return triples_; }

  // Raw adjacency: out_edges(s) holds (p, o) for every (s, p, o) and
  // in_edges(o) holds (p, s). Both are kept in neighbors() order.
  std::span<const Incidence> out_edges(EntityId id) const;
  std::span<const Incidence> in_edges(EntityId id) const;

  // Every incident triple once, ordered by predicate name, neighbor id, then
  // direction (out before in).
  std::span<const Incidence> neighbors(EntityId id) const;

  // Distinct entity types and predicate names, sorted.
  std::vector<std::string> types() const;
  std::vector<std::string> relations() const;

  std::vector<EntityId> entities_of_type(std::string_view etype) const;

  KBStats stats() const;

  // Canonical serialization: entity declarations sorted by (name, etype),
  // then triples sorted by (subject, predicate, object) names.
  void write(std::ostream& os) const;

 private:
  void check_id(EntityId id, const char* what) const;
  bool incidence_less(const Incidence& a, const Incidence& b) const;
  void insert_sorted(std::vector<Incidence>& list, const Incidence& inc);

  std::vector<Entity> entities_;
  std::vector<Triple> triples_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  std::unordered_map<std::string, EntityId> entity_ids_;  // key: name \t type
  std::vector<std::vector<Incidence>> out_index_;
  std::vector<std::vector<Incidence>> in_index_;
  std::vector<std::vector<Incidence>> incident_;
};

// Parses the tab-separated KB format. Two-field lines declare entities
// (name, etype); five-field lines are triples (subject name, subject type,
// predicate, object name, object type). Lines starting with '#' and blank
// lines are ignored. Entity ids are assigned in (name, etype) order so the
// result does not depend on line order.
KnowledgeBase parse_kb(std::istream& in, const std::string& source = "<input>");
KnowledgeBase load_kb(const std::filesystem::path& path);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

}  // namespace aarqa
