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

#include "aarqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "aarqa/error.hpp"
#include "aarqa/rng.hpp"

namespace aarqa {

namespace {

// Splits `total` into parts proportional to `weights`, each at least
// `minimum`, by largest remainder. Ties go to the earlier index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights,
                                   std::size_t minimum) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out(n, minimum);
  if (total < minimum * n) throw ValidationError("apportion: total below minimum");
  const std::size_t rest = total - minimum * n;
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> frac(n);
  std::size_t given = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = rest * weights[i] / sum;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    out[i] += whole;
    given += whole;
    frac[i] = exact - static_cast<double>(whole);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; given < rest; ++k, ++given) ++out[order[k % n]];
  return out;
}

std::string slug(const std::string& type, std::size_t index, std::size_t count) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::max<std::size_t>(3, std::to_string(count).size());
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return type + "_" + digits;
}

// Weighted sampler over a fixed pool by cumulative weights.
class PoolSampler {
 public:
  PoolSampler(std::vector<EntityId> pool, const std::vector<double>& weight_of)
      : pool_(std::move(pool)) {
    double acc = 0;
    for (EntityId e : pool_) {
      acc += weight_of[e];
      cumulative_.push_back(acc);
    }
  }
  EntityId draw(Rng& rng) const {
    const double x = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    return pool_[static_cast<std::size_t>(it - cumulative_.begin())];
  }
  const std::vector<EntityId>& pool() const { return pool_; }

 private:
  std::vector<EntityId> pool_;
  std::vector<double> cumulative_;
};

RelationSignature sig(std::string rel, std::vector<std::string> s,
                      std::vector<std::string> o, double w) {
  return RelationSignature{std::move(rel), std::move(s), std::move(o), w};
}

std::size_t scaled(std::size_t n, double scale) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
}

const char* const kDeskTemplates = R"([
  {"text": "what medications is patient |Patient| prescribed with ?",
   "answer_type": "medication", "answer_paths": ["+prescribed_with"]},
  {"text": "list all medications taken by patient |Patient| .",
   "answer_type": "medication", "answer_paths": ["+prescribed_with"]},
  {"text": "what does patient |Patient| take |Medication| for ?",
   "answer_type": "disease", "answer_paths": ["+prescribed_with/+has_reason"]},
  {"text": "which symptoms is patient |Patient| on |Medication| for ?",
   "answer_type": "symptom", "answer_paths": ["+prescribed_with/+has_reason"]},
  {"text": "what is the dosage of |Medication| for patient |Patient| ?", "root": "Patient",
   "answer_type": "dosage", "answer_paths": ["+prescribed_with/+has_dosage"]},
  {"text": "how often does patient |Patient| take |Medication| ?",
   "answer_type": "frequency", "answer_paths": ["+prescribed_with/+has_frequency"]},
  {"text": "which diseases has patient |Patient| been diagnosed with ?",
   "answer_type": "disease", "answer_paths": ["+diagnosed_with"]},
  {"text": "give me all patients who have been prescribed with |Medication| .",
   "answer_type": "patient", "answer_paths": ["-prescribed_with"]},
  {"text": "which patients have been diagnosed with |Disease| ?",
   "answer_type": "patient", "answer_paths": ["-diagnosed_with"]},
  {"text": "what tests did patient |Patient| undergo ?",
   "answer_type": "test", "answer_paths": ["+underwent"]},
  {"text": "which diseases were revealed by the tests of patient |Patient| ?",
   "answer_type": "disease", "answer_paths": ["+underwent/+reveals"]},
  {"text": "what is the smoking status of patient |Patient| ?",
   "answer_type": "smoking_status", "answer_paths": ["+has_attribute"]}
])";

const std::vector<std::string>& medication_classes() {
  static const std::vector<std::string> v = {
      "analgesic",      "antibiotic",     "anticoagulant", "antihypertensive",
      "bronchodilator", "diuretic",       "insulin",       "statin",
      "steroid",        "antidepressant", "antiemetic",    "anticonvulsant"};
  return v;
}

const std::vector<std::string>& disease_classes() {
  static const std::vector<std::string> v = {
      "cardiovascular_disease", "respiratory_disease",     "endocrine_disease",
      "renal_disease",          "neurological_disease",    "infectious_disease",
      "gastrointestinal_disease", "psychiatric_disease",   "musculoskeletal_disease",
      "dermatological_disease", "hematologic_disease",     "oncologic_disease",
      "hepatic_disease",        "metabolic_disease",       "autoimmune_disease",
      "ophthalmic_disease",     "otolaryngologic_disease", "urologic_disease",
      "vascular_disease",       "pain_condition"};
  return v;
}

}  // namespace

void validate(const KBProfile& p) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("profile " + (p.name.empty() ? "<unnamed>" : p.name) + ": " + msg);
  };
  if (p.types.empty()) fail("no types");
  std::set<std::string> types(p.types.begin(), p.types.end());
  if (types.size() != p.types.size()) fail("duplicate type name");
  if (!types.count(p.patient_type)) fail("patient type '" + p.patient_type + "' not listed");
  if (p.patients == 0) fail("patients must be positive");
  if (p.entities < p.patients + (p.types.size() - 1)) {
    fail("too few entities (" + std::to_string(p.entities) + ") for " +
         std::to_string(p.patients) + " patients and " + std::to_string(p.types.size()) +
         " types");
  }
  for (const auto& [t, w] : p.type_weights) {
    if (!types.count(t)) fail("weight for unknown type '" + t + "'");
    if (!(w > 0)) fail("weight of type '" + t + "' must be positive");
  }
  if (p.relations.empty()) fail("no relations");
  std::set<std::string> rels;
  std::set<std::string> used;
  for (const auto& r : p.relations) {
    if (r.relation.empty()) fail("empty relation name");
    if (!rels.insert(r.relation).second) fail("duplicate relation '" + r.relation + "'");
    if (r.subject_types.empty() || r.object_types.empty()) {
      fail("relation '" + r.relation + "' needs subject and object types");
    }
    if (!(r.weight > 0)) fail("relation '" + r.relation + "' weight must be positive");
    for (const auto* list : {&r.subject_types, &r.object_types}) {
      for (const auto& t : *list) {
        if (!types.count(t)) fail("relation '" + r.relation + "' uses unknown type '" + t + "'");
        used.insert(t);
      }
    }
  }
  for (const auto& t : p.types) {
    if (!used.count(t)) fail("type '" + t + "' appears in no relation");
  }
  if (p.triples < p.relations.size()) fail("fewer triples than relations");
  if (!(p.fanout_exponent >= 0)) fail("fanout_exponent must be >= 0");
}

nlohmann::json to_json(const KBProfile& p) {
  nlohmann::json rels = nlohmann::json::array();
  for (const auto& r : p.relations) {
    rels.push_back({{"relation", r.relation},
                    {"subject_types", r.subject_types},
                    {"object_types", r.object_types},
                    {"weight", r.weight}});
  }
  return {{"name", p.name},
          {"entities", p.entities},
          {"triples", p.triples},
          {"patients", p.patients},
          {"patient_type", p.patient_type},
          {"types", p.types},
          {"type_weights", p.type_weights},
          {"relations", rels},
          {"fanout_exponent", p.fanout_exponent}};
}

KBProfile profile_from_json(const nlohmann::json& obj) {
  KBProfile p;
  try {
    p.name = obj.value("name", "");
    p.entities = obj.at("entities").get<std::size_t>();
    p.triples = obj.at("triples").get<std::size_t>();
    p.patients = obj.at("patients").get<std::size_t>();
    p.patient_type = obj.value("patient_type", "patient");
    p.types = obj.at("types").get<std::vector<std::string>>();
    if (obj.contains("type_weights")) {
      p.type_weights = obj["type_weights"].get<std::map<std::string, double>>();
    }
    for (const auto& r : obj.at("relations")) {
      p.relations.push_back(sig(r.at("relation").get<std::string>(),
                                r.at("subject_types").get<std::vector<std::string>>(),
                                r.at("object_types").get<std::vector<std::string>>(),
                                r.value("weight", 1.0)));
    }
    p.fanout_exponent = obj.value("fanout_exponent", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("profile: ") + e.what());
  }
  validate(p);
  return p;
}

KBProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open profile " + path.string());
  nlohmann::json obj;
  try {
    in >> obj;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return profile_from_json(obj);
}

KBProfile desk_profile() {
  KBProfile p;
  p.name = "desk";
  p.entities = 1000;
  p.triples = 3000;
  p.patients = 50;
  p.types = {"patient", "medication", "disease",  "symptom",        "dosage",
             "frequency", "test",     "treatment", "smoking_status", "date"};
  p.type_weights = {{"medication", 150}, {"disease", 200},       {"symptom", 150},
                    {"dosage", 60},      {"frequency", 30},      {"test", 120},
                    {"treatment", 120},  {"smoking_status", 5},  {"date", 115}};
  p.relations = {
      sig("prescribed_with", {"patient"}, {"medication"}, 4),
      sig("diagnosed_with", {"patient"}, {"disease"}, 3),
      sig("has_reason", {"medication"}, {"disease", "symptom"}, 3),
      sig("has_dosage", {"medication"}, {"dosage"}, 1.5),
      sig("has_frequency", {"medication"}, {"frequency"}, 1.5),
      sig("underwent", {"patient"}, {"test", "treatment"}, 2),
      sig("reveals", {"test"}, {"disease", "symptom"}, 1.5),
      sig("has_attribute", {"patient"}, {"smoking_status", "date"}, 1),
  };
  return p;
}

KBProfile medications_profile(double scale) {
  if (!(scale > 0)) throw ValidationError("profile: scale must be positive");
  KBProfile p;
  p.name = scale == 1.0 ? "medications" : "medications@" + [&] {
    std::ostringstream s;
    s << scale;
    return s.str();
  }();
  p.entities = scaled(28821, scale);
  p.triples = scaled(53519, scale);
  p.patients = std::max<std::size_t>(1, scaled(261, scale));
  const auto& meds = medication_classes();
  const auto& diseases = disease_classes();
  const std::vector<std::string> base = {
      "patient", "dosage",    "frequency", "mode",      "duration",  "symptom", "test",
      "treatment", "procedure", "lab_value", "allergy", "vital_sign", "date",
      "smoking_status"};
  p.types = base;
  p.types.insert(p.types.end(), meds.begin(), meds.end());
  p.types.insert(p.types.end(), diseases.begin(), diseases.end());

  p.type_weights = {{"dosage", 300},    {"frequency", 40},  {"mode", 12},
                    {"duration", 60},   {"symptom", 1500},  {"test", 900},
                    {"treatment", 900}, {"procedure", 800}, {"lab_value", 1200},
                    {"allergy", 150},   {"vital_sign", 400}, {"date", 1500},
                    {"smoking_status", 6}};
  for (const auto& m : meds) p.type_weights[m] = 700;
  for (const auto& d : diseases) p.type_weights[d] = 750;

  std::vector<std::string> all_diseases = diseases;
  std::vector<std::string> reasons = diseases;
  reasons.push_back("symptom");
  std::vector<std::string> findings = diseases;
  findings.push_back("symptom");
  findings.push_back("lab_value");
  p.relations = {
      sig("prescribed_with", {"patient"}, meds, 8),
      sig("has_dosage", meds, {"dosage"}, 4),
      sig("has_frequency", meds, {"frequency"}, 3),
      sig("has_mode", meds, {"mode"}, 2),
      sig("has_duration", meds, {"duration"}, 2),
      sig("has_reason", meds, reasons, 6),
      sig("diagnosed_with", {"patient"}, all_diseases, 6),
      sig("has_comorbidity", all_diseases, all_diseases, 4),
      sig("underwent", {"patient"}, {"test", "procedure", "treatment"}, 5),
      sig("reveals", {"test"}, findings, 4),
      sig("has_allergy", {"patient"}, {"allergy"}, 1),
      sig("has_vital", {"patient"}, {"vital_sign"}, 2),
      sig("admitted_on", {"patient"}, {"date"}, 2),
      sig("has_smoking_status", {"patient"}, {"smoking_status"}, 0.2),
  };
  return p;
}

KBProfile resolve_profile(const std::string& spec) {
  if (spec == "desk") return desk_profile();
  if (spec == "medications") return medications_profile(1.0);
  const std::string prefix = "medications@";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string num = spec.substr(prefix.size());
    std::size_t used = 0;
    double scale = 0;
    try {
      scale = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size() || num.empty()) {
      throw ValidationError("profile: bad scale in '" + spec + "'");
    }
    return medications_profile(scale);
  }
  return load_profile(spec);
}

KnowledgeBase generate_kb(const KBProfile& profile, std::uint64_t seed) {
  validate(profile);
  Rng rng(derive_seed(seed, 0));

  // Entity counts per type.
  std::vector<std::string> others;
  std::vector<double> weights;
  for (const auto& t : profile.types) {
    if (t == profile.patient_type) continue;
    others.push_back(t);
    auto it = profile.type_weights.find(t);
    weights.push_back(it == profile.type_weights.end() ? 1.0 : it->second);
  }
  const auto counts = apportion(profile.entities - profile.patients, weights, 1);

  KnowledgeBase scratch;
  std::map<std::string, std::vector<EntityId>> by_type;
  auto add_type = [&](const std::string& type, std::size_t n) {
    auto& ids = by_type[type];
    for (std::size_t i = 1; i <= n; ++i) ids.push_back(scratch.add_entity(slug(type, i, n), type));
  };
  add_type(profile.patient_type, profile.patients);
  for (std::size_t i = 0; i < others.size(); ++i) add_type(others[i], counts[i]);
  const std::size_t num_entities = scratch.entity_count();

  // Popularity: within each type a random rank order and weight 1/rank^s.
  std::vector<double> popularity(num_entities, 0.0);
  for (auto& [type, ids] : by_type) {
    std::vector<EntityId> ranked = ids;
    rng.shuffle(ranked);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      popularity[ranked[r]] = 1.0 / std::pow(static_cast<double>(r + 1), profile.fanout_exponent);
    }
  }

  const std::size_t num_rel = profile.relations.size();
  std::vector<double> rel_weights;
  for (const auto& r : profile.relations) rel_weights.push_back(r.weight);
  std::vector<std::size_t> budget = apportion(profile.triples, rel_weights, 1);

  std::vector<PoolSampler> subjects, objects;
  std::vector<std::set<std::string>> subject_types(num_rel), object_types(num_rel);
  for (std::size_t r = 0; r < num_rel; ++r) {
    const auto& sigr = profile.relations[r];
    auto pool_of = [&](const std::vector<std::string>& types) {
      std::vector<EntityId> pool;
      for (const auto& t : types) pool.insert(pool.end(), by_type[t].begin(), by_type[t].end());
      std::sort(pool.begin(), pool.end());
      pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
      return pool;
    };
    subjects.emplace_back(pool_of(sigr.subject_types), popularity);
    objects.emplace_back(pool_of(sigr.object_types), popularity);
    subject_types[r].insert(sigr.subject_types.begin(), sigr.subject_types.end());
    object_types[r].insert(sigr.object_types.begin(), sigr.object_types.end());

    // Distinct (subject, object) pairs the relation admits.
    const auto& sp = subjects[r].pool();
    const auto& op = objects[r].pool();
    std::vector<EntityId> both;
    std::set_intersection(sp.begin(), sp.end(), op.begin(), op.end(), std::back_inserter(both));
    const double capacity = static_cast<double>(sp.size()) * static_cast<double>(op.size()) -
                            static_cast<double>(both.size());
    if (static_cast<double>(budget[r]) > capacity) {
      throw ValidationError("profile " + profile.name + ": relation '" + sigr.relation +
                            "' needs " + std::to_string(budget[r]) +
                            " triples but its types admit only " +
                            std::to_string(static_cast<long long>(capacity)));
    }
  }

  std::unordered_set<std::uint64_t> seen;
  auto key = [&](EntityId s, std::size_t r, EntityId o) {
    return (static_cast<std::uint64_t>(s) * num_rel + r) * num_entities + o;
  };
  struct Edge {
    EntityId s;
    std::size_t r;
    EntityId o;
  };
  std::vector<Edge> edges;
  std::vector<bool> touched(num_entities, false);
  auto try_add = [&](EntityId s, std::size_t r, EntityId o) {
    if (s == o || budget[r] == 0) return false;
    if (!seen.insert(key(s, r, o)).second) return false;
    edges.push_back({s, r, o});
    --budget[r];
    touched[s] = touched[o] = true;
    return true;
  };

  // Coverage pass: give every entity one edge while budget lasts, using the
  // relation with the most remaining budget that admits its type.
  std::vector<EntityId> visit(num_entities);
  std::iota(visit.begin(), visit.end(), 0);
  rng.shuffle(visit);
  for (EntityId e : visit) {
    if (touched[e]) continue;
    const std::string& type = scratch.entity(e).etype;
    std::size_t pick = num_rel;
    bool as_object = false;
    for (std::size_t r = 0; r < num_rel; ++r) {
      if (budget[r] == 0) continue;
      const bool obj = object_types[r].count(type) > 0;
      const bool subj = subject_types[r].count(type) > 0;
      if (!obj && !subj) continue;
      if (pick == num_rel || budget[r] > budget[pick]) {
        pick = r;
        as_object = obj;
      }
    }
    if (pick == num_rel) continue;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const bool ok = as_object ? try_add(subjects[pick].draw(rng), pick, e)
                                : try_add(e, pick, objects[pick].draw(rng));
      if (ok) break;
    }
  }

  // Fill pass: popularity-weighted endpoints, falling back to an exhaustive
  // draw from the remaining free pairs when rejection stalls.
  for (std::size_t r = 0; r < num_rel; ++r) {
    std::size_t stall = 0;
    const std::size_t limit = 50 * budget[r] + 1000;
    while (budget[r] > 0 && stall < limit) {
      if (!try_add(subjects[r].draw(rng), r, objects[r].draw(rng))) ++stall;
    }
    if (budget[r] == 0) continue;
    std::vector<std::pair<EntityId, EntityId>> free;
    for (EntityId s : subjects[r].pool()) {
      for (EntityId o : objects[r].pool()) {
        if (s != o && !seen.count(key(s, r, o))) free.emplace_back(s, o);
      }
    }
    rng.shuffle(free);
    for (std::size_t i = 0; budget[r] > 0 && i < free.size(); ++i) {
      try_add(free[i].first, r, free[i].second);
    }
    if (budget[r] > 0) {
      throw ValidationError("profile " + profile.name + ": cannot place all triples of '" +
                            profile.relations[r].relation + "'");
    }
  }

  for (const auto& e : edges) {
    scratch.add_triple(e.s, profile.relations[e.r].relation, e.o);
  }
  // Round-trip through the text form so ids follow the canonical order.
  std::stringstream buf;
  scratch.write(buf);
  return parse_kb(buf, "<generated>");
}

std::vector<Template> desk_templates() { return parse_templates_json(kDeskTemplates); }

std::vector<Template> medications_templates() {
  std::string json = "[";
  bool first = true;
  auto add = [&](const std::string& text, const std::string& root, const std::string& answer,
                 const std::string& path) {
    nlohmann::json t = {{"text", text}, {"answer_type", answer}, {"answer_paths", {path}}};
    if (!root.empty()) t["root"] = root;
    json += (first ? "" : ",") + t.dump();
    first = false;
  };
  for (const auto& m : medication_classes()) {
    std::string name = m;
    std::replace(name.begin(), name.end(), '_', ' ');
    add("what " + name + " medications is patient |Patient| prescribed with ?", "", m,
        "+prescribed_with");
  }
  for (const auto& d : disease_classes()) {
    std::string name = d;
    std::replace(name.begin(), name.end(), '_', ' ');
    add("which " + name + " has patient |Patient| been diagnosed with ?", "", d,
        "+diagnosed_with");
  }
  add("what is the dosage of |Analgesic| for patient |Patient| ?", "Patient", "dosage",
      "+prescribed_with/+has_dosage");
  add("how often does patient |Patient| take |Antibiotic| ?", "", "frequency",
      "+prescribed_with/+has_frequency");
  add("what is the mode of |Insulin| for patient |Patient| ?", "Patient", "mode",
      "+prescribed_with/+has_mode");
  add("what symptoms does patient |Patient| take |Analgesic| for ?", "", "symptom",
      "+prescribed_with/+has_reason");
  add("what procedures did patient |Patient| undergo ?", "", "procedure", "+underwent");
  add("what allergies does patient |Patient| have ?", "", "allergy", "+has_allergy");
  add("what is the smoking status of patient |Patient| ?", "", "smoking_status",
      "+has_smoking_status");
  json += "]";
  return parse_templates_json(json);
}

void assign_splits(std::vector<QAInstance>& data, const SplitProportions& p,
                   std::uint64_t seed) {
  const double total = p.train + p.dev + p.test;
  if (!(p.train >= 0 && p.dev >= 0 && p.test >= 0 && total > 0)) {
    throw ValidationError("split proportions must be non-negative with a positive sum");
  }
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(n * p.train / total));
  const auto n_dev =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(n * p.dev / total)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  for (std::size_t k = 0; k < n; ++k) {
    auto& q = data[order[k]];
    q.split = k < n_train ? Split::kTrain : k < n_train + n_dev ? Split::kDev : Split::kTest;
  }
  for (std::size_t i = 0; i < n; ++i) data[i].id = i;
}

std::vector<QAInstance> generate_dataset(const KnowledgeBase& kb,
                                         const std::vector<Template>& templates,
                                         std::uint64_t seed,
                                         const SplitProportions& proportions) {
  std::vector<QAInstance> data;
  for (std::size_t k = 0; k < templates.size(); ++k) {
    validate_template(templates[k], kb);
    auto inst = populate(templates[k], kb, templates[k].cap, derive_seed(seed, k));
    for (auto& q : inst) {
      q.template_index = static_cast<int>(k);
      data.push_back(std::move(q));
    }
  }
  if (data.empty()) {
    throw ValidationError("no template produced an answerable instance for this KB");
  }
  assign_splits(data, proportions, derive_seed(seed, 0xfffff));
  return data;
}

}  // namespace aarqa
