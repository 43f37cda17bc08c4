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

// Command line driver: synth, candidates, train, eval, ablate, attn-export.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aarqa/candidates.hpp"
#include "aarqa/checkpoint.hpp"
#include "aarqa/error.hpp"
#include "aarqa/kb_store.hpp"
#include "aarqa/metrics.hpp"
#include "aarqa/model.hpp"
#include "aarqa/qa_templates.hpp"
#include "aarqa/synth.hpp"
#include "aarqa/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aarqa {
namespace {

// Exit status per error category.
int exit_code(const std::string& category) {
  static const std::map<std::string, int> kCodes = {
      {"usage", 2}, {"io", 3},         {"parse", 4},
      {"validation", 5}, {"config", 6}, {"divergence", 7}};
  auto it = kCodes.find(category);
  return it == kCodes.end() ? 1 : it->second;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw Error("usage", std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw IoError("no such file: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Collects inputs, outputs and timing for the run manifest.
class Run {
 public:
  Run(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)),
        start_(std::chrono::steady_clock::now()) {}

  // --out when given, otherwise runs/<UTC timestamp>_seed<seed>.
  void open(const std::string& out, std::uint64_t seed) {
    if (!out.empty()) {
      dir_ = out;
    } else {
      const std::time_t now = std::time(nullptr);
      std::tm tm{};
      gmtime_r(&now, &tm);
      char stamp[32];
      std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
      dir_ = fs::path("runs") / (std::string(stamp) + "_seed" + std::to_string(seed));
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
    seed_ = seed;
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }
  void input(const std::string& path) { inputs_.push_back(path); }
  void output(const fs::path& path) { outputs_.push_back(path); }
  void config(json c) { config_ = std::move(c); }

  void write_output(const std::string& name, const std::string& text) {
    write_text(path(name), text);
    output(path(name));
  }

  void finish() {
    json inputs = json::object();
    for (const auto& p : inputs_) inputs[p] = sha256_file(p);
    json outputs = json::object();
    for (const auto& p : outputs_) outputs[p.string()] = sha256_file(p);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m = {{"command", command_}, {"argv", argv_},     {"seed", seed_},
              {"config", config_},   {"inputs", inputs},  {"outputs", outputs},
              {"duration_seconds", seconds}};
    write_text(path("manifest.json"), dump(m));
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  fs::path dir_;
  std::uint64_t seed_ = 0;
  std::vector<std::string> inputs_;
  std::vector<fs::path> outputs_;
  json config_ = json::object();
};

struct Options {
  std::string kb, dataset, templates, profile, config, checkpoint, out;
  std::string aspects, model, init, split = "test", subsets;
  std::uint64_t seed = 0;
  double gamma = 0.2, lr = 1e-4;
  int epochs = 10, jobs = 1, dim = 300, limit = 0;
  std::size_t batch_size = 32;
};

TrainConfig effective_config(const Options& o, const CLI::App& sub, Run& run) {
  TrainConfig c;
  if (!o.config.empty()) {
    require_file(o.config, "--config");
    run.input(o.config);
    std::ifstream in(o.config);
    if (!in) throw IoError("cannot open config " + o.config);
    json obj;
    try {
      in >> obj;
    } catch (const json::exception& e) {
      throw ParseError(o.config + ": " + e.what());
    }
    c = train_config_from_json(obj, c);
  }
  auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  try {
    if (given("--seed")) c.seed = o.seed;
    if (given("--gamma")) c.margin = c.threshold = o.gamma;
    if (given("--lr")) c.learning_rate = o.lr;
    if (given("--epochs")) c.epochs = o.epochs;
    if (given("--jobs")) c.jobs = o.jobs;
    if (given("--dim")) c.model.dim = o.dim;
    if (given("--batch-size")) c.batch_size = o.batch_size;
    if (given("--aspects")) c.model.aspects = parse_aspects(o.aspects);
    if (given("--model")) c.model.kind = parse_model_kind(o.model);
    if (given("--init")) c.model.init = parse_init_scheme(o.init);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  run.config(to_json(c));
  return c;
}

KnowledgeBase open_kb(const Options& o, Run& run) {
  require_file(o.kb, "--kb");
  run.input(o.kb);
  return load_kb(o.kb);
}

std::vector<QAInstance> open_dataset(const Options& o, const KnowledgeBase& kb, Run& run) {
  require_file(o.dataset, "--dataset");
  run.input(o.dataset);
  return load_dataset(o.dataset, kb);
}

std::string metrics_table(const std::string& label, const Metrics& m) {
  const std::size_t width = std::max<std::size_t>(5, label.size());
  return metrics_header(width) + "\n" + metrics_row(label, m, width) + "\n";
}

int cmd_synth(const Options& o, Run& run) {
  if (o.profile.empty()) throw Error("usage", "--profile is required");
  KBProfile profile;
  if (fs::exists(o.profile)) {
    run.input(o.profile);
    profile = load_profile(o.profile);
  } else {
    profile = resolve_profile(o.profile);
  }
  std::vector<Template> templates;
  if (!o.templates.empty()) {
    require_file(o.templates, "--templates");
    run.input(o.templates);
    templates = load_templates(o.templates);
  } else if (profile.name.rfind("medications", 0) == 0) {
    templates = medications_templates();
  } else {
    templates = desk_templates();
  }
  run.open(o.out, o.seed);
  run.config({{"profile", to_json(profile)}, {"seed", o.seed}});

  const KnowledgeBase kb = generate_kb(profile, o.seed);
  const auto data = generate_dataset(kb, templates, derive_seed(o.seed, 1));
  save_kb(kb, run.path("kb.tsv"));
  run.output(run.path("kb.tsv"));
  save_dataset(run.path("dataset.jsonl"), kb, data);
  run.output(run.path("dataset.jsonl"));
  run.write_output("profile.json", dump(to_json(profile)));
  run.write_output("templates.json", templates_to_json(templates) + "\n");

  const KBStats st = kb.stats();
  std::size_t min_gold = SIZE_MAX, max_gold = 0, sum_gold = 0;
  std::map<std::string, std::size_t> splits;
  for (const auto& q : data) {
    min_gold = std::min(min_gold, q.gold.size());
    max_gold = std::max(max_gold, q.gold.size());
    sum_gold += q.gold.size();
    ++splits[to_string(q.split)];
  }
  json stats = {
      {"kb", {{"entities", st.entities}, {"types", st.types}, {"triples", st.triples},
              {"relations", st.relations}}},
      {"questions", data.size()},
      {"splits", splits},
      {"gold", {{"min", min_gold}, {"max", max_gold},
                {"avg", static_cast<double>(sum_gold) / data.size()}}}};
  run.write_output("stats.json", dump(stats));
  std::cout << dump(stats);
  run.finish();
  return 0;
}

int cmd_candidates(const Options& o, Run& run) {
  const KnowledgeBase kb = open_kb(o, run);
  const auto data = open_dataset(o, kb, run);
  run.open(o.out, o.seed);
  std::vector<const QAInstance*> qs;
  if (o.split == "all") {
    for (const auto& q : data) qs.push_back(&q);
  } else {
    qs = select_split(data, parse_split(o.split));
  }
  const auto cands = build_candidates(kb, qs, o.jobs);
  std::ostringstream lines;
  std::size_t total = 0, covered = 0, gold_total = 0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    for (const auto& c : cands[i].candidates) {
      const json line = {{"question_id", qs[i]->id},
                         {"entity", kb.entity(c.entity).name},
                         {"type", c.etype},
                         {"path", c.path.key},
                         {"context_size", c.context.size()}};
      lines << line.dump() << "\n";
    }
    total += cands[i].candidates.size();
    const auto ents = candidate_entities(cands[i]);
    for (EntityId g : qs[i]->gold) {
      ++gold_total;
      if (std::binary_search(ents.begin(), ents.end(), g)) ++covered;
    }
  }
  run.write_output("candidates.jsonl", lines.str());
  json summary = {{"questions", qs.size()},
                  {"candidates", total},
                  {"gold", gold_total},
                  {"gold_covered", covered}};
  run.write_output("candidates_summary.json", dump(summary));
  std::cout << dump(summary);
  run.finish();
  return 0;
}

std::string loss_csv(const std::vector<EpochLog>& log) {
  std::ostringstream csv;
  csv << "epoch,train_loss,pairs,dev_micro_f1\n";
  csv << std::setprecision(17);
  for (const auto& e : log) {
    csv << e.epoch << ',' << e.train_loss << ',' << e.pairs << ',' << e.dev_micro_f1 << '\n';
  }
  return csv.str();
}

int cmd_train(const Options& o, const CLI::App& sub, Run& run) {
  const TrainConfig config = effective_config(o, sub, run);
  const KnowledgeBase kb = open_kb(o, run);
  const auto data = open_dataset(o, kb, run);
  run.open(o.out, config.seed);
  const TrainResult r = train(data, kb, config, [](const EpochLog& e) {
    std::fprintf(stderr, "epoch %d  loss %.6f  pairs %zu  dev micro-F1 %.4f\n", e.epoch,
                 e.train_loss, e.pairs, e.dev_micro_f1);
  });
  Checkpoint ckpt = r.model.to_checkpoint();
  ckpt.meta["train_config"] = to_json(config);
  ckpt.meta["best_epoch"] = r.best_epoch;
  save_checkpoint(ckpt, run.path("model.json"));
  run.output(run.path("model.json"));
  run.output(run.path("model.bin"));
  run.write_output("train_log.csv", loss_csv(r.log));
  json metrics = {{"best_epoch", r.best_epoch},
                  {"skipped_questions", r.skipped_questions},
                  {"dev", to_json(r.best_dev)}};
  run.write_output("metrics.json", dump(metrics));
  std::cout << metrics_table("dev", r.best_dev);
  run.finish();
  return 0;
}

struct Loaded {
  Model model;
  double threshold = 0.2;
  int max_hops = 3;
};

Loaded open_checkpoint(const Options& o, const CLI::App& sub, const KnowledgeBase& kb,
                       Run& run) {
  require_file(o.checkpoint, "--checkpoint");
  run.input(o.checkpoint);
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  Loaded l;
  l.model = Model::from_checkpoint(ckpt, kb);
  if (ckpt.meta.contains("train_config")) {
    const auto& tc = ckpt.meta["train_config"];
    l.threshold = tc.value("threshold", 0.2);
    l.max_hops = tc.value("max_hops", 3);
  }
  if (sub.count("--gamma")) l.threshold = o.gamma;
  if (!(l.threshold >= 0)) throw ConfigError("gamma must be >= 0");
  return l;
}

std::vector<const QAInstance*> split_of(const std::vector<QAInstance>& data,
                                        const std::string& split) {
  const auto qs = select_split(data, parse_split(split));
  if (qs.empty()) throw ValidationError("the " + split + " split is empty");
  return qs;
}

int cmd_eval(const Options& o, const CLI::App& sub, Run& run) {
  const KnowledgeBase kb = open_kb(o, run);
  const auto data = open_dataset(o, kb, run);
  const Loaded l = open_checkpoint(o, sub, kb, run);
  run.open(o.out, o.seed);
  run.config({{"threshold", l.threshold}, {"split", o.split}, {"jobs", o.jobs}});
  const auto qs = split_of(data, o.split);
  const auto cands = build_candidates(kb, qs, o.jobs, l.max_hops);
  const Metrics m = evaluate(l.model, kb, qs, cands, l.threshold, o.jobs);
  json out = to_json(m);
  out["split"] = o.split;
  run.write_output("metrics.json", dump(out));
  const std::string table = metrics_table(o.split, m);
  run.write_output("metrics.txt", table);
  std::cout << table;
  run.finish();
  return 0;
}

int cmd_ablate(const Options& o, const CLI::App& sub, Run& run) {
  const TrainConfig config = effective_config(o, sub, run);
  const KnowledgeBase kb = open_kb(o, run);
  const auto data = open_dataset(o, kb, run);
  std::vector<AspectSet> subsets;
  std::stringstream ss(o.subsets);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    try {
      subsets.push_back(parse_aspects(item));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (subsets.empty()) throw ConfigError("--subsets names no aspect subset");
  run.open(o.out, config.seed);
  const auto rows = ablate(data, kb, config, subsets);
  run.write_output("ablation.json", dump(to_json(rows)));
  const std::string table = ablation_table(rows, config.model.kind);
  run.write_output("ablation.txt", table);
  std::cout << table;
  run.finish();
  return 0;
}

int cmd_attn_export(const Options& o, const CLI::App& sub, Run& run) {
  const KnowledgeBase kb = open_kb(o, run);
  const auto data = open_dataset(o, kb, run);
  const Loaded l = open_checkpoint(o, sub, kb, run);
  if (l.model.config().kind != ModelKind::kAar) {
    throw ValidationError("attention export needs an AAR checkpoint");
  }
  run.open(o.out, o.seed);
  auto qs = split_of(data, o.split);
  if (o.limit > 0 && qs.size() > static_cast<std::size_t>(o.limit)) qs.resize(o.limit);
  const auto cands = build_candidates(kb, qs, o.jobs, l.max_hops);

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "question_id,aspect,token_index,token,value\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  ad::NoGradGuard no_grad;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const QAInstance& q = *qs[i];
    if (cands[i].candidates.empty()) continue;
    const auto scores = l.model.score_all(kb, q, cands[i]);
    const Prediction p = predict_from_scores(cands[i], scores, l.threshold);
    // Entry that produced the best score.
    std::size_t best = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (cands[i].candidates[k].entity == *p.best && scores[k] == p.best_score) {
        best = k;
        break;
      }
    }
    const QuestionState state = l.model.prepare(q);
    const ScoreBreakdown b =
        to_breakdown(l.model.score(state, l.model.features(kb, cands[i].candidates[best])));
    for (Aspect a : kAllAspects) {
      const auto ai = static_cast<std::size_t>(a);
      if (!b.active[ai]) continue;
      for (std::size_t t = 0; t < b.alpha[ai].size(); ++t) {
        csv << q.id << ',' << to_string(a) << ',' << t << ','
            << quote(q.tokens[t]) << ',' << b.alpha[ai][t] << '\n';
      }
      csv << q.id << ',' << to_string(a) << ",-1,ASPW," << b.weight[ai]
          << '\n';
    }
  }
  run.write_output("attention.csv", csv.str());
  run.finish();
  std::cout << run.path("attention.csv").string() << "\n";
  return 0;
}

}  // namespace
}  // namespace aarqa

int main(int argc, char** argv) {
  using namespace aarqa;
  CLI::App app{"Aspect-attention ranking for knowledge base question answering"};
  app.require_subcommand(1);
  Options o;

  auto add_data = [&](CLI::App* s) {
    s->add_option("--kb", o.kb, "Triple file");
    s->add_option("--dataset", o.dataset, "QA dataset (JSON lines)");
    s->add_option("--out", o.out, "Output directory (default runs/<time>_seed<seed>)");
    s->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    s->add_option("--seed", o.seed, "Random seed");
  };
  auto add_train = [&](CLI::App* s) {
    s->add_option("--config", o.config, "Training config JSON");
    s->add_option("--gamma", o.gamma, "Hinge margin and inference threshold");
    s->add_option("--epochs", o.epochs, "Training epochs");
    s->add_option("--lr", o.lr, "Learning rate");
    s->add_option("--aspects", o.aspects, "Active aspects, e.g. type+path or full");
    s->add_option("--model", o.model, "aar or sgemb");
    s->add_option("--dim", o.dim, "Embedding size");
    s->add_option("--batch-size", o.batch_size, "Training pairs per step");
    s->add_option("--init", o.init, "Parameter init: uniform or torch");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic KB and QA dataset");
  synth->add_option("--profile", o.profile, "Profile JSON or desk|medications[@scale]");
  synth->add_option("--templates", o.templates, "Template JSON (default: built-in set)");
  synth->add_option("--seed", o.seed, "Random seed");
  synth->add_option("--out", o.out, "Output directory");

  auto* cands = app.add_subcommand("candidates", "Dump candidate answers per question");
  add_data(cands);
  cands->add_option("--split", o.split, "train|dev|test|all");

  auto* tr = app.add_subcommand("train", "Train a ranker and save the best dev checkpoint");
  add_data(tr);
  add_train(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_data(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint manifest (model.json)");
  ev->add_option("--split", o.split, "train|dev|test");
  ev->add_option("--gamma", o.gamma, "Inference threshold (default: from checkpoint)");

  auto* ab = app.add_subcommand("ablate", "Train and test one model per aspect subset");
  add_data(ab);
  add_train(ab);
  o.subsets = "full,entity+context,type,path,type+path";
  ab->add_option("--subsets", o.subsets, "Comma-separated aspect subsets");

  auto* at = app.add_subcommand("attn-export", "Export attention weights as CSV");
  add_data(at);
  at->add_option("--checkpoint", o.checkpoint, "Checkpoint manifest (model.json)");
  at->add_option("--split", o.split, "train|dev|test");
  at->add_option("--gamma", o.gamma, "Inference threshold");
  at->add_option("--limit", o.limit, "Export at most this many questions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code("usage");
  }

  std::vector<std::string> args(argv, argv + argc);
  CLI::App* sub = app.get_subcommands().front();
  Run run(sub->get_name(), args);
  try {
    if (sub == synth) return cmd_synth(o, run);
    if (sub == cands) return cmd_candidates(o, run);
    if (sub == tr) return cmd_train(o, *sub, run);
    if (sub == ev) return cmd_eval(o, *sub, run);
    if (sub == ab) return cmd_ablate(o, *sub, run);
    if (sub == at) return cmd_attn_export(o, *sub, run);
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
