// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0
//
// worldkit command line: corpus generation, pretraining, training,
// evaluation, ablation sweeps, graph diffing, statistics, verification.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numeric failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "worldkit/ablate.hpp"
#include "worldkit/beam.hpp"
#include "worldkit/data.hpp"
#include "worldkit/eval.hpp"
#include "worldkit/kg.hpp"
#include "worldkit/metrics.hpp"
#include "worldkit/model.hpp"
#include "worldkit/train.hpp"
#include "worldkit/worldgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace worldkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int env_threads() {
  const char* v = std::getenv("WORLDKIT_THREADS");
  if (!v) return 1;
  int n = std::atoi(v);
  return n > 0 ? n : 1;
}

json load_config_file(const std::string& path, const std::vector<std::string>& allowed) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw std::invalid_argument("config file is not valid JSON: " + path);
  for (const auto& [key, value] : j.items()) {
    if (key == "format_version") continue;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("unknown config key '" + key + "' in " + path);
    }
  }
  return j;
}

void write_resolved_config(const std::string& out_dir, const std::string& command, json resolved) {
  resolved["format_version"] = 1;
  resolved["command"] = command;
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "resolved_config.json");
  out << resolved.dump(2) << "\n";
}

model::ModelConfig preset_config(const std::string& name) {
  if (name == "tiny") return model::ModelConfig::tiny();
  if (name == "desk") return model::ModelConfig::desk();
  if (name == "paper") return model::ModelConfig::paper_scale();
  throw std::invalid_argument("unknown model preset: " + name);
}

// shared model-mode flags
struct ModeFlags {
  std::string preset = "desk";
  std::string loss = "sos";
  std::string target = "diff";
  std::string multitask = "on";
  std::string task = "graph";  // single-task side when multitask is off
  std::uint64_t seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "model size preset (tiny|desk|paper)");
    cmd->add_option("--loss", loss, "loss mode (sos|seq)");
    cmd->add_option("--target", target, "graph target mode (diff|full|add-del)");
    cmd->add_option("--multitask", multitask, "train both decoders (on|off)");
    cmd->add_option("--task", task, "single-task side when multitask is off (graph|action)");
    cmd->add_option("--seed", seed, "run seed");
  }

  model::ModelConfig resolve(const json& file_cfg) const {
    model::ModelConfig cfg;
    if (file_cfg.contains("model")) {
      cfg = model::ModelConfig::from_json_string(file_cfg.at("model").dump());
    } else {
      cfg = preset_config(preset);
    }
    cfg.loss_mode = model::parse_loss_mode(loss);
    cfg.target_mode = model::parse_target_mode(target);
    if (multitask == "on") {
      cfg.task = model::TaskMode::Both;
    } else if (multitask == "off") {
      cfg.task = task == "action" ? model::TaskMode::ActionOnly : model::TaskMode::GraphOnly;
    } else {
      throw std::invalid_argument("--multitask must be on or off");
    }
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

std::vector<kg::Triple> load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read graph file: " + path);
  json j = json::parse(in);
  if (j.is_object() && j.contains("graph")) j = j.at("graph");
  if (!j.is_array()) throw std::runtime_error("graph file must hold an array of triples: " + path);
  std::vector<kg::Triple> out;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 3) {
      throw std::runtime_error("triple without exactly 3 components in " + path);
    }
    out.emplace_back(item[0].get<std::string>(), item[1].get<std::string>(),
                     item[2].get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// gen-world
// ---------------------------------------------------------------------------

int cmd_gen_world(const std::string& config_path, std::string out_dir, std::uint64_t seed,
                  int worlds, int rooms, int objects, int attr_objects, int samples,
                  std::string policy_name) {
  if (!config_path.empty()) {
    json cfg = load_config_file(config_path, {"out", "seed", "worlds", "rooms", "objects",
                                              "attr_objects", "samples", "policy"});
    if (cfg.contains("out")) out_dir = cfg.at("out").get<std::string>();
    if (cfg.contains("seed")) seed = cfg.at("seed").get<std::uint64_t>();
    if (cfg.contains("worlds")) worlds = cfg.at("worlds").get<int>();
    if (cfg.contains("rooms")) rooms = cfg.at("rooms").get<int>();
    if (cfg.contains("objects")) objects = cfg.at("objects").get<int>();
    if (cfg.contains("attr_objects")) attr_objects = cfg.at("attr_objects").get<int>();
    if (cfg.contains("samples")) samples = cfg.at("samples").get<int>();
    if (cfg.contains("policy")) policy_name = cfg.at("policy").get<std::string>();
  }
  if (out_dir.empty()) throw std::invalid_argument("--out is required");
  gen::Policy policy;
  if (policy_name == "random") policy = gen::Policy::Random;
  else if (policy_name == "coverage") policy = gen::Policy::CoverageWalk;
  else throw std::invalid_argument("--policy must be random or coverage");

  std::vector<data::StateSample> corpus;
  int per_world = std::max(1, samples / std::max(1, worlds));
  for (int w = 0; w < worlds; ++w) {
    gen::WorldSpec spec = gen::generate_world(seed + w, rooms, objects, attr_objects);
    auto part = gen::emit_corpus(spec, policy, per_world, seed + 1000 + w,
                                 "synth-" + std::to_string(w));
    for (auto& s : part) corpus.push_back(std::move(s));
  }

  fs::create_directories(out_dir);
  std::string corpus_path = (fs::path(out_dir) / "corpus.jsonl").string();
  data::save_corpus(corpus, corpus_path);

  data::CorpusStats stats = data::compute_stats(corpus);
  std::cout << data::render_stats(stats);
  {
    json jstats;
    jstats["format_version"] = 1;
    jstats["kind"] = "corpus-stats";
    json games = json::array();
    auto game_json = [](const std::string& name, const data::GameStats& g) {
      return json{{"game", name},
                  {"samples", g.samples},
                  {"input_vocab", g.input_vocab},
                  {"avg_obs_tokens", g.avg_obs_tokens},
                  {"avg_valid_actions", g.avg_valid_actions},
                  {"avg_graph_triples", g.avg_graph_triples},
                  {"avg_diff_triples", g.avg_diff_triples},
                  {"avg_diff_target_tokens", g.avg_diff_target_tokens},
                  {"avg_graph_target_tokens", g.avg_graph_target_tokens}};
    };
    for (const auto& [name, g] : stats.per_game) games.push_back(game_json(name, g));
    jstats["per_game"] = games;
    jstats["overall"] = game_json("overall", stats.overall);
    std::ofstream out(fs::path(out_dir) / "stats.json");
    out << jstats.dump(2) << "\n";
  }
  write_resolved_config(out_dir, "gen-world",
                        json{{"out", out_dir},
                             {"seed", seed},
                             {"worlds", worlds},
                             {"rooms", rooms},
                             {"objects", objects},
                             {"attr_objects", attr_objects},
                             {"samples", samples},
                             {"policy", policy_name}});
  std::cout << "wrote " << corpus.size() << " samples to " << corpus_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int cmd_stats(const std::string& corpus_path) {
  auto [samples, report] = data::load_corpus(corpus_path);
  if (report.skipped > 0) {
    std::cerr << "skipped " << report.skipped << " of " << report.total << " records\n";
    for (const auto& issue : report.issues) std::cerr << "  " << issue << "\n";
  }
  std::cout << data::render_stats(data::compute_stats(samples));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

int cmd_pretrain(const std::string& config_path, std::string corpus_path, std::string out_dir,
                 ModeFlags& mode, std::string scheme, std::int64_t steps, int text_vocab_cap) {
  json file_cfg;
  if (!config_path.empty()) {
    file_cfg = load_config_file(
        config_path, {"corpus", "out", "scheme", "steps", "model", "text_vocab_cap"});
    if (file_cfg.contains("corpus")) corpus_path = file_cfg.at("corpus").get<std::string>();
    if (file_cfg.contains("out")) out_dir = file_cfg.at("out").get<std::string>();
    if (file_cfg.contains("scheme")) scheme = file_cfg.at("scheme").get<std::string>();
    if (file_cfg.contains("steps")) steps = file_cfg.at("steps").get<std::int64_t>();
    if (file_cfg.contains("text_vocab_cap")) text_vocab_cap = file_cfg.at("text_vocab_cap").get<int>();
  }
  if (corpus_path.empty()) throw std::invalid_argument("--corpus is required");
  if (out_dir.empty()) throw std::invalid_argument("--out is required");
  if (scheme != "text" && scheme != "graph" && scheme != "both") {
    throw std::invalid_argument("--scheme must be text, graph or both");
  }

  auto [samples, report] = data::load_corpus(corpus_path);
  model::ModelConfig cfg = mode.resolve(file_cfg);
  model::WorldModel m(cfg, data::build_text_vocab(samples, text_vocab_cap),
                      data::build_graph_vocab(samples), data::build_action_vocab(samples));

  nn::Rng rng(cfg.seed ^ 0x9e3779b9ull);
  auto run_scheme = [&](train::PretrainScheme s, const char* name) {
    std::vector<nn::Param*> params;
    (s == train::PretrainScheme::TextMlm ? m.text_encoder() : m.graph_encoder()).collect(params);
    train::Adam opt(params, train::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    for (std::int64_t step = 0; step < steps; ++step) {
      std::vector<const data::StateSample*> batch;
      for (int i = 0; i < cfg.batch_size; ++i) {
        batch.push_back(&samples[rng.uniform_int(static_cast<int>(samples.size()))]);
      }
      auto res = train::pretrain_step(m, opt, s, batch, rng);
      if (step % 50 == 0 || step + 1 == steps) {
        std::cout << name << " step " << step << " loss " << res.loss << " masked-acc "
                  << res.masked_accuracy << "\n";
      }
    }
  };

  if (scheme == "text" || scheme == "both") run_scheme(train::PretrainScheme::TextMlm, "text-mlm");
  if (scheme == "graph" || scheme == "both") run_scheme(train::PretrainScheme::GraphMlm, "graph-mlm");

  fs::create_directories(out_dir);
  std::string ckpt = (fs::path(out_dir) / "encoders.ckpt").string();
  m.save(ckpt);
  write_resolved_config(out_dir, "pretrain",
                        json{{"corpus", corpus_path},
                             {"out", out_dir},
                             {"scheme", scheme},
                             {"steps", steps},
                             {"text_vocab_cap", text_vocab_cap},
                             {"model", json::parse(cfg.to_json_string())}});
  std::cout << "saved " << ckpt << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, std::string corpus_path, std::string out_dir,
              ModeFlags& mode, std::string init_from, int epochs, int patience,
              std::int64_t steps, double budget, double val_fraction, int text_vocab_cap) {
  json file_cfg;
  if (!config_path.empty()) {
    file_cfg = load_config_file(config_path,
                                {"corpus", "out", "init_from", "epochs", "patience", "steps",
                                 "budget", "val_fraction", "model", "text_vocab_cap"});
    if (file_cfg.contains("corpus")) corpus_path = file_cfg.at("corpus").get<std::string>();
    if (file_cfg.contains("out")) out_dir = file_cfg.at("out").get<std::string>();
    if (file_cfg.contains("init_from")) init_from = file_cfg.at("init_from").get<std::string>();
    if (file_cfg.contains("epochs")) epochs = file_cfg.at("epochs").get<int>();
    if (file_cfg.contains("patience")) patience = file_cfg.at("patience").get<int>();
    if (file_cfg.contains("steps")) steps = file_cfg.at("steps").get<std::int64_t>();
    if (file_cfg.contains("budget")) budget = file_cfg.at("budget").get<double>();
    if (file_cfg.contains("val_fraction")) val_fraction = file_cfg.at("val_fraction").get<double>();
    if (file_cfg.contains("text_vocab_cap")) text_vocab_cap = file_cfg.at("text_vocab_cap").get<int>();
  }
  if (corpus_path.empty()) throw std::invalid_argument("--corpus is required");
  if (out_dir.empty()) throw std::invalid_argument("--out is required");

  auto [samples, report] = data::load_corpus(corpus_path);
  if (report.skipped > 0) {
    std::cerr << "skipped " << report.skipped << " malformed records\n";
  }

  model::ModelConfig cfg = mode.resolve(file_cfg);
  std::optional<model::WorldModel> m;
  if (!init_from.empty()) {
    m.emplace(model::WorldModel::load(init_from));
    // keep the pretrained weights and vocabularies; adopt the requested modes
    m->mutable_config().loss_mode = cfg.loss_mode;
    m->mutable_config().target_mode = cfg.target_mode;
    m->mutable_config().task = cfg.task;
    m->mutable_config().seed = cfg.seed;
    cfg = m->config();
  } else {
    m.emplace(cfg, data::build_text_vocab(samples, text_vocab_cap),
              data::build_graph_vocab(samples), data::build_action_vocab(samples));
  }

  auto [train_set, val_set] = data::split_train_val(samples, val_fraction, cfg.seed);
  fs::create_directories(out_dir);
  train::TrainOptions topts;
  topts.max_epochs = epochs;
  topts.patience = patience;
  topts.max_steps = steps;
  topts.max_seconds = budget;
  topts.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  topts.checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();
  topts.verbose = true;

  train::TrainSummary summary = train::fit(*m, train_set, val_set, topts);

  write_resolved_config(out_dir, "train",
                        json{{"corpus", corpus_path},
                             {"out", out_dir},
                             {"init_from", init_from},
                             {"epochs", epochs},
                             {"patience", patience},
                             {"steps", steps},
                             {"budget", budget},
                             {"val_fraction", val_fraction},
                             {"text_vocab_cap", text_vocab_cap},
                             {"model", json::parse(cfg.to_json_string())}});
  {
    json js{{"format_version", 1},
            {"kind", "train-summary"},
            {"steps", summary.steps},
            {"epochs", summary.epochs},
            {"best_val_loss", summary.best_val_loss},
            {"early_stopped", summary.early_stopped},
            {"parameters", m->parameter_count()}};
    std::ofstream out(fs::path(out_dir) / "summary.json");
    out << js.dump(2) << "\n";
  }
  std::cout << "trained " << summary.steps << " steps over " << summary.epochs
            << " epochs; best val loss " << summary.best_val_loss
            << (summary.early_stopped ? " (early stop)" : "") << "\n";
  std::cout << "parameters: " << m->parameter_count() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& config_path, std::string ckpt_path, std::string corpus_path,
             std::string out_dir, int beam_width, int max_samples) {
  if (!config_path.empty()) {
    json cfg = load_config_file(config_path,
                                {"ckpt", "corpus", "out", "beam_width", "max_samples"});
    if (cfg.contains("ckpt")) ckpt_path = cfg.at("ckpt").get<std::string>();
    if (cfg.contains("corpus")) corpus_path = cfg.at("corpus").get<std::string>();
    if (cfg.contains("out")) out_dir = cfg.at("out").get<std::string>();
    if (cfg.contains("beam_width")) beam_width = cfg.at("beam_width").get<int>();
    if (cfg.contains("max_samples")) max_samples = cfg.at("max_samples").get<int>();
  }
  if (ckpt_path.empty() || corpus_path.empty()) {
    throw std::invalid_argument("--ckpt and --corpus are required");
  }

  model::WorldModel m = model::WorldModel::load(ckpt_path);
  auto [samples, load_report] = data::load_corpus(corpus_path);

  // a corpus whose graphs share nothing with the checkpoint vocabulary is a
  // mismatch, not a scoring run
  long known = 0, total = 0;
  for (const auto& s : samples) {
    for (const auto& t : s.prev.graph) {
      total += 3;
      known += (m.graph_vocab().contains(t.subject) ? 1 : 0) +
               (m.graph_vocab().contains(t.relation) ? 1 : 0) +
               (m.graph_vocab().contains(t.object) ? 1 : 0);
    }
  }
  if (total > 0 && known == 0) {
    throw std::runtime_error("vocabulary mismatch: corpus shares no graph tokens with checkpoint");
  }

  eval::EvalOptions opts;
  opts.beam_width = beam_width > 0 ? beam_width : m.config().beam_width;
  opts.max_samples = max_samples;
  opts.threads = env_threads();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    opts.predictions_path = (fs::path(out_dir) / "predictions.jsonl").string();
  }

  metrics::ScoreReport report = eval::evaluate(m, samples, opts);
  std::string table = metrics::render_table(report);
  std::cout << table;

  if (!out_dir.empty()) {
    std::ofstream txt(fs::path(out_dir) / "report.txt");
    txt << table;
    json jreport{{"format_version", 1}, {"kind", "score-report"}};
    json rows = json::array();
    auto row_json = [](const metrics::GameRow& r) {
      return json{{"game", r.game}, {"samples", r.samples}, {"values", r.values}};
    };
    for (const auto& r : report.per_game) rows.push_back(row_json(r));
    jreport["per_game"] = rows;
    jreport["overall"] = row_json(report.overall);
    std::ofstream jout(fs::path(out_dir) / "report.json");
    jout << jreport.dump(2) << "\n";
    write_resolved_config(out_dir, "eval",
                          json{{"ckpt", ckpt_path},
                               {"corpus", corpus_path},
                               {"out", out_dir},
                               {"beam_width", opts.beam_width},
                               {"max_samples", max_samples}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

int cmd_ablate(const std::string& config_path, std::string out_dir, int seeds,
               std::int64_t steps, double budget, int beam_width, int eval_samples,
               std::string side, ablate::BenchmarkSpec bench_spec, std::string preset,
               int batch_size, double learning_rate) {
  if (!config_path.empty()) {
    json cfg = load_config_file(
        config_path, {"out", "seeds", "steps", "budget", "beam_width", "eval_samples", "side",
                      "worlds", "train_worlds", "rooms", "objects", "attr_objects",
                      "samples_per_world", "bench_seed", "preset"});
    if (cfg.contains("out")) out_dir = cfg.at("out").get<std::string>();
    if (cfg.contains("seeds")) seeds = cfg.at("seeds").get<int>();
    if (cfg.contains("steps")) steps = cfg.at("steps").get<std::int64_t>();
    if (cfg.contains("budget")) budget = cfg.at("budget").get<double>();
    if (cfg.contains("beam_width")) beam_width = cfg.at("beam_width").get<int>();
    if (cfg.contains("eval_samples")) eval_samples = cfg.at("eval_samples").get<int>();
    if (cfg.contains("side")) side = cfg.at("side").get<std::string>();
    if (cfg.contains("worlds")) bench_spec.worlds = cfg.at("worlds").get<int>();
    if (cfg.contains("train_worlds")) bench_spec.train_worlds = cfg.at("train_worlds").get<int>();
    if (cfg.contains("rooms")) bench_spec.rooms = cfg.at("rooms").get<int>();
    if (cfg.contains("objects")) bench_spec.objects = cfg.at("objects").get<int>();
    if (cfg.contains("attr_objects")) bench_spec.attr_objects = cfg.at("attr_objects").get<int>();
    if (cfg.contains("samples_per_world"))
      bench_spec.samples_per_world = cfg.at("samples_per_world").get<int>();
    if (cfg.contains("bench_seed")) bench_spec.seed = cfg.at("bench_seed").get<std::uint64_t>();
    if (cfg.contains("preset")) preset = cfg.at("preset").get<std::string>();
  }
  if (out_dir.empty()) throw std::invalid_argument("--out is required");
  if (side != "graph" && side != "action" && side != "both") {
    throw std::invalid_argument("--side must be graph, action or both");
  }

  ablate::Benchmark bench = ablate::build_benchmark(bench_spec);
  std::cout << "benchmark: " << bench.train_set.size() << " train / " << bench.test_set.size()
            << " test samples\n";

  ablate::Options opts;
  opts.base = preset_config(preset);
  opts.base.dropout = 0.0;
  opts.base.batch_size = batch_size;
  opts.base.learning_rate = learning_rate;
  opts.seeds.clear();
  for (int s = 1; s <= seeds; ++s) opts.seeds.push_back(static_cast<std::uint64_t>(s));
  opts.train_steps = steps;
  opts.budget_seconds = budget;
  opts.beam_width = beam_width;
  opts.eval_samples = eval_samples;
  opts.threads = env_threads();
  opts.verbose = true;

  ablate::Report report;
  if (side == "graph" || side == "both") {
    auto g = ablate::run_graph_grid(bench, opts);
    report.graph_rows = std::move(g.graph_rows);
  }
  if (side == "action" || side == "both") {
    auto a = ablate::run_action_grid(bench, opts);
    report.action_rows = std::move(a.action_rows);
  }

  std::string table = ablate::render_report(report);
  std::cout << table;

  fs::create_directories(out_dir);
  {
    std::ofstream txt(fs::path(out_dir) / "ablation.txt");
    txt << table;
    json j{{"format_version", 1}, {"kind", "ablation-report"}};
    auto rows_json = [](const std::vector<ablate::RowResult>& rows) {
      json out = json::array();
      for (const auto& r : rows) {
        json runs = json::array();
        for (const auto& run : r.runs) {
          runs.push_back(json{{"seed", run.seed},
                              {"graph_em", run.graph_em},
                              {"graph_f1", run.graph_f1},
                              {"token_em", run.token_em},
                              {"token_f1", run.token_f1},
                              {"diff_em", run.diff_em},
                              {"diff_f1", run.diff_f1},
                              {"action_em", run.action_em},
                              {"action_f1", run.action_f1}});
        }
        out.push_back(json{{"label", r.label},
                           {"is_full", r.is_full},
                           {"is_none", r.is_none},
                           {"runs", runs}});
      }
      return out;
    };
    j["graph_rows"] = rows_json(report.graph_rows);
    j["action_rows"] = rows_json(report.action_rows);
    std::ofstream jout(fs::path(out_dir) / "ablation.json");
    jout << j.dump(2) << "\n";
  }
  write_resolved_config(out_dir, "ablate",
                        json{{"out", out_dir},
                             {"seeds", seeds},
                             {"steps", steps},
                             {"budget", budget},
                             {"beam_width", beam_width},
                             {"eval_samples", eval_samples},
                             {"side", side},
                             {"worlds", bench_spec.worlds},
                             {"train_worlds", bench_spec.train_worlds},
                             {"rooms", bench_spec.rooms},
                             {"objects", bench_spec.objects},
                             {"attr_objects", bench_spec.attr_objects},
                             {"samples_per_world", bench_spec.samples_per_world},
                             {"bench_seed", bench_spec.seed},
                             {"preset", preset}});

  // ordering summary over seeds: the full row versus everything else
  if (!report.graph_rows.empty()) {
    const ablate::RowResult* full = nullptr;
    const ablate::RowResult* none = nullptr;
    for (const auto& r : report.graph_rows) {
      if (r.is_full) full = &r;
      if (r.is_none) none = &r;
    }
    if (full && none) {
      double gap =
          full->mean(&ablate::RunScore::graph_em) - none->mean(&ablate::RunScore::graph_em);
      std::cout << "full-vs-none graph EM gap: " << gap << "\n";
      for (const auto& r : report.graph_rows) {
        if (r.is_full || r.is_none) continue;
        int wins = 0;
        for (std::size_t s = 0; s < r.runs.size(); ++s) {
          if (full->runs[s].graph_em >= r.runs[s].graph_em) ++wins;
        }
        std::cout << "full beats " << r.label << " on " << wins << "/" << r.runs.size()
                  << " seeds\n";
      }
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diff
// ---------------------------------------------------------------------------

int cmd_diff(const std::string& path_a, const std::string& path_b) {
  kg::KnowledgeGraph a{load_graph_file(path_a)};
  kg::KnowledgeGraph b{load_graph_file(path_b)};
  kg::GraphDiff d = kg::diff(a, b);
  for (const auto& t : d.additions) std::cout << "+ " << t.key() << "\n";
  for (const auto& t : d.deletions) std::cout << "- " << t.key() << "\n";
  std::cout << d.additions.size() << " additions, " << d.deletions.size() << " deletions\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(std::uint64_t seed) {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
  };

  // diff round-trip + exact deletion inference over fresh synthetic corpora
  {
    bool round_trip = true;
    bool inference = true;
    auto lex = kg::ContradictionLexicon::defaults();
    auto cls = kg::RelationClassifier::defaults();
    for (std::uint64_t w = 0; w < 5; ++w) {
      gen::WorldSpec spec = gen::generate_world(seed + w, 4, 6, 3);
      auto corpus = gen::emit_corpus(spec, gen::Policy::CoverageWalk, 80, seed + w);
      for (const auto& s : corpus) {
        kg::GraphDiff d = kg::diff(s.prev.graph, s.next.graph);
        round_trip &= kg::apply_diff(s.prev.graph, d) == s.next.graph;
        inference &= kg::infer_deletions(s.prev.graph, d.additions, lex, cls) == d.deletions;
      }
    }
    check("graph diff round-trip", round_trip);
    check("rule-based deletion inference", inference);
  }

  // model battery on a tiny fixture
  gen::WorldSpec spec = gen::generate_world(seed, 4, 6, 3);
  auto corpus = gen::emit_corpus(spec, gen::Policy::CoverageWalk, 50, seed + 1);
  model::ModelConfig cfg = model::ModelConfig::tiny();
  cfg.seed = seed;
  model::WorldModel m(cfg, data::build_text_vocab(corpus, 0), data::build_graph_vocab(corpus),
                      data::build_action_vocab(corpus));

  // block-mask independence + mutation check
  {
    const data::StateSample* sample = nullptr;
    for (const auto& s : corpus) {
      if (kg::diff(s.prev.graph, s.next.graph).additions.size() >= 2) {
        sample = &s;
        break;
      }
    }
    bool independent = false, mutation_detected = false;
    if (sample) {
      auto target = m.graph_target(*sample);
      auto mutate = [&](codec::SetSerialization t) {
        const auto& span = t.layout.spans[0];
        int content = m.graph_vocab().size() - codec::kNumReserved;
        for (int j = 0; j < span.length; ++j) {
          int& tok = t.token_ids[span.start + j];
          tok = codec::kNumReserved + (tok - codec::kNumReserved + 1) % content;
        }
        return t;
      };
      auto mutated = mutate(target);
      beam::EncodedState enc = beam::encode_state(m, sample->prev, sample->action);
      auto leak_between = [&](bool broken) {
        model::RowPlan p1 = model::sos_decoder_plan(target);
        model::RowPlan p2 = model::sos_decoder_plan(mutated);
        if (broken) {
          p1.mask = codec::MaskSpec::causal(p1.rows());
          p2.mask = codec::MaskSpec::causal(p2.rows());
        }
        auto base = beam::decoder_logits(m, model::WorldModel::DecoderKind::Graph, enc, p1);
        auto pert = beam::decoder_logits(m, model::WorldModel::DecoderKind::Graph, enc, p2);
        double leak = 0.0;
        for (std::size_t e = 1; e < p1.element_rows.size(); ++e) {
          for (int r : p1.element_rows[e]) {
            for (int c = 0; c < base.cols; ++c) {
              leak = std::max(leak, std::abs(base.at(r, c) - pert.at(r, c)));
            }
          }
        }
        return leak;
      };
      independent = leak_between(false) == 0.0;
      mutation_detected = leak_between(true) > 0.0;
    }
    check("set-mask independence", independent);
    check("broken mask fails the independence check", mutation_detected);
  }

  // permutation invariance + single-element reduction
  {
    bool invariant = true, reduction = true;
    nn::Rng rng(seed + 7);
    int done = 0;
    for (const auto& s : corpus) {
      auto target = m.graph_target(s);
      if (target.layout.elements() < 2) continue;
      auto shuffled = codec::shuffle_elements(target, rng.next_u64());
      beam::EncodedState enc = beam::encode_state(m, s.prev, s.action);
      model::RowPlan p1 = model::sos_decoder_plan(target);
      model::RowPlan p2 = model::sos_decoder_plan(shuffled);
      auto l1 = beam::decoder_logits(m, model::WorldModel::DecoderKind::Graph, enc, p1);
      auto l2 = beam::decoder_logits(m, model::WorldModel::DecoderKind::Graph, enc, p2);
      double a = model::loss_sos(l1, p1, nn::Reduction::Mean);
      double b = model::loss_sos(l2, p2, nn::Reduction::Mean);
      invariant &= std::abs(a - b) / std::max(std::abs(a), 1e-300) < 1e-6;
      if (++done >= 5) break;
    }
    for (int it = 0; it < 10; ++it) {
      int content = m.graph_vocab().size() - codec::kNumReserved;
      auto id = [&] { return codec::kNumReserved + rng.uniform_int(content); };
      auto target = codec::assemble_serialization({{id(), id(), id()}});
      model::RowPlan plan = model::sos_decoder_plan(target);
      nn::Matrix logits(plan.rows(), m.graph_vocab().size());
      for (double& x : logits.data) x = rng.normal(0.0, 2.0);
      reduction &=
          std::abs(model::loss_sos(logits, plan, nn::Reduction::Mean) -
                   model::loss_seq(logits, target.token_ids, nn::Reduction::Mean)) < 1e-10;
    }
    check("set-loss permutation invariance", invariant);
    check("single-element reduction to seq loss", reduction);
  }

  // gradient check
  {
    auto report = model::gradient_check(m, corpus[0], 25, 1e-5, seed + 9);
    check("analytic gradients match finite differences", report.max_rel_err < 1e-4);
  }

  // metric oracle specifics
  {
    auto s1 = metrics::graph_em_f1({kg::Triple("a", "in", "x"), kg::Triple("b", "in", "x")},
                                   {kg::Triple("b", "in", "x"), kg::Triple("c", "in", "x")});
    bool metrics_ok = std::abs(s1.em - 50.0) < 1e-9 && std::abs(s1.f1 - 50.0) < 1e-9;
    auto both_empty = metrics::graph_em_f1({}, {});
    metrics_ok &= both_empty.em == 100.0 && both_empty.f1 == 100.0;
    metrics::GameRow ga{"a", 1, {{"em", 0.0}}};
    metrics::GameRow gb{"b", 3, {{"em", 100.0}}};
    metrics_ok &=
        std::abs(metrics::aggregate_weighted({ga, gb}).overall.values.at("em") - 75.0) < 1e-9;
    check("metric oracle", metrics_ok);
  }

  // beam width 1 equals greedy
  {
    bool equal = true;
    for (int i = 0; i < 5; ++i) {
      beam::EncodedState enc = beam::encode_state(m, corpus[i].prev, corpus[i].action);
      auto beam1 = beam::generate(m, model::WorldModel::DecoderKind::Graph, enc, 1);
      auto greedy = beam::generate_greedy(m, model::WorldModel::DecoderKind::Graph, enc);
      equal &= !beam1.hypotheses.empty() &&
               beam1.hypotheses[0].serialization == greedy.serialization;
    }
    check("beam width 1 equals greedy", equal);
  }

  // seeded determinism of a short training run
  {
    auto run = [&](double& checksum) {
      model::ModelConfig c2 = model::ModelConfig::tiny();
      c2.seed = seed;
      c2.batch_size = 4;
      model::WorldModel m2(c2, data::build_text_vocab(corpus, 0), data::build_graph_vocab(corpus),
                           data::build_action_vocab(corpus));
      train::Adam opt(m2.parameters(), train::AdamConfig{1e-3, 0.9, 0.999, 1e-8});
      nn::Rng rng(seed);
      for (int step = 0; step < 4; ++step) {
        std::vector<const data::StateSample*> batch;
        for (int i = 0; i < 4; ++i) batch.push_back(&corpus[(step * 4 + i) % corpus.size()]);
        train::train_step(m2, opt, batch, rng, true);
      }
      checksum = 0.0;
      for (nn::Param* p : m2.parameters()) {
        for (double x : p->value.data) checksum += x;
      }
    };
    double c1 = 0.0, c2 = 0.0;
    run(c1);
    run(c2);
    check("seeded training determinism", c1 == c2);
  }

  // directional diff statistic
  {
    auto stats = data::compute_stats(corpus);
    check("diff targets shorter than full-graph targets",
          stats.overall.avg_diff_target_tokens < stats.overall.avg_graph_target_tokens);
  }

  std::cout << (failures == 0 ? "verification passed" : "verification FAILED") << "\n";
  return failures == 0 ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"worldkit: knowledge-graph world models for text games"};
  app.require_subcommand(1);

  // gen-world
  auto* gen_cmd = app.add_subcommand("gen-world", "generate a synthetic corpus");
  std::string gw_config, gw_out, gw_policy = "coverage";
  std::uint64_t gw_seed = 1;
  int gw_worlds = 1, gw_rooms = 5, gw_objects = 8, gw_attr = 4, gw_samples = 500;
  gen_cmd->add_option("--config", gw_config, "JSON config file");
  gen_cmd->add_option("--out", gw_out, "output directory");
  gen_cmd->add_option("--seed", gw_seed, "generation seed");
  gen_cmd->add_option("--worlds", gw_worlds, "number of worlds (games)");
  gen_cmd->add_option("--rooms", gw_rooms, "rooms per world");
  gen_cmd->add_option("--objects", gw_objects, "objects per world");
  gen_cmd->add_option("--attr-objects", gw_attr, "objects carrying attributes");
  gen_cmd->add_option("--samples", gw_samples, "total samples across worlds");
  gen_cmd->add_option("--policy", gw_policy, "rollout policy (random|coverage)");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "corpus statistics");
  std::string st_corpus;
  stats_cmd->add_option("--corpus", st_corpus, "corpus file")->required();

  // pretrain
  auto* pre_cmd = app.add_subcommand("pretrain", "masked-language-model encoder pretraining");
  std::string pre_config, pre_corpus, pre_out, pre_scheme = "both";
  std::int64_t pre_steps = 200;
  int pre_vocab_cap = 0;
  ModeFlags pre_mode;
  pre_cmd->add_option("--config", pre_config, "JSON config file");
  pre_cmd->add_option("--corpus", pre_corpus, "corpus file");
  pre_cmd->add_option("--out", pre_out, "output directory");
  pre_cmd->add_option("--scheme", pre_scheme, "text|graph|both");
  pre_cmd->add_option("--steps", pre_steps, "pretraining steps per scheme");
  pre_cmd->add_option("--text-vocab-cap", pre_vocab_cap, "frequency cap for the text vocabulary");
  pre_mode.attach(pre_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the world model");
  std::string tr_config, tr_corpus, tr_out, tr_init;
  int tr_epochs = 100, tr_patience = 5, tr_vocab_cap = 0;
  std::int64_t tr_steps = 0;
  double tr_budget = 0.0, tr_val = 0.10;
  ModeFlags tr_mode;
  train_cmd->add_option("--config", tr_config, "JSON config file");
  train_cmd->add_option("--corpus", tr_corpus, "corpus file");
  train_cmd->add_option("--out", tr_out, "output directory");
  train_cmd->add_option("--init-from", tr_init, "checkpoint with pretrained encoders");
  train_cmd->add_option("--epochs", tr_epochs, "maximum epochs");
  train_cmd->add_option("--patience", tr_patience, "early-stop patience in epochs");
  train_cmd->add_option("--steps", tr_steps, "hard step cap (0 = none)");
  train_cmd->add_option("--budget", tr_budget, "wall-clock budget in seconds (0 = none)");
  train_cmd->add_option("--val-fraction", tr_val, "validation split fraction");
  train_cmd->add_option("--text-vocab-cap", tr_vocab_cap, "frequency cap for the text vocabulary");
  tr_mode.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_config, ev_ckpt, ev_corpus, ev_out;
  int ev_beam = 0, ev_max = 0;
  eval_cmd->add_option("--config", ev_config, "JSON config file");
  eval_cmd->add_option("--ckpt", ev_ckpt, "model checkpoint");
  eval_cmd->add_option("--corpus", ev_corpus, "test corpus");
  eval_cmd->add_option("--out", ev_out, "output directory");
  eval_cmd->add_option("--beam-width", ev_beam, "beam width (0 = checkpoint default)");
  eval_cmd->add_option("--max-samples", ev_max, "evaluate at most this many samples (0 = all)");

  // ablate
  auto* abl_cmd = app.add_subcommand("ablate", "component ablation sweep");
  std::string ab_config, ab_out, ab_side = "both", ab_preset = "tiny";
  int ab_seeds = 3, ab_beam = 3, ab_eval = 150, ab_batch = 8;
  double ab_lr = 2e-3;
  std::int64_t ab_steps = 400;
  double ab_budget = 0.0;
  ablate::BenchmarkSpec ab_bench;
  abl_cmd->add_option("--config", ab_config, "JSON config file");
  abl_cmd->add_option("--out", ab_out, "output directory");
  abl_cmd->add_option("--seeds", ab_seeds, "seeds per row");
  abl_cmd->add_option("--steps", ab_steps, "training steps per run");
  abl_cmd->add_option("--budget", ab_budget, "wall-clock budget per run in seconds");
  abl_cmd->add_option("--beam-width", ab_beam, "beam width for row evaluation");
  abl_cmd->add_option("--eval-samples", ab_eval, "test samples per row evaluation");
  abl_cmd->add_option("--side", ab_side, "graph|action|both");
  abl_cmd->add_option("--preset", ab_preset, "model preset for rows");
  abl_cmd->add_option("--batch-size", ab_batch, "training batch size for rows");
  abl_cmd->add_option("--lr", ab_lr, "learning rate for rows");
  abl_cmd->add_option("--worlds", ab_bench.worlds, "benchmark worlds");
  abl_cmd->add_option("--train-worlds", ab_bench.train_worlds, "worlds used for training");
  abl_cmd->add_option("--rooms", ab_bench.rooms, "rooms per world");
  abl_cmd->add_option("--objects", ab_bench.objects, "objects per world");
  abl_cmd->add_option("--attr-objects", ab_bench.attr_objects, "attribute objects per world");
  abl_cmd->add_option("--samples-per-world", ab_bench.samples_per_world, "samples per world");
  abl_cmd->add_option("--bench-seed", ab_bench.seed, "benchmark seed");

  // diff
  auto* diff_cmd = app.add_subcommand("diff", "diff two graph files");
  std::string df_a, df_b;
  diff_cmd->add_option("a", df_a, "graph file A")->required();
  diff_cmd->add_option("b", df_b, "graph file B")->required();

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "run the invariant battery");
  std::uint64_t vf_seed = 7;
  verify_cmd->add_option("--seed", vf_seed, "battery seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      return cmd_gen_world(gw_config, gw_out, gw_seed, gw_worlds, gw_rooms, gw_objects, gw_attr,
                           gw_samples, gw_policy);
    }
    if (stats_cmd->parsed()) return cmd_stats(st_corpus);
    if (pre_cmd->parsed()) {
      return cmd_pretrain(pre_config, pre_corpus, pre_out, pre_mode, pre_scheme, pre_steps,
                          pre_vocab_cap);
    }
    if (train_cmd->parsed()) {
      return cmd_train(tr_config, tr_corpus, tr_out, tr_mode, tr_init, tr_epochs, tr_patience,
                       tr_steps, tr_budget, tr_val, tr_vocab_cap);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(ev_config, ev_ckpt, ev_corpus, ev_out, ev_beam, ev_max);
    }
    if (abl_cmd->parsed()) {
      return cmd_ablate(ab_config, ab_out, ab_seeds, ab_steps, ab_budget, ab_beam, ab_eval,
                        ab_side, ab_bench, ab_preset, ab_batch, ab_lr);
    }
    if (diff_cmd->parsed()) return cmd_diff(df_a, df_b);
    if (verify_cmd->parsed()) return cmd_verify(vf_seed);
  } catch (const train::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
