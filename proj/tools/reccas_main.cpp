// Command-line front end: synthesize corpora, train models, evaluate the
// three metrics at the four conditioning levels, and forward-simulate
// cascades. Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "reccas/episode.hpp"
#include "reccas/errors.hpp"
#include "reccas/evaluation.hpp"
#include "reccas/generator.hpp"
#include "reccas/inference.hpp"
#include "reccas/model_io.hpp"
#include "reccas/models.hpp"
#include "reccas/rng.hpp"
#include "reccas/synth.hpp"

namespace {

using nlohmann::json;
using namespace reccas;

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream stream(csv);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string corpus;
  std::string out;
  SyntheticSpec spec;
  std::size_t val_episodes = 2000;
  std::size_t test_episodes = 2000;
};

int run_synth(const SynthArgs& args) {
  const Corpus corpus = corpus_from_name(args.corpus);
  std::filesystem::create_directories(args.out);
  const std::filesystem::path dir(args.out);

  const Graph graph = build_graph(args.spec);
  save_graph((dir / "graph.json").string(), graph, args.spec, corpus);

  struct Split {
    const char* name;
    std::size_t count;
    std::uint64_t salt;
  };
  const Split splits[] = {{"train", args.spec.episodes, 1},
                          {"val", args.val_episodes, 2},
                          {"test", args.test_episodes, 3}};
  for (const Split& split : splits) {
    if (split.count == 0) continue;
    SyntheticSpec part = args.spec;
    part.episodes = split.count;
    part.seed = mix_stream(args.spec.seed, 0x73706c6974ULL, split.salt);
    const CorpusResult result = sample_corpus(graph, part, corpus);

    std::vector<Episode> episodes;
    episodes.reserve(result.records.size());
    for (const GroundTruthRecord& rec : result.records) {
      episodes.push_back(rec.cascade.episode);
    }
    save_episodes((dir / (std::string(split.name) + ".jsonl")).string(),
                  episodes);
    save_ground_truth(
        (dir / (std::string(split.name) + "_gt.jsonl")).string(),
        result.records);
    std::cout << split.name << ": " << split.count
              << " episodes, mean length " << result.mean_length
              << ", truncated " << result.truncated << "\n";
  }
  std::cout << "corpus " << corpus_name(corpus) << " (" << args.spec.nodes
            << " nodes + world) -> " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
  std::string data;
  std::string val;
  std::string model_out;
  std::string resume;
  std::string family;
  std::string cell = "gru";
  std::string trace;
  int d = 50;
  int nodes = 0;  // node-id space incl. world; 0 = infer from the data
  TrainConfig config;
};

Model fresh_model(const std::string& family, int n, int d,
                  const std::string& cell, std::uint64_t seed) {
  switch (family_from_name(family)) {
    case Family::kClassic:
      return Model::classic(n, seed);
    case Family::kEmbedded:
      return Model::embedded(n, d, seed);
    case Family::kRecurrent:
      return Model::recurrent(n, d, cell_from_name(cell), seed);
  }
  throw UsageError("unknown family: " + family);
}

int run_train(const TrainArgs& args) {
  Model model;
  ModelFileInfo info;
  const bool resumed = !args.resume.empty();
  if (resumed) {
    model = load_model(args.resume, &info);
    if (!args.family.empty() &&
        family_from_name(args.family) != model.family) {
      throw UsageError("--family disagrees with the resumed model");
    }
    if (args.nodes > 0 && args.nodes != model.n) {
      throw UsageError("--nodes disagrees with the resumed model");
    }
  } else if (args.family.empty()) {
    throw UsageError("--family is required unless --resume is given");
  }

  std::vector<Episode> train_eps;
  int n = resumed ? model.n : args.nodes;
  if (n > 0) {
    train_eps = load_episodes(args.data, n);
  } else {
    train_eps = load_episodes(args.data, std::numeric_limits<int>::max());
    int max_id = 0;
    for (const Episode& ep : train_eps) {
      for (int v : ep.nodes) max_id = std::max(max_id, v);
    }
    n = max_id + 1;
  }
  if (train_eps.empty()) throw DataError("no usable episodes in " + args.data);

  if (!resumed) {
    const std::uint64_t init_seed = mix_stream(args.config.seed, 0x696e6974ULL);
    model = fresh_model(args.family, n, args.d, args.cell, init_seed);
    info.init = family_name(model.family) + " default init, seed " +
                std::to_string(init_seed);
  }
  std::vector<Episode> val_eps;
  if (!args.val.empty()) val_eps = load_episodes(args.val, model.n);

  // Every effective value, defaults included, lands in the trace and in the
  // model file for provenance.
  const json cfg = {
      {"subcommand", "train"},
      {"data", args.data},
      {"val", args.val},
      {"model", args.model_out},
      {"resume", args.resume},
      {"family", family_name(model.family)},
      {"d", model.d},
      {"cell", model.needs_states() ? cell_name(model.cell) : ""},
      {"nodes", model.n},
      {"epochs", args.config.epochs},
      {"batch", args.config.batch},
      {"samples", args.config.samples},
      {"lr", args.config.lr},
      {"b_length", args.config.b_length},
      {"workers", args.config.workers},
      {"val_samples", args.config.val_samples},
      {"seed", args.config.seed},
      {"start_epoch", model.epoch},
  };
  info.train_config = cfg.dump();

  std::ofstream trace;
  if (!args.trace.empty()) {
    trace.open(args.trace);
    if (!trace) throw DataError("cannot write " + args.trace);
    trace << json{{"config", cfg}}.dump() << '\n';
    trace.flush();
  }
  const bool has_val = !val_eps.empty();
  const EpochObserver observer = [&](const EpochRecord& rec) {
    if (trace.is_open()) {
      json line = {
          {"epoch", rec.epoch}, {"elbo", rec.elbo}, {"wall_ms", rec.wall_ms}};
      if (has_val) line["val_nll"] = rec.val_nll;
      trace << line.dump() << '\n';
      trace.flush();
    }
    std::cerr << "epoch " << rec.epoch << "  elbo " << rec.elbo;
    if (has_val) std::cerr << "  val_nll " << rec.val_nll;
    std::cerr << "  (" << rec.wall_ms << " ms)\n";
  };

  const TrainResult result =
      train(model, train_eps, val_eps, args.config, observer);
  save_model(args.model_out, model, info);
  if (result.diverged) {
    std::cerr << "training diverged; last finite checkpoint written to "
              << args.model_out << "\n";
    return 3;
  }
  std::cout << "trained " << family_name(model.family) << " for "
            << result.trace.size() << " epochs (model epoch " << model.epoch;
  if (has_val) std::cout << ", best epoch " << result.best_epoch;
  if (result.skipped_bins > 0) {
    std::cout << ", skipped bins " << result.skipped_bins;
  }
  std::cout << ") -> " << args.model_out << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string data;
  std::string model;
  std::string gt;
  std::string out;
  std::string metrics = "nll";
  std::string levels = "0";
  double tau = 0.0;
  bool tau_given = false;
  int samples = 100;
  std::size_t sims = 1000;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& args) {
  const Model model = load_model(args.model);
  const std::vector<Episode> episodes = load_episodes(args.data, model.n);
  if (episodes.empty()) throw DataError("no usable episodes in " + args.data);

  std::vector<Metric> metrics;
  for (const std::string& name : split_list(args.metrics)) {
    metrics.push_back(metric_from_name(name));
  }
  if (metrics.empty()) throw UsageError("--metric lists no metric");

  std::vector<GroundTruthRecord> records;
  if (std::find(metrics.begin(), metrics.end(), Metric::kInf) !=
      metrics.end()) {
    if (args.gt.empty()) {
      throw UsageError(
          "INF scores the true infectors; pass the ground-truth file via "
          "--gt");
    }
    records = load_ground_truth(args.gt, model.n);
    if (records.empty()) throw DataError("no usable records in " + args.gt);
  }

  std::vector<std::pair<int, double>> taus;  // (level, resolved tau)
  if (args.tau_given) {
    if (args.tau < 0.0) throw UsageError("--tau must be >= 0");
    taus.emplace_back(-1, args.tau);
  } else {
    const double max_t = max_horizon(episodes);
    for (const std::string& token : split_list(args.levels)) {
      int level = 0;
      try {
        level = std::stoi(token);
      } catch (const std::exception&) {
        throw UsageError("bad --level entry: " + token);
      }
      taus.emplace_back(level, resolve_condition_level(level, max_t));
    }
    if (taus.empty()) throw UsageError("--level lists no level");
  }

  std::ofstream out;
  if (!args.out.empty()) {
    out.open(args.out);
    if (!out) throw DataError("cannot write " + args.out);
  }
  for (const Metric metric : metrics) {
    for (const auto& [level, tau] : taus) {
      MetricsReport rep;
      switch (metric) {
        case Metric::kNll:
          rep = nll(model, episodes, args.samples, level, tau, args.seed);
          break;
        case Metric::kCe:
          rep = cross_entropy(model, episodes, args.sims, level, tau,
                              args.seed);
          break;
        case Metric::kInf:
          rep = infector_recovery(model, records, args.samples, level, tau,
                                  args.seed);
          break;
      }
      const json line = {
          {"metric", metric_name(rep.metric)},
          {"level", rep.level},
          {"tau", rep.tau},
          {"value", rep.value},
          {"std_error", rep.std_error},
          {"S", rep.S},
          {"n_sims", rep.n_sims},
          {"excluded", rep.excluded},
          {"wall_ms", rep.wall_ms},
      };
      std::cout << line.dump() << "\n";
      if (out.is_open()) out << line.dump() << '\n';
    }
  }
  return 0;
}

// ------------------------------------------------------------- generate ----

struct GenerateArgs {
  std::string model;
  std::string out;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::size_t cap = 0;  // 0 = 4 * nodes
};

int run_generate(const GenerateArgs& args) {
  const Model model = load_model(args.model);
  const GenConfig config{args.cap};
  std::vector<GroundTruthRecord> records;
  records.reserve(args.count);
  std::size_t truncated = 0;
  double total_length = 0.0;
  for (std::size_t i = 0; i < args.count; ++i) {
    Rng rng(mix_stream(args.seed, 0x67656e65ULL, i));
    GenResult result = generate(model, rng, config);
    if (result.truncated) ++truncated;
    total_length += static_cast<double>(result.cascade.episode.size() - 1);
    GroundTruthRecord rec;
    rec.cascade = std::move(result.cascade);
    records.push_back(std::move(rec));
  }
  save_ground_truth(args.out, records);
  const double mean_length =
      args.count == 0 ? 0.0 : total_length / static_cast<double>(args.count);
  std::cout << "generated " << args.count << " cascades -> " << args.out
            << " (mean length " << mean_length << ", truncated " << truncated
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "continuous-time cascade models: synthesize corpora, train, evaluate, "
      "and simulate"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "read options from an INI file ([subcommand] sections); "
                 "command-line flags override it");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic corpus with ground truth");
  synth->add_option("--corpus", synth_args.corpus,
                    "arti1 (per-episode k regime) or arti2 (content-driven k)")
      ->required();
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--nodes", synth_args.spec.nodes,
                    "graph nodes (the world node is added on top)")
      ->capture_default_str();
  synth->add_option("--attach", synth_args.spec.attach,
                    "preferential-attachment edges per new node")
      ->capture_default_str();
  synth->add_option("--episodes", synth_args.spec.episodes,
                    "training episodes")
      ->capture_default_str();
  synth->add_option("--val-episodes", synth_args.val_episodes,
                    "validation episodes")
      ->capture_default_str();
  synth->add_option("--test-episodes", synth_args.test_episodes,
                    "test episodes")
      ->capture_default_str();
  synth->add_option("--r-lo", synth_args.spec.r_lo, "delay-rate lower bound")
      ->capture_default_str();
  synth->add_option("--r-hi", synth_args.spec.r_hi, "delay-rate upper bound")
      ->capture_default_str();
  synth->add_option("--world-k", synth_args.spec.world_k,
                    "world->node transmission probability")
      ->capture_default_str();
  synth->add_option("--variants", synth_args.spec.variants,
                    "arti1: per-edge k variants")
      ->capture_default_str();
  synth->add_option("--k-lo", synth_args.spec.k_lo,
                    "arti1: k variant lower bound")
      ->capture_default_str();
  synth->add_option("--k-hi", synth_args.spec.k_hi,
                    "arti1: k variant upper bound")
      ->capture_default_str();
  synth->add_option("--feature-dim", synth_args.spec.feature_dim,
                    "arti2: content/feature dimension")
      ->capture_default_str();
  synth->add_option("--content-alpha", synth_args.spec.content_alpha,
                    "arti2: content Dirichlet alpha")
      ->capture_default_str();
  synth->add_option("--hub-alpha", synth_args.spec.hub_alpha,
                    "arti2: feature Dirichlet alpha for hubs")
      ->capture_default_str();
  synth->add_option("--leaf-alpha", synth_args.spec.leaf_alpha,
                    "arti2: feature Dirichlet alpha for non-hubs")
      ->capture_default_str();
  synth->add_option("--hub-degree", synth_args.spec.hub_degree,
                    "arti2: degree above which a node counts as a hub")
      ->capture_default_str();
  synth->add_option("--k-scale", synth_args.spec.k_scale,
                    "arti2: sigmoid scale on <content, feature>")
      ->capture_default_str();
  synth->add_option("--k-shift", synth_args.spec.k_shift,
                    "arti2: sigmoid shift on <content, feature>")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.spec.seed, "corpus seed")
      ->capture_default_str();

  TrainArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit a model on an episode file");
  train_cmd->add_option("--data", train_args.data, "training episodes (JSONL)")
      ->required();
  train_cmd->add_option("--val", train_args.val,
                        "validation episodes (enables best-epoch selection)");
  train_cmd->add_option("--model", train_args.model_out, "output model file")
      ->required();
  train_cmd->add_option("--resume", train_args.resume,
                        "continue from an existing model file");
  train_cmd->add_option("--family", train_args.family,
                        "ctic | embctic | recctic (required unless --resume)");
  train_cmd->add_option("--d", train_args.d, "embedding dimension")
      ->capture_default_str();
  train_cmd
      ->add_option("--cell", train_args.cell,
                   "recurrent cell: gru | elman | mlp | identity")
      ->capture_default_str();
  train_cmd->add_option(
      "--nodes", train_args.nodes,
      "node-id space incl. the world node (default: infer from the data)");
  train_cmd->add_option("--epochs", train_args.config.epochs, "epochs to run")
      ->capture_default_str();
  train_cmd->add_option("--batch", train_args.config.batch, "bin size")
      ->capture_default_str();
  train_cmd
      ->add_option("--samples", train_args.config.samples,
                   "trajectory samples per episode per epoch")
      ->capture_default_str();
  train_cmd->add_option("--lr", train_args.config.lr, "Adam learning rate")
      ->capture_default_str();
  train_cmd
      ->add_option("--b-length", train_args.config.b_length,
                   "baseline window (epochs)")
      ->capture_default_str();
  train_cmd->add_option("--workers", train_args.config.workers,
                        "threads per bin gradient")
      ->capture_default_str();
  train_cmd
      ->add_option("--val-samples", train_args.config.val_samples,
                   "trajectory samples for the validation NLL")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_args.config.seed, "training seed")
      ->capture_default_str();
  train_cmd->add_option("--trace", train_args.trace,
                        "write a JSONL training trace (config echo + epochs)");

  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score a model on a test episode file");
  eval_cmd->add_option("--data", eval_args.data, "test episodes (JSONL)")
      ->required();
  eval_cmd->add_option("--model", eval_args.model, "model file")->required();
  eval_cmd->add_option("--gt", eval_args.gt,
                       "ground-truth file (required for the INF metric)");
  eval_cmd
      ->add_option("--metric", eval_args.metrics,
                   "comma list out of nll,ce,inf")
      ->capture_default_str();
  CLI::Option* level_opt =
      eval_cmd
          ->add_option("--level", eval_args.levels,
                       "comma list of conditioning levels out of 0,1,2,3")
          ->capture_default_str();
  CLI::Option* tau_opt = eval_cmd->add_option(
      "--tau", eval_args.tau, "explicit censor time (overrides --level)");
  tau_opt->excludes(level_opt);
  eval_cmd
      ->add_option("--samples", eval_args.samples,
                   "trajectory samples S (NLL/INF, recurrent family)")
      ->capture_default_str();
  eval_cmd
      ->add_option("--sims", eval_args.sims,
                   "simulations per marginal estimate (CE)")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed, "evaluation seed")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out,
                       "also write the report lines to this file");

  GenerateArgs gen_args;
  CLI::App* gen_cmd = app.add_subcommand(
      "generate", "forward-simulate cascades from a model file");
  gen_cmd->add_option("--model", gen_args.model, "model file")->required();
  gen_cmd->add_option("--out", gen_args.out, "output JSONL (episodes + ancestors)")
      ->required();
  gen_cmd->add_option("-n,--count", gen_args.count, "cascades to generate")
      ->capture_default_str();
  gen_cmd->add_option("--cap", gen_args.cap,
                      "max infections per cascade (0 = 4x node count)")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen_args.seed, "generation seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  eval_args.tau_given = tau_opt->count() > 0;

  try {
    if (app.got_subcommand(synth)) return run_synth(synth_args);
    if (app.got_subcommand(train_cmd)) return run_train(train_args);
    if (app.got_subcommand(eval_cmd)) return run_eval(eval_args);
    if (app.got_subcommand(gen_cmd)) return run_generate(gen_args);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
