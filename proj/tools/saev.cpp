//==============================================================================
// Copyright (c) 2026 The saev Authors.
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
//==============================================================================
// saev command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data or validation error.
//==============================================================================
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "saev/corpus.hpp"
#include "saev/errors.hpp"
#include "saev/metrics.hpp"
#include "saev/parallel.hpp"
#include "saev/patchfilter.hpp"
#include "saev/ranking.hpp"
#include "saev/sae.hpp"
#include "saev/trainer.hpp"
//==============================================================================
namespace fs = std::filesystem;
using namespace saev;
//==============================================================================
namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Echo = std::vector<std::pair<std::string, std::string>>;

template <typename T>
std::string str(const T& value) {
  std::ostringstream out;
  out << std::setprecision(10) << value;
  return out.str();
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    out += out.empty() ? p : " " + p;
  }
  return out;
}

// Config echo on stderr so a run can be reproduced from its log.
void echo(const std::string& command, const Echo& fields) {
  std::cerr << "saev " << command << ":";
  for (const auto& [key, value] : fields) {
    std::cerr << " " << key << "=" << value;
  }
  std::cerr << "\n";
}

// "-" or empty means stdout.
void with_output(const std::string& path,
                 const std::function<void(std::ostream&)>& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  write(out);
  out.flush();
  if (!out) {
    throw IoError("failed writing: " + path);
  }
}

std::size_t resolve_threads(std::size_t flag) {
  return flag > 0 ? flag : default_threads();
}

std::vector<fs::path> to_paths(const std::vector<std::string>& names) {
  return {names.begin(), names.end()};
}
//==============================================================================
// gen-synth
//==============================================================================
struct GenSynthArgs {
  SyntheticSpec spec;
  std::string out;
  std::string atoms_out;
};

void add_gen_synth(CLI::App& app, GenSynthArgs& a) {
  auto* cmd = app.add_subcommand(
      "gen-synth", "Write a planted-dictionary corpus as a shard");
  cmd->add_option("--out", a.out, "Output shard")->required();
  cmd->add_option("--d-model", a.spec.d_model, "Hidden width")
      ->capture_default_str();
  cmd->add_option("--features", a.spec.planted_features, "Planted atoms")
      ->capture_default_str();
  cmd->add_option("--sparsity", a.spec.sparsity, "Atoms per token")
      ->capture_default_str();
  cmd->add_option("--items", a.spec.items, "Items")->capture_default_str();
  cmd->add_option("--tokens", a.spec.tokens_per_item, "Tokens per item")
      ->capture_default_str();
  cmd->add_option("--vision-fraction", a.spec.vision_fraction,
                  "Share of vision tokens per item")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--shared-fraction", a.spec.shared_fraction,
                  "Share of atoms used by both modalities")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--noise", a.spec.noise_std, "Gaussian noise stddev")
      ->capture_default_str();
  cmd->add_option("--seed", a.spec.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--atoms-out", a.atoms_out,
                  "Also write the planted atoms as CSV, one row per atom");
}

int run_gen_synth(const GenSynthArgs& a) {
  echo("gen-synth",
       {{"d_model", str(a.spec.d_model)},
        {"features", str(a.spec.planted_features)},
        {"sparsity", str(a.spec.sparsity)},
        {"items", str(a.spec.items)},
        {"tokens", str(a.spec.tokens_per_item)},
        {"vision_fraction", str(a.spec.vision_fraction)},
        {"shared_fraction", str(a.spec.shared_fraction)},
        {"noise", str(a.spec.noise_std)},
        {"seed", str(a.spec.seed)}});
  const SyntheticCorpus corpus = generate_synthetic(a.spec);
  write_shard(corpus.items, a.spec.d_model, fs::path(a.out));
  if (!a.atoms_out.empty()) {
    with_output(a.atoms_out, [&](std::ostream& out) {
      out << std::setprecision(9);
      for (Eigen::Index r = 0; r < corpus.planted.rows(); ++r) {
        for (Eigen::Index c = 0; c < corpus.planted.cols(); ++c) {
          out << (c > 0 ? "," : "") << corpus.planted(r, c);
        }
        out << "\n";
      }
    });
  }
  std::cerr << "wrote " << corpus.items.size() << " items to " << a.out
            << "\n";
  return 0;
}
//==============================================================================
// train
//==============================================================================
struct TrainArgs {
  std::vector<std::string> shards;
  std::string out;
  std::string config_file;
  std::vector<std::string> overrides;
  std::string history;
  std::string init;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train an SAE on shards");
  cmd->add_option("shards", a.shards, "Input shards")->required();
  cmd->add_option("--out", a.out, "Output model file")->required();
  cmd->add_option("--config", a.config_file,
                  "key = value file of TrainConfig fields")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", a.overrides,
                  "Override one field, e.g. --set total_steps=2000")
      ->allow_extra_args(false);
  cmd->add_option("--history", a.history, "Write the per-step loss CSV");
  cmd->add_option("--init", a.init, "Continue from an existing model")
      ->check(CLI::ExistingFile);
}

int run_train(const TrainArgs& a) {
  TrainConfig config;
  if (!a.config_file.empty()) {
    config = load_train_config(a.config_file);
  }
  for (const std::string& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--set expects key=value, got '" + kv + "'");
    }
    try {
      set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const InvalidArgumentError& e) {
      throw UsageError(e.what());
    }
  }
  try {
    validate(config);
  } catch (const InvalidArgumentError& e) {
    throw UsageError(e.what());
  }
  std::string flat = format_train_config(config);
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  echo("train", {{"shards", join(a.shards)}, {"config", "{ " + flat + "}"}});

  const ShardSet source(to_paths(a.shards));
  const TrainResult result =
      a.init.empty() ? train(source, config)
                     : train(source, config, load_model(fs::path(a.init)));
  save_model(result.model, fs::path(a.out));
  if (!a.history.empty()) {
    with_output(a.history, [&](std::ostream& out) {
      write_loss_history(result.history, out);
    });
  }
  for (const FeatureActivity& act : result.activity) {
    std::cerr << "step " << act.step + 1 << ": active_features "
              << act.active_features << "/" << result.model.n()
              << ", mean_l0 " << str(act.mean_l0) << "\n";
  }
  const StepRecord& last = result.history.back();
  std::cerr << "final batch loss: recon " << str(last.recon) << ", l1 "
            << str(last.l1) << ", total " << str(last.total) << "\n";
  return 0;
}
//==============================================================================
// eval
//==============================================================================
struct EvalArgs {
  std::vector<std::string> shards;
  std::string model;
  std::string out;
  std::string model_id;
  bool per_token = false;
  std::size_t threads = 0;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("eval", "Report L0, L1 and reconstruction");
  cmd->add_option("shards", a.shards, "Input shards")->required();
  cmd->add_option("--model", a.model, "Model file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "Report JSON (default stdout)");
  cmd->add_option("--model-id", a.model_id,
                  "Identifier stored in the report (default: model path)");
  cmd->add_flag("--per-token", a.per_token,
                "Average reconstruction over tokens instead of items");
  cmd->add_option("--threads", a.threads, "Worker threads (0: default)");
}

int run_eval(const EvalArgs& a) {
  EvalOptions options;
  options.per_token_recon = a.per_token;
  options.model_id = a.model_id.empty() ? a.model : a.model_id;
  options.shard_ids = a.shards;
  options.threads = resolve_threads(a.threads);
  echo("eval", {{"shards", join(a.shards)},
                {"model", a.model},
                {"per_token", a.per_token ? "true" : "false"},
                {"threads", str(options.threads)}});
  const SaeModel model = load_model(fs::path(a.model));
  const EvalReport report =
      evaluate(ShardSet(to_paths(a.shards)), model, options);
  with_output(a.out, [&](std::ostream& out) {
    out << to_json(report).dump(2) << "\n";
  });
  return 0;
}
//==============================================================================
// weights
//==============================================================================
struct WeightsArgs {
  std::vector<std::string> shards;
  std::string model;
  std::string out;
  CollectOptions collect;
  std::size_t top_k = kDefaultTopK;
};

void add_weights(CLI::App& app, WeightsArgs& a) {
  auto* cmd = app.add_subcommand(
      "weights", "Compute per-feature cross-modal weights");
  cmd->add_option("shards", a.shards, "Input shards")->required();
  cmd->add_option("--model", a.model, "Model file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "Weights JSON (default stdout)");
  cmd->add_option("--delta", a.collect.delta, "Activation bound")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--top-k", a.top_k, "Token pairs per feature")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--sample-size", a.collect.sample_size, "Items sampled")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-tokens", a.collect.max_tokens_per_feature,
                  "Tokens kept per feature and modality")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed", a.collect.seed, "Sampling seed")
      ->capture_default_str();
}

int run_weights(const WeightsArgs& a) {
  echo("weights", {{"shards", join(a.shards)},
                   {"model", a.model},
                   {"delta", str(a.collect.delta)},
                   {"top_k", str(a.top_k)},
                   {"sample_size", str(a.collect.sample_size)},
                   {"max_tokens", str(a.collect.max_tokens_per_feature)},
                   {"seed", str(a.collect.seed)}});
  const SaeModel model = load_model(fs::path(a.model));
  const FeatureTokenSample sample =
      collect_activations(ShardSet(to_paths(a.shards)), model, a.collect);
  const CrossModalWeights weights = cross_modal_weight(sample, a.top_k);
  std::size_t nonzero = 0;
  for (double w : weights.omega) {
    nonzero += w != 0.0 ? 1 : 0;
  }
  std::cerr << "sampled " << sample.sampled_items.size() << " items; "
            << nonzero << "/" << weights.omega.size()
            << " features have a cross-modal weight\n";
  with_output(a.out, [&](std::ostream& out) {
    out << to_json(weights).dump() << "\n";
  });
  return 0;
}
//==============================================================================
// rank
//==============================================================================
struct RankArgs {
  std::vector<std::string> shards;
  std::string model;
  std::string method = "cosine";
  std::string weights;
  std::string out;
  double delta = kDefaultDelta;
  std::size_t threads = 0;
};

void add_rank(CLI::App& app, RankArgs& a) {
  auto* cmd = app.add_subcommand("rank", "Score and order items");
  cmd->add_option("shards", a.shards, "Input shards")->required();
  cmd->add_option("--model", a.model, "Model file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--method", a.method, "cosine | l0 | cooccur")
      ->check(CLI::IsMember({"cosine", "l0", "cooccur"}))
      ->capture_default_str();
  cmd->add_option("--weights", a.weights, "Weights JSON (cosine only)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--delta", a.delta, "Activation bound")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--out", a.out, "Manifest JSON lines (default stdout)");
  cmd->add_option("--threads", a.threads, "Worker threads (0: default)");
}

int run_rank(const RankArgs& a) {
  const RankMethod method = *parse_rank_method(a.method);
  if (method == RankMethod::kCosine && a.weights.empty()) {
    throw UsageError("rank --method cosine requires --weights");
  }
  RankOptions options;
  options.delta = a.delta;
  options.threads = resolve_threads(a.threads);
  echo("rank", {{"shards", join(a.shards)},
                {"model", a.model},
                {"method", a.method},
                {"weights", a.weights.empty() ? "-" : a.weights},
                {"delta", str(a.delta)},
                {"threads", str(options.threads)}});
  const SaeModel model = load_model(fs::path(a.model));
  const ShardSet source(to_paths(a.shards));
  RankedManifest manifest;
  switch (method) {
    case RankMethod::kCosine:
      manifest = rank_cosine(source, model, load_weights(a.weights), options);
      break;
    case RankMethod::kL0:
      manifest = rank_l0(source, model, options);
      break;
    case RankMethod::kCooccur:
      manifest = rank_cooccur(source, model, options);
      break;
  }
  with_output(a.out, [&](std::ostream& out) { write_manifest(manifest, out); });
  std::cerr << "ranked " << manifest.entries.size() << " items\n";
  return 0;
}
//==============================================================================
// filter
//==============================================================================
struct FilterArgs {
  std::string manifest;
  double retention = 1.0;
  std::string out;
};

void add_filter(CLI::App& app, FilterArgs& a) {
  auto* cmd = app.add_subcommand(
      "filter", "Keep the top fraction of a manifest, one item id per line");
  cmd->add_option("--manifest", a.manifest, "Manifest JSON lines")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--retention", a.retention, "Fraction kept, in [0, 1]")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--out", a.out, "Id list (default stdout)");
}

int run_filter(const FilterArgs& a) {
  echo("filter",
       {{"manifest", a.manifest}, {"retention", str(a.retention)}});
  const RankedManifest manifest = load_manifest(a.manifest);
  const std::vector<std::uint64_t> ids =
      filter_manifest(manifest, a.retention);
  with_output(a.out, [&](std::ostream& out) {
    for (std::uint64_t id : ids) {
      out << id << "\n";
    }
  });
  std::cerr << "kept " << ids.size() << " of " << manifest.entries.size()
            << " items\n";
  return 0;
}
//==============================================================================
// patch-filter
//==============================================================================
struct PatchArgs {
  std::vector<std::string> shards;
  std::string model;
  std::string method = "cosine";
  std::string weights;
  double gamma = 0.75;
  double delta = kDefaultDelta;
  std::string out;
  std::string scores_out;
};

void add_patch_filter(CLI::App& app, PatchArgs& a) {
  auto* cmd = app.add_subcommand(
      "patch-filter", "Keep the highest-scoring image patches of each item");
  cmd->add_option("shards", a.shards, "Input shards")->required();
  cmd->add_option("--model", a.model, "Model file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--method", a.method, "l0 | l1 | cooccur | cosine")
      ->check(CLI::IsMember({"l0", "l1", "cooccur", "cosine"}))
      ->capture_default_str();
  cmd->add_option("--weights", a.weights, "Weights JSON (cosine only)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--gamma", a.gamma, "Fraction of patches kept")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--delta", a.delta, "Activation bound")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--out", a.out, "Mask JSON lines (default stdout)");
  cmd->add_option("--scores-out", a.scores_out, "Per-patch score CSV");
}

int run_patch_filter(const PatchArgs& a) {
  const PatchMethod method = *parse_patch_method(a.method);
  if (method == PatchMethod::kCosine && a.weights.empty()) {
    throw UsageError("patch-filter --method cosine requires --weights");
  }
  echo("patch-filter", {{"shards", join(a.shards)},
                        {"model", a.model},
                        {"method", a.method},
                        {"weights", a.weights.empty() ? "-" : a.weights},
                        {"gamma", str(a.gamma)},
                        {"delta", str(a.delta)}});
  const SaeModel model = load_model(fs::path(a.model));
  CrossModalWeights weights;
  if (!a.weights.empty()) {
    weights = load_weights(a.weights);
  }
  const ShardSet source(to_paths(a.shards));

  std::ostringstream masks;
  std::ostringstream scores;
  scores << "item_id,token_index,method,score\n";
  std::size_t written = 0;
  std::size_t skipped = 0;
  source.for_each([&](const DataItem& item) {
    try {
      const PatchScores s = score_patches(item, model, method, a.delta,
                                          a.weights.empty() ? nullptr
                                                            : &weights);
      write_mask(make_mask(s, a.gamma), masks);
      write_patch_scores(s, scores);
      ++written;
    } catch (const PreconditionError& e) {
      std::cerr << "skipping item " << item.item_id << ": " << e.what()
                << "\n";
      ++skipped;
    }
  });
  with_output(a.out, [&](std::ostream& out) { out << masks.str(); });
  if (!a.scores_out.empty()) {
    with_output(a.scores_out, [&](std::ostream& out) { out << scores.str(); });
  }
  std::cerr << "masked " << written << " items, skipped " << skipped << "\n";
  return 0;
}
//==============================================================================
// avg-score, corr
//==============================================================================
struct AvgScoreArgs {
  std::string weights;
};

void add_avg_score(CLI::App& app, AvgScoreArgs& a) {
  auto* cmd = app.add_subcommand(
      "avg-score", "Mean of the nonzero cross-modal weights");
  cmd->add_option("--weights", a.weights, "Weights JSON")
      ->required()
      ->check(CLI::ExistingFile);
}

int run_avg_score(const AvgScoreArgs& a) {
  echo("avg-score", {{"weights", a.weights}});
  std::cout << str(average_model_score(load_weights(a.weights))) << "\n";
  return 0;
}

struct CorrArgs {
  std::string xs;
  std::string ys;
};

void add_corr(CLI::App& app, CorrArgs& a) {
  auto* cmd = app.add_subcommand(
      "corr", "Pearson correlation of two (id, score) tables joined by id");
  cmd->add_option("xs", a.xs, "First table")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("ys", a.ys, "Second table")
      ->required()
      ->check(CLI::ExistingFile);
}

int run_corr(const CorrArgs& a) {
  echo("corr", {{"xs", a.xs}, {"ys", a.ys}});
  std::cout << str(correlate(read_score_table(a.xs), read_score_table(a.ys)))
            << "\n";
  return 0;
}

}  // namespace
//==============================================================================
int main(int argc, char** argv) {
  CLI::App app{"Sparse autoencoder toolkit for multimodal data selection"};
  app.require_subcommand(1);

  GenSynthArgs gen_synth;
  TrainArgs train_args;
  EvalArgs eval_args;
  WeightsArgs weights_args;
  RankArgs rank_args;
  FilterArgs filter_args;
  PatchArgs patch_args;
  AvgScoreArgs avg_args;
  CorrArgs corr_args;
  add_gen_synth(app, gen_synth);
  add_train(app, train_args);
  add_eval(app, eval_args);
  add_weights(app, weights_args);
  add_rank(app, rank_args);
  add_filter(app, filter_args);
  add_patch_filter(app, patch_args);
  add_avg_score(app, avg_args);
  add_corr(app, corr_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "gen-synth") return run_gen_synth(gen_synth);
    if (command == "train") return run_train(train_args);
    if (command == "eval") return run_eval(eval_args);
    if (command == "weights") return run_weights(weights_args);
    if (command == "rank") return run_rank(rank_args);
    if (command == "filter") return run_filter(filter_args);
    if (command == "patch-filter") return run_patch_filter(patch_args);
    if (command == "avg-score") return run_avg_score(avg_args);
    if (command == "corr") return run_corr(corr_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n"
              << app.get_subcommand(command)->help();
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << " at step " << e.step() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
