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
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
//==============================================================================
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "saev/corpus.hpp"
#include "saev/metrics.hpp"
#include "saev/patchfilter.hpp"
#include "saev/ranking.hpp"
#include "saev/sae.hpp"
#include "saev/trainer.hpp"
//==============================================================================
using namespace saev;
namespace fs = std::filesystem;
//==============================================================================
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

template <typename Scalar>
RowMatrix<Scalar> gaussian(std::mt19937_64& rng, Eigen::Index rows,
                           Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  RowMatrix<Scalar> out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out.data()[i] = static_cast<Scalar>(gauss(rng));
  }
  return out;
}

template <typename Scalar>
BasicSaeModel<Scalar> gaussian_model(std::mt19937_64& rng, Eigen::Index n,
                                     Eigen::Index m, double bias_shift = 0) {
  BasicSaeModel<Scalar> model(n, m);
  model.w_enc = gaussian<Scalar>(rng, n, m);
  model.b_enc = gaussian<Scalar>(rng, n, 1, 0.5);
  model.b_enc.array() += static_cast<Scalar>(bias_shift);
  model.dictionary = gaussian<Scalar>(rng, n, m);
  return model;
}

std::vector<double> to_vector(const VectorD& v) {
  return {v.data(), v.data() + v.size()};
}
//==============================================================================
// Analytic gradients against central differences of the loop-oracle loss.
Outcome gradient_check() {
  std::mt19937_64 rng(101);
  constexpr double kStep = 1e-5;
  constexpr double kTol = 1e-5;
  std::size_t checked = 0;
  double worst = 0;
  int trials = 0;
  while (checked < 600 && trials < 100) {
    ++trials;
    const SaeModel64 model = gaussian_model<double>(rng, 16, 8);
    const MatrixD h = gaussian<double>(rng, 10, 8);
    const double lambda = 0.5 * (trials % 4);
    if ((pre_activation(h, model).array().abs() <= 1e-3).any()) {
      continue;
    }
    const Gradients<double> g = gradients(h, model, lambda);
    const oracle::Dense dense_h = oracle::to_dense(h);
    auto loss = [&](const SaeModel64& p) {
      return oracle::total_loss(dense_h, oracle::to_dense(p.w_enc),
                                to_vector(p.b_enc),
                                oracle::to_dense(p.dictionary), lambda);
    };
    std::uniform_int_distribution<int> block(0, 2);
    std::uniform_int_distribution<Eigen::Index> row(0, model.n() - 1);
    std::uniform_int_distribution<Eigen::Index> col(0, model.m() - 1);
    for (int c = 0; c < 100; ++c) {
      const int which = block(rng);
      const Eigen::Index k = row(rng);
      const Eigen::Index d = col(rng);
      auto coord = [&](SaeModel64& p) -> double& {
        if (which == 0) return p.w_enc(k, d);
        if (which == 1) return p.b_enc[k];
        return p.dictionary(k, d);
      };
      SaeModel64 plus = model;
      SaeModel64 minus = model;
      coord(plus) += kStep;
      coord(minus) -= kStep;
      const double numeric = (loss(plus) - loss(minus)) / (2 * kStep);
      const double analytic = which == 0   ? g.w_enc(k, d)
                              : which == 1 ? g.b_enc[k]
                                           : g.dictionary(k, d);
      const double scale =
          std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
      ++checked;
    }
  }
  return {checked >= 500 && worst <= kTol,
          std::to_string(checked) + " coordinates, worst relative error " +
              fmt(worst)};
}
//==============================================================================
// Training recovers a planted dictionary.
Outcome planted_recovery() {
  SyntheticSpec spec;
  spec.d_model = 64;
  spec.planted_features = 32;
  spec.sparsity = 5;
  spec.items = 500;
  spec.tokens_per_item = 16;
  spec.noise_std = 0.01;
  const SyntheticCorpus corpus = generate_synthetic(spec);
  const MemorySource source(corpus.items, spec.d_model);

  // Step count and width are the criterion's; the optimizer settings suit
  // unit-scale planted data.
  TrainConfig config;
  config.total_steps = 2000;
  config.expansion_factor = 4;  // n = 256
  config.batch_size = 1024;
  config.lr = 1e-3;
  config.lambda = 0.1;
  config.lr_warmup_steps = 100;
  config.lr_decay_steps = 400;
  config.buffer_batches_num = 8;
  config.dead_feature_window = 500;
  config.feature_sampling_window = 500;
  const TrainResult result = train(source, config);
  const EvalReport report = evaluate(source, result.model);
  const double ratio = report.mean_recon / report.mean_zero_baseline;

  std::size_t recovered = 0;
  for (Eigen::Index a = 0; a < corpus.planted.rows(); ++a) {
    double best = -1;
    for (Eigen::Index k = 0; k < result.model.n(); ++k) {
      const double cos =
          corpus.planted.row(a).dot(result.model.dictionary.row(k)) /
          (corpus.planted.row(a).norm() *
           result.model.dictionary.row(k).norm());
      best = std::max(best, cos);
    }
    recovered += best >= 0.9 ? 1 : 0;
  }
  const double share = static_cast<double>(recovered) /
                       static_cast<double>(corpus.planted.rows());
  return {ratio < 0.1 && share >= 0.9,
          "recon/baseline " + fmt(ratio) + ", atoms recovered " +
              std::to_string(recovered) + "/" +
              std::to_string(corpus.planted.rows())};
}
//==============================================================================
// Library rankings against exhaustive scans.
Outcome ranking_equivalence() {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t mismatches = 0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto items = oracle::random_items(rng, 20, 10, 6);
    const SaeModel model = gaussian_model<float>(rng, 16, 6, -0.5);
    CrossModalWeights weights;
    weights.omega.resize(16);
    for (double& w : weights.omega) {
      w = u(rng);
    }
    const oracle::Dense w = oracle::to_dense(model.w_enc);
    const std::vector<double> b(model.b_enc.data(),
                                model.b_enc.data() + model.b_enc.size());
    const MemorySource source(items, 6);
    RankOptions options;
    options.delta = 0.5;
    const std::pair<RankedManifest, oracle::BruteMethod> runs[] = {
        {rank_cosine(source, model, weights, options),
         oracle::BruteMethod::kCosine},
        {rank_l0(source, model, options), oracle::BruteMethod::kL0},
        {rank_cooccur(source, model, options), oracle::BruteMethod::kCooccur}};
    for (const auto& [manifest, method] : runs) {
      const auto expected =
          oracle::brute_rank(items, w, b, 0.5, method, weights.omega);
      ++compared;
      bool same = manifest.entries.size() == expected.size();
      for (std::size_t i = 0; same && i < expected.size(); ++i) {
        same = manifest.entries[i].item_id == expected[i].item_id &&
               manifest.entries[i].position == expected[i].position &&
               std::abs(manifest.entries[i].score - expected[i].score) <=
                   1e-9;
      }
      mismatches += same ? 0 : 1;
    }
  }
  return {mismatches == 0, std::to_string(compared - mismatches) + "/" +
                               std::to_string(compared) +
                               " manifests identical"};
}
//==============================================================================
// The three hand-computed cross-modal weight examples.
Outcome eq7_examples() {
  FeatureTokenSample sample;
  sample.d_model = 2;
  const std::vector<std::pair<std::vector<float>, Modality>> pool{
      {{1, 0}, Modality::kText},   {{0, 1}, Modality::kText},
      {{1, 0}, Modality::kVision}, {{0, 1}, Modality::kVision},
      {{1, 1}, Modality::kText}};
  for (std::size_t t = 0; t < pool.size(); ++t) {
    sample.hidden.insert(sample.hidden.end(), pool[t].first.begin(),
                         pool[t].first.end());
    sample.modality.push_back(pool[t].second);
    sample.item_id.push_back(0);
    sample.token_index.push_back(static_cast<std::uint32_t>(t));
  }
  sample.features.resize(3);
  // Identical pairs.
  sample.features[0].text = {{0, 3}, {1, 2}};
  sample.features[0].vision = {{2, 3}, {3, 2}};
  // Orthogonal pairs.
  sample.features[1].text = {{0, 3}, {1, 2}};
  sample.features[1].vision = {{3, 3}, {2, 2}};
  // (1,0)-(0,1) and (1,1)-(1,0).
  sample.features[2].text = {{0, 3}, {4, 2}};
  sample.features[2].vision = {{3, 3}, {2, 2}};
  const CrossModalWeights w = cross_modal_weight(sample, 2);
  const double expected[] = {1.0, 0.0, (0.0 + 1.0 / std::sqrt(2.0)) / 2.0};
  double worst = 0;
  for (int k = 0; k < 3; ++k) {
    worst = std::max(worst, std::abs(w.omega[k] - expected[k]));
  }
  return {worst <= 1e-6, "omega = (" + fmt(w.omega[0]) + ", " +
                             fmt(w.omega[1]) + ", " + fmt(w.omega[2]) +
                             "), worst error " + fmt(worst)};
}
//==============================================================================
// Mask and score properties over random items.
Outcome patch_properties() {
  std::mt19937_64 rng(105);
  CrossModalWeights ones;
  ones.omega.assign(12, 1.0);
  std::size_t violations = 0;
  std::size_t fixtures = 0;
  while (fixtures < 100) {
    const SaeModel model = gaussian_model<float>(rng, 12, 6, -0.3);
    DataItem item = oracle::random_items(rng, 1, 16, 6)[0];
    if (item.records.size() < 2) {
      continue;
    }
    item.records[0].modality = Modality::kText;
    item.records[1].modality = Modality::kVision;
    ++fixtures;
    const std::size_t vision = item.count(Modality::kVision);

    const auto l0 = score_patches(item, model, PatchMethod::kL0, 0.5);
    const auto co = score_patches(item, model, PatchMethod::kCooccur, 0.5);
    const auto cos =
        score_patches(item, model, PatchMethod::kCosine, 0.5, &ones);
    for (std::size_t i = 0; i < l0.patches.size(); ++i) {
      violations += co.patches[i].score <= l0.patches[i].score ? 0 : 1;
      violations += cos.patches[i].score == co.patches[i].score ? 0 : 1;
    }
    for (const PatchScores* s : {&l0, &co, &cos}) {
      violations += make_mask(*s, 1.0).kept.size() == vision ? 0 : 1;
      violations += make_mask(*s, 0.0).kept.empty() ? 0 : 1;
      std::vector<std::uint32_t> previous;
      for (double gamma : {0.25, 0.5, 0.75}) {
        const auto kept = make_mask(*s, gamma).kept;
        violations += std::includes(kept.begin(), kept.end(),
                                    previous.begin(), previous.end())
                          ? 0
                          : 1;
        previous = kept;
      }
    }
  }
  return {violations == 0, std::to_string(fixtures) + " fixtures, " +
                               std::to_string(violations) + " violations"};
}
//==============================================================================
// Repeated CLI runs produce identical bytes.
std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool run_cli(const std::string& args) {
  const std::string cmd =
      std::string(SAEV_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "saev_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string corpus = (dir / "c.saev").string();
  const std::string train_flags =
      " --set total_steps=300 --set batch_size=256 --set lr=1e-3"
      " --set lambda=0.1 --set lr_warmup_steps=30 --set lr_decay_steps=100"
      " --set expansion_factor=4 --set buffer_batches_num=4"
      " --set dead_feature_window=100 --set feature_sampling_window=100";
  bool ok = run_cli("gen-synth --items 60 --noise 0.01 --out " + corpus);
  for (const char* run : {"a", "b"}) {
    const std::string model = (dir / (std::string(run) + ".saem")).string();
    const std::string weights = (dir / (std::string(run) + ".json")).string();
    ok = ok && run_cli("train " + corpus + " --out " + model + train_flags);
    ok = ok && run_cli("weights " + corpus + " --model " + model +
                       " --sample-size 30 --out " + weights);
    ok = ok && run_cli("rank " + corpus + " --model " + model +
                       " --weights " + weights + " --out " +
                       (dir / (std::string(run) + ".jsonl")).string());
    ok = ok && run_cli("rank " + corpus + " --model " + model +
                       " --method cooccur --out " +
                       (dir / (std::string(run) + ".co.jsonl")).string());
  }
  if (!ok) {
    return {false, "a CLI invocation failed"};
  }
  const bool models = slurp(dir / "a.saem") == slurp(dir / "b.saem");
  const bool manifests = slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl") &&
                         slurp(dir / "a.co.jsonl") == slurp(dir / "b.co.jsonl");
  const bool nonempty = !slurp(dir / "a.jsonl").empty();
  fs::remove_all(dir);
  return {models && manifests && nonempty,
          std::string("model files ") + (models ? "identical" : "differ") +
              ", manifests " + (manifests ? "identical" : "differ")};
}
//==============================================================================
// read(write(X)) == X on random corpora.
Outcome shard_round_trip() {
  std::mt19937_64 rng(107);
  std::size_t failures = 0;
  std::size_t empty = 0;
  std::size_t single = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d_model = static_cast<std::uint32_t>(1 + rng() % 16);
    const std::size_t count = trial % 50 == 0 ? 0 : rng() % 8;
    std::vector<DataItem> items =
        count == 0 ? std::vector<DataItem>{}
                   : oracle::random_items(rng, count, 6, d_model);
    if (!items.empty() && trial % 3 == 0) {
      items[0].records.resize(1);
    }
    empty += items.empty() ? 1 : 0;
    for (const DataItem& item : items) {
      single += item.size() == 1 ? 1 : 0;
    }
    std::stringstream buffer;
    write_shard(items, d_model, buffer);
    ShardReader reader(std::make_unique<std::stringstream>(buffer.str()),
                       "memory");
    std::vector<DataItem> back;
    while (auto item = reader.next()) {
      back.push_back(std::move(*item));
    }
    const bool same = reader.header().d_model == d_model &&
                      reader.header().record_count ==
                          std::accumulate(items.begin(), items.end(),
                                          std::uint64_t{0},
                                          [](std::uint64_t acc,
                                             const DataItem& item) {
                                            return acc + item.size();
                                          }) &&
                      back == items;
    failures += same ? 0 : 1;
  }
  return {failures == 0, "1000 corpora (" + std::to_string(empty) +
                             " empty, " + std::to_string(single) +
                             " single-token items), " +
                             std::to_string(failures) + " mismatches"};
}
//==============================================================================
// Pearson examples and affine invariance.
Outcome pearson_checks() {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> neg{-1, -2, -3};
  const std::vector<double> y{2, 4, 7};
  const double same = pearson(x, x);
  const double opposite = pearson(x, neg);
  const double mixed = pearson(x, y);
  bool ok = std::abs(same - 1.0) <= 1e-12 &&
            std::abs(opposite + 1.0) <= 1e-12 &&
            std::abs(mixed - 0.9934) <= 1e-3;

  std::mt19937_64 rng(108);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> positive(0.01, 100.0);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5 + trial % 50);
    std::vector<double> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = gauss(rng);
      b[i] = 0.5 * a[i] + gauss(rng);
    }
    const double scale = positive(rng);
    const double shift = 10 * gauss(rng);
    std::vector<double> moved(a.size());
    std::transform(a.begin(), a.end(), moved.begin(),
                   [&](double v) { return scale * v + shift; });
    worst = std::max(worst, std::abs(pearson(moved, b) - pearson(a, b)));
  }
  ok = ok && worst <= 1e-9;
  return {ok, "r = " + fmt(same) + ", " + fmt(opposite) + ", " + fmt(mixed) +
                  "; affine drift " + fmt(worst)};
}

}  // namespace
//==============================================================================
int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"gradient finite differences", 60, gradient_check},
      {"planted dictionary recovery", 600, planted_recovery},
      {"ranking oracle equivalence", 60, ranking_equivalence},
      {"cross-modal weight examples", 60, eq7_examples},
      {"patch filter properties", 60, patch_properties},
      {"train/rank determinism", 300, cli_determinism},
      {"shard round trip", 60, shard_round_trip},
      {"pearson utility", 60, pearson_checks},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    if (seconds > c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    failed += outcome.pass ? 0 : 1;
    std::printf("%s  %-30s %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL",
                c.name, outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
