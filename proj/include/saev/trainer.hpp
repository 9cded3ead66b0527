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
#pragma once
//==============================================================================
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "saev/corpus.hpp"
#include "saev/sae.hpp"
//==============================================================================
namespace saev {
//==============================================================================
/// Training hyperparameters. Defaults are the reference settings for
/// a 4096-wide residual stream.
struct TrainConfig {
  std::uint64_t total_steps = 30000;
  std::uint32_t batch_size = 4096;  // tokens per step
  double lr = 5e-5;
  std::uint64_t lr_warmup_steps = 1500;
  std::uint64_t lr_decay_steps = 6000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lambda = 5.0;  // L1 coefficient
  std::uint64_t feature_sampling_window = 1000;
  std::uint64_t dead_feature_window = 1000;
  double dead_feature_threshold = 1e-4;
  std::uint64_t seed = 42;
  std::uint32_t expansion_factor = 16;  // n = expansion_factor * m
  std::uint32_t buffer_batches_num = 32;
};

void validate(const TrainConfig& config);

/// Reads `key = value` lines (blank lines and `#` comments allowed). Keys are
/// the TrainConfig field names; unknown keys are rejected.
[[nodiscard]] TrainConfig parse_train_config(std::istream& in,
                                             TrainConfig base = {});
[[nodiscard]] TrainConfig load_train_config(const std::filesystem::path& path,
                                            TrainConfig base = {});
/// Applies one key/value pair; throws InvalidArgumentError on a bad key or
/// value.
void set_config_value(TrainConfig& config, const std::string& key,
                      const std::string& value);
/// The config in the same key = value format parse_train_config reads.
[[nodiscard]] std::string format_train_config(const TrainConfig& config);

/// Warmup / plateau / linear decay to zero over the last lr_decay_steps.
[[nodiscard]] double lr_at(std::uint64_t step, const TrainConfig& config);

/// Unit-norm random dictionary rows with a tied encoder (w_enc = dictionary)
/// and zero bias. n = expansion_factor * m.
[[nodiscard]] SaeModel init_model(std::uint32_t m, const TrainConfig& config);
//==============================================================================
struct StepRecord {
  std::uint64_t step = 0;
  double recon = 0;
  double l1 = 0;
  double total = 0;
  double lr = 0;
  std::uint64_t dead_count = 0;
};

/// Comma-separated loss table: step,recon,l1,total,lr,dead_count.
void write_loss_history(const std::vector<StepRecord>& history,
                        std::ostream& out);

/// Feature liveness summary logged every feature_sampling_window steps.
struct FeatureActivity {
  std::uint64_t step = 0;
  std::uint64_t active_features = 0;  // fired at least once in the window
  double mean_l0 = 0;                 // per-token, averaged over the window
};

struct TrainState {
  std::uint64_t step = 0;
  Gradients<float> first_moment;
  Gradients<float> second_moment;
  /// dead_feature_window x n: per-step maximum activation of each feature.
  MatrixF max_activation;
  std::uint64_t window_filled = 0;
  std::mt19937_64 rng;

  TrainState(const SaeModel& model, const TrainConfig& config);
};

/// One optimizer step on a batch (rows are tokens): gradient, radial
/// component of the dictionary gradient removed, Adam update, dictionary
/// rows renormalized. Throws DivergenceError on a non-finite loss.
StepRecord train_step(SaeModel& model, TrainState& state,
                      const MatrixF& batch, const TrainConfig& config);

/// Reinitializes every feature whose maximum activation over the window
/// stayed below dead_feature_threshold. Requires a full window.
std::size_t resample_dead(SaeModel& model, TrainState& state,
                          const MatrixF& recent_batch,
                          const TrainConfig& config);
//==============================================================================
/// Shuffling reservoir of buffer_batches_num * batch_size tokens, refilled
/// sequentially from the source and cycling over it indefinitely.
class TokenBuffer {
 public:
  TokenBuffer(const ItemSource& source, const TrainConfig& config);

  [[nodiscard]] MatrixF next_batch();

 private:
  void pull_token(Eigen::Index slot);

  const ItemSource& source_;
  std::unique_ptr<ItemCursor> cursor_;
  const DataItem* item_ = nullptr;
  std::size_t token_ = 0;
  std::uint32_t batch_size_;
  MatrixF reservoir_;
  std::mt19937_64 rng_;
};

struct TrainResult {
  SaeModel model;
  std::vector<StepRecord> history;
  std::vector<FeatureActivity> activity;
};

[[nodiscard]] TrainResult train(const ItemSource& source,
                                const TrainConfig& config);
/// Continues from an existing model instead of init_model.
[[nodiscard]] TrainResult train(const ItemSource& source,
                                const TrainConfig& config, SaeModel initial);
//==============================================================================
}  // namespace saev
//==============================================================================
