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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "saev/corpus.hpp"
#include "saev/sae.hpp"
//==============================================================================
namespace saev {
//==============================================================================
struct EvalReport {
  double mean_l0 = 0;
  double mean_l1 = 0;
  double mean_recon = 0;
  double mean_zero_baseline = 0;
  std::uint64_t token_count = 0;
  std::string model_id;
  std::vector<std::string> shard_ids;
};

struct EvalOptions {
  /// Divide reconstruction sums by tokens instead of items.
  bool per_token_recon = false;
  std::string model_id;
  std::vector<std::string> shard_ids;
  std::size_t threads = 1;
};

/// One pass over the corpus. L0 and L1 are per-token means; reconstruction
/// loss and the zero baseline are per-item sums averaged over items.
[[nodiscard]] EvalReport evaluate(const ItemSource& source,
                                  const SaeModel& model,
                                  const EvalOptions& options = {});

[[nodiscard]] nlohmann::json to_json(const EvalReport& report);
[[nodiscard]] EvalReport eval_report_from_json(const nlohmann::json& j);

/// Sample Pearson correlation.
[[nodiscard]] double pearson(std::span<const double> xs,
                             std::span<const double> ys);

/// (id, score) rows. Accepts comma or whitespace separators and skips a
/// header line whose score column is not numeric.
using ScoreTable = std::vector<std::pair<std::string, double>>;

[[nodiscard]] ScoreTable read_score_table(const std::filesystem::path& path);

/// Pearson over ids present in both tables, paired in the order of `xs`.
[[nodiscard]] double correlate(const ScoreTable& xs, const ScoreTable& ys);
//==============================================================================
}  // namespace saev
//==============================================================================
