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
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "saev/corpus.hpp"
#include "saev/ranking.hpp"
#include "saev/sae.hpp"
//==============================================================================
namespace saev {
//==============================================================================
enum class PatchMethod { kL0, kL1, kCooccur, kCosine };

[[nodiscard]] std::string_view to_string(PatchMethod method) noexcept;
[[nodiscard]] std::optional<PatchMethod> parse_patch_method(
    std::string_view text) noexcept;

struct PatchScore {
  std::uint32_t token_index = 0;
  double score = 0;
};

/// One score per vision token of an item, in token order.
struct PatchScores {
  std::uint64_t item_id = 0;
  PatchMethod method = PatchMethod::kL0;
  double delta = kDefaultDelta;
  std::vector<PatchScore> patches;
};

/// Scores the vision tokens of `item`:
///   l0      count of features with z > delta
///   l1      sum of all activations
///   cooccur l0 restricted to features firing on a text and a vision token
///   cosine  sum of positive omega_k over the cooccur-counted features
/// cooccur and cosine need both modalities; cosine needs weights.
[[nodiscard]] PatchScores score_patches(
    const DataItem& item, const SaeModel& model, PatchMethod method,
    double delta = kDefaultDelta, const CrossModalWeights* weights = nullptr);

struct PatchMask {
  std::uint64_t item_id = 0;
  double gamma = 1.0;
  PatchMethod method = PatchMethod::kL0;
  std::vector<std::uint32_t> kept;  // ascending token indices
};

/// Keeps the floor(gamma * patches) best-scoring patches; among equal scores
/// the lower token index wins.
[[nodiscard]] PatchMask make_mask(const PatchScores& scores, double gamma);

/// JSON line: {"item_id", "gamma", "method", "kept"}.
void write_mask(const PatchMask& mask, std::ostream& out);
/// CSV rows item_id,token_index,method,score (no header).
void write_patch_scores(const PatchScores& scores, std::ostream& out);
//==============================================================================
}  // namespace saev
//==============================================================================
