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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "saev/corpus.hpp"
#include "saev/sae.hpp"
//==============================================================================
namespace saev {
//==============================================================================
// Defaults shared by the ranking algorithms and the patch filters.
inline constexpr double kDefaultDelta = 1.0;
inline constexpr std::size_t kDefaultTopK = 5;
inline constexpr std::size_t kDefaultSampleSize = 1000;
inline constexpr std::size_t kDefaultMaxTokensPerFeature = 1024;

/// floor(fraction * count), tolerant of fractions like 0.29 whose product
/// lands a hair below the integer.
[[nodiscard]] std::size_t retained_count(double fraction, std::size_t count);

/// Per-token feature activity of one item at activation bound delta.
struct ItemFeatureSets {
  /// Feature k fires (z > delta) on some token of the item.
  std::vector<std::uint8_t> active;
  /// Feature k fires on at least one text AND one vision token.
  std::vector<std::uint8_t> cooccurring;
};

[[nodiscard]] ItemFeatureSets item_feature_sets(const DataItem& item,
                                                const MatrixF& z,
                                                double delta);
//==============================================================================
// Activation tokens per feature
//==============================================================================
struct ActivationSample {
  std::uint32_t token = 0;  // index into FeatureTokenSample's token pool
  float activation = 0;
};

struct FeatureTokens {
  // Sorted by activation, descending; ties keep collection order.
  std::vector<ActivationSample> text;
  std::vector<ActivationSample> vision;
};

struct FeatureTokenSample {
  std::uint32_t d_model = 0;
  double delta = kDefaultDelta;
  std::size_t max_tokens_per_feature = kDefaultMaxTokensPerFeature;
  std::vector<std::uint64_t> sampled_items;

  // Pool of hidden vectors referenced by the per-feature lists.
  std::vector<float> hidden;  // stride d_model
  std::vector<Modality> modality;
  std::vector<std::uint64_t> item_id;
  std::vector<std::uint32_t> token_index;

  std::vector<FeatureTokens> features;  // size n

  [[nodiscard]] std::span<const float> hidden_of(std::uint32_t token) const {
    return {hidden.data() + static_cast<std::size_t>(token) * d_model,
            d_model};
  }
};

struct CollectOptions {
  double delta = kDefaultDelta;
  std::size_t sample_size = kDefaultSampleSize;
  std::uint64_t seed = 42;
  /// Cap per feature and per modality.
  std::size_t max_tokens_per_feature = kDefaultMaxTokensPerFeature;
};

/// Samples sample_size items without replacement (all items if fewer),
/// encodes them and records every (token, feature) pair with z > delta.
[[nodiscard]] FeatureTokenSample collect_activations(
    const ItemSource& source, const SaeModel& model,
    const CollectOptions& options = {});
//==============================================================================
// Cross-modal weights
//==============================================================================
struct CrossModalWeights {
  std::vector<double> omega;
  double delta = kDefaultDelta;
  std::size_t top_k = kDefaultTopK;
  std::size_t sample_size = kDefaultSampleSize;
};

/// Mean cosine between the i-th strongest text and i-th strongest vision
/// hidden vector, over the first min(K, |text|, |vision|) pairs. Features
/// missing either modality get 0.
[[nodiscard]] CrossModalWeights cross_modal_weight(
    const FeatureTokenSample& sample, std::size_t top_k = kDefaultTopK);

/// Rank-paired mean cosine of two lists of vectors; the kernel behind
/// cross_modal_weight.
[[nodiscard]] double paired_cosine(
    std::span<const std::span<const float>> text,
    std::span<const std::span<const float>> vision, std::size_t top_k);

/// Mean of the nonzero weights; DegenerateInputError if all are zero.
[[nodiscard]] double average_model_score(const CrossModalWeights& weights);

[[nodiscard]] nlohmann::json to_json(const CrossModalWeights& weights);
[[nodiscard]] CrossModalWeights weights_from_json(const nlohmann::json& j);
void save_weights(const CrossModalWeights& weights,
                  const std::filesystem::path& path);
[[nodiscard]] CrossModalWeights load_weights(
    const std::filesystem::path& path);
//==============================================================================
// Item ranking
//==============================================================================
enum class RankMethod { kCosine, kL0, kCooccur };

[[nodiscard]] std::string_view to_string(RankMethod method) noexcept;
[[nodiscard]] std::optional<RankMethod> parse_rank_method(
    std::string_view text) noexcept;

struct RankedEntry {
  std::uint64_t item_id = 0;
  double score = 0;
  std::size_t position = 0;  // index in the input corpus

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedManifest {
  RankMethod method = RankMethod::kCosine;
  std::vector<RankedEntry> entries;  // best first
};

/// Orders entries by score, descending, keeping input order among ties.
void sort_manifest(RankedManifest& manifest);

struct RankOptions {
  double delta = kDefaultDelta;
  std::size_t threads = 1;
};

/// s_i = sum of omega_k over features active on item i.
[[nodiscard]] RankedManifest rank_cosine(const ItemSource& source,
                                         const SaeModel& model,
                                         const CrossModalWeights& weights,
                                         const RankOptions& options = {});
/// s_i = number of features active on item i.
[[nodiscard]] RankedManifest rank_l0(const ItemSource& source,
                                     const SaeModel& model,
                                     const RankOptions& options = {});
/// s_i = number of features active on both a text and a vision token.
[[nodiscard]] RankedManifest rank_cooccur(const ItemSource& source,
                                          const SaeModel& model,
                                          const RankOptions& options = {});

/// JSON lines: {"item_id", "score", "rank" (1-based), "method"}.
void write_manifest(const RankedManifest& manifest, std::ostream& out);
void save_manifest(const RankedManifest& manifest,
                   const std::filesystem::path& path);
[[nodiscard]] RankedManifest read_manifest(std::istream& in);
[[nodiscard]] RankedManifest load_manifest(const std::filesystem::path& path);

/// The first floor(retention * size) item ids of the manifest.
[[nodiscard]] std::vector<std::uint64_t> filter_manifest(
    const RankedManifest& manifest, double retention);
//==============================================================================
}  // namespace saev
//==============================================================================
