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
#include "saev/ranking.hpp"
//==============================================================================
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "saev/errors.hpp"
#include "saev/parallel.hpp"
//==============================================================================
namespace saev {
//==============================================================================
std::size_t retained_count(double fraction, std::size_t count) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InvalidArgumentError("fraction must lie in [0, 1]");
  }
  const double product = fraction * static_cast<double>(count);
  return std::min(count, static_cast<std::size_t>(std::floor(product + 1e-9)));
}

ItemFeatureSets item_feature_sets(const DataItem& item, const MatrixF& z,
                                  double delta) {
  if (static_cast<std::size_t>(z.rows()) != item.records.size()) {
    throw DimensionError("activation rows do not match item tokens");
  }
  const auto n = static_cast<std::size_t>(z.cols());
  ItemFeatureSets sets;
  sets.active.assign(n, 0);
  sets.cooccurring.assign(n, 0);
  std::vector<std::uint8_t> on_text(n, 0);
  std::vector<std::uint8_t> on_vision(n, 0);
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    auto& side = item.records[static_cast<std::size_t>(j)].modality ==
                         Modality::kVision
                     ? on_vision
                     : on_text;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      if (static_cast<double>(z(j, k)) > delta) {
        side[static_cast<std::size_t>(k)] = 1;
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    sets.active[k] = on_text[k] | on_vision[k];
    sets.cooccurring[k] = on_text[k] & on_vision[k];
  }
  return sets;
}
//==============================================================================
namespace {

// Heap order with the weakest sample on top: lower activation is weaker,
// and among equal activations the later-collected token is weaker.
bool stronger(const ActivationSample& a, const ActivationSample& b) {
  return a.activation > b.activation ||
         (a.activation == b.activation && a.token < b.token);
}

void offer(std::vector<ActivationSample>& heap, ActivationSample sample,
           std::size_t cap) {
  if (heap.size() < cap) {
    heap.push_back(sample);
    std::push_heap(heap.begin(), heap.end(), stronger);
  } else if (stronger(sample, heap.front())) {
    std::pop_heap(heap.begin(), heap.end(), stronger);
    heap.back() = sample;
    std::push_heap(heap.begin(), heap.end(), stronger);
  }
}

void check_model_width(const ItemSource& source, const SaeModel& model) {
  if (source.d_model() != 0 &&
      static_cast<Eigen::Index>(source.d_model()) != model.m()) {
    throw DimensionError("shard d_model " + std::to_string(source.d_model()) +
                         " does not match model m " +
                         std::to_string(model.m()));
  }
}

}  // namespace

FeatureTokenSample collect_activations(const ItemSource& source,
                                       const SaeModel& model,
                                       const CollectOptions& options) {
  if (!(options.delta >= 0.0) || !std::isfinite(options.delta)) {
    throw InvalidArgumentError("activation bound delta must be >= 0");
  }
  if (options.sample_size == 0) {
    throw InvalidArgumentError("sample_size must be >= 1");
  }
  if (options.max_tokens_per_feature == 0) {
    throw InvalidArgumentError("max_tokens_per_feature must be >= 1");
  }
  validate(model);
  check_model_width(source, model);

  std::size_t item_count = 0;
  {
    auto cursor = source.open();
    while (cursor->next() != nullptr) {
      ++item_count;
    }
  }
  if (item_count == 0) {
    throw EmptyInputError("cannot sample activations from an empty corpus");
  }

  std::vector<std::size_t> ordinals(item_count);
  std::iota(ordinals.begin(), ordinals.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  chosen.reserve(std::min(options.sample_size, item_count));
  std::mt19937_64 rng(options.seed);
  std::sample(ordinals.begin(), ordinals.end(), std::back_inserter(chosen),
              options.sample_size, rng);

  FeatureTokenSample sample;
  sample.d_model = static_cast<std::uint32_t>(model.m());
  sample.delta = options.delta;
  sample.max_tokens_per_feature = options.max_tokens_per_feature;
  sample.features.resize(static_cast<std::size_t>(model.n()));

  auto cursor = source.open();
  std::size_t ordinal = 0;
  for (std::size_t next_pick : chosen) {
    const DataItem* item = nullptr;
    while (ordinal <= next_pick) {
      item = cursor->next();
      ++ordinal;
    }
    sample.sampled_items.push_back(item->item_id);
    const MatrixF h = hidden_matrix(*item);
    const MatrixF z = encode(h, model).z;
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
      const TokenRecord& rec = item->records[static_cast<std::size_t>(j)];
      std::optional<std::uint32_t> pooled;
      for (Eigen::Index k = 0; k < z.cols(); ++k) {
        const float a = z(j, k);
        if (!(static_cast<double>(a) > options.delta)) {
          continue;
        }
        if (!pooled) {
          pooled = static_cast<std::uint32_t>(sample.modality.size());
          sample.hidden.insert(sample.hidden.end(), rec.hidden.begin(),
                               rec.hidden.end());
          sample.modality.push_back(rec.modality);
          sample.item_id.push_back(rec.item_id);
          sample.token_index.push_back(rec.token_index);
        }
        auto& lists = sample.features[static_cast<std::size_t>(k)];
        offer(rec.modality == Modality::kVision ? lists.vision : lists.text,
              {*pooled, a}, options.max_tokens_per_feature);
      }
    }
  }
  for (auto& lists : sample.features) {
    std::sort_heap(lists.text.begin(), lists.text.end(), stronger);
    std::sort_heap(lists.vision.begin(), lists.vision.end(), stronger);
  }
  return sample;
}
//==============================================================================
double paired_cosine(std::span<const std::span<const float>> text,
                     std::span<const std::span<const float>> vision,
                     std::size_t top_k) {
  if (top_k == 0) {
    throw InvalidArgumentError("top_k must be >= 1");
  }
  const std::size_t pairs = std::min({top_k, text.size(), vision.size()});
  if (pairs == 0) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto& t = text[i];
    const auto& v = vision[i];
    if (t.size() != v.size()) {
      throw DimensionError("paired_cosine vectors differ in length");
    }
    double dot = 0.0;
    double tt = 0.0;
    double vv = 0.0;
    for (std::size_t d = 0; d < t.size(); ++d) {
      dot += static_cast<double>(t[d]) * v[d];
      tt += static_cast<double>(t[d]) * t[d];
      vv += static_cast<double>(v[d]) * v[d];
    }
    if (tt > 0.0 && vv > 0.0) {
      sum += dot / (std::sqrt(tt) * std::sqrt(vv));
    }
  }
  return std::clamp(sum / static_cast<double>(pairs), -1.0, 1.0);
}

CrossModalWeights cross_modal_weight(const FeatureTokenSample& sample,
                                     std::size_t top_k) {
  if (top_k == 0) {
    throw InvalidArgumentError("top_k must be >= 1");
  }
  CrossModalWeights weights;
  weights.delta = sample.delta;
  weights.top_k = top_k;
  weights.sample_size = sample.sampled_items.size();
  weights.omega.assign(sample.features.size(), 0.0);

  std::vector<std::span<const float>> text;
  std::vector<std::span<const float>> vision;
  for (std::size_t k = 0; k < sample.features.size(); ++k) {
    const FeatureTokens& lists = sample.features[k];
    text.clear();
    vision.clear();
    for (std::size_t i = 0; i < std::min(top_k, lists.text.size()); ++i) {
      text.push_back(sample.hidden_of(lists.text[i].token));
    }
    for (std::size_t i = 0; i < std::min(top_k, lists.vision.size()); ++i) {
      vision.push_back(sample.hidden_of(lists.vision[i].token));
    }
    weights.omega[k] = paired_cosine(text, vision, top_k);
  }
  return weights;
}

double average_model_score(const CrossModalWeights& weights) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double w : weights.omega) {
    if (w != 0.0) {
      sum += w;
      ++count;
    }
  }
  if (count == 0) {
    throw DegenerateInputError("every cross-modal weight is zero");
  }
  return sum / static_cast<double>(count);
}

nlohmann::json to_json(const CrossModalWeights& weights) {
  return nlohmann::json{{"delta", weights.delta},
                        {"top_k", weights.top_k},
                        {"sample_size", weights.sample_size},
                        {"omega", weights.omega}};
}

CrossModalWeights weights_from_json(const nlohmann::json& j) {
  CrossModalWeights weights;
  try {
    weights.delta = j.at("delta").get<double>();
    weights.top_k = j.at("top_k").get<std::size_t>();
    weights.sample_size = j.at("sample_size").get<std::size_t>();
    weights.omega = j.at("omega").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed weights JSON: ") + e.what());
  }
  for (double w : weights.omega) {
    if (!(w >= -1.0 && w <= 1.0)) {
      throw FormatError("cross-modal weight outside [-1, 1]");
    }
  }
  return weights;
}

void save_weights(const CrossModalWeights& weights,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open weights for writing: " + path.string());
  }
  out << to_json(weights).dump() << '\n';
  if (!out) {
    throw IoError("failed writing weights: " + path.string());
  }
}

CrossModalWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open weights: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return weights_from_json(j);
}
//==============================================================================
std::string_view to_string(RankMethod method) noexcept {
  switch (method) {
    case RankMethod::kCosine:
      return "cosine";
    case RankMethod::kL0:
      return "l0";
    case RankMethod::kCooccur:
      return "cooccur";
  }
  return "unknown";
}

std::optional<RankMethod> parse_rank_method(std::string_view text) noexcept {
  for (RankMethod m :
       {RankMethod::kCosine, RankMethod::kL0, RankMethod::kCooccur}) {
    if (to_string(m) == text) {
      return m;
    }
  }
  return std::nullopt;
}

void sort_manifest(RankedManifest& manifest) {
  std::stable_sort(manifest.entries.begin(), manifest.entries.end(),
                   [](const RankedEntry& a, const RankedEntry& b) {
                     return a.score > b.score;
                   });
}

namespace {

template <typename Score>
RankedManifest rank_items(const ItemSource& source, const SaeModel& model,
                          RankMethod method, const RankOptions& options,
                          Score score) {
  if (!(options.delta >= 0.0) || !std::isfinite(options.delta)) {
    throw InvalidArgumentError("activation bound delta must be >= 0");
  }
  validate(model);
  check_model_width(source, model);
  RankedManifest manifest;
  manifest.method = method;
  map_reduce_items<RankedEntry>(
      source, options.threads,
      [&](const DataItem& item) {
        const MatrixF z = encode(hidden_matrix(item), model).z;
        return RankedEntry{item.item_id,
                           score(item_feature_sets(item, z, options.delta)),
                           0};
      },
      [&](RankedEntry entry) {
        entry.position = manifest.entries.size();
        manifest.entries.push_back(entry);
      });
  sort_manifest(manifest);
  return manifest;
}

}  // namespace

RankedManifest rank_cosine(const ItemSource& source, const SaeModel& model,
                           const CrossModalWeights& weights,
                           const RankOptions& options) {
  if (static_cast<Eigen::Index>(weights.omega.size()) != model.n()) {
    throw DimensionError("weights cover " +
                         std::to_string(weights.omega.size()) +
                         " features, model has " + std::to_string(model.n()));
  }
  return rank_items(source, model, RankMethod::kCosine, options,
                    [&](const ItemFeatureSets& sets) {
                      double s = 0.0;
                      for (std::size_t k = 0; k < sets.active.size(); ++k) {
                        if (sets.active[k] != 0) {
                          s += weights.omega[k];
                        }
                      }
                      return s;
                    });
}

RankedManifest rank_l0(const ItemSource& source, const SaeModel& model,
                       const RankOptions& options) {
  return rank_items(source, model, RankMethod::kL0, options,
                    [](const ItemFeatureSets& sets) {
                      return static_cast<double>(std::count(
                          sets.active.begin(), sets.active.end(), 1));
                    });
}

RankedManifest rank_cooccur(const ItemSource& source, const SaeModel& model,
                            const RankOptions& options) {
  return rank_items(source, model, RankMethod::kCooccur, options,
                    [](const ItemFeatureSets& sets) {
                      return static_cast<double>(std::count(
                          sets.cooccurring.begin(), sets.cooccurring.end(), 1));
                    });
}
//==============================================================================
void write_manifest(const RankedManifest& manifest, std::ostream& out) {
  const std::string method(to_string(manifest.method));
  for (std::size_t r = 0; r < manifest.entries.size(); ++r) {
    const RankedEntry& e = manifest.entries[r];
    out << nlohmann::json{{"item_id", e.item_id},
                          {"score", e.score},
                          {"rank", r + 1},
                          {"method", method}}
               .dump()
        << '\n';
  }
}

void save_manifest(const RankedManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open manifest for writing: " + path.string());
  }
  write_manifest(manifest, out);
  if (!out) {
    throw IoError("failed writing manifest: " + path.string());
  }
}

RankedManifest read_manifest(std::istream& in) {
  RankedManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      const auto method = parse_rank_method(j.at("method").get<std::string>());
      if (!method) {
        throw FormatError("manifest line " + std::to_string(line_no) +
                          ": unknown method");
      }
      if (manifest.entries.empty()) {
        manifest.method = *method;
      } else if (*method != manifest.method) {
        throw FormatError("manifest mixes ranking methods");
      }
      const auto rank = j.at("rank").get<std::size_t>();
      if (rank != manifest.entries.size() + 1) {
        throw FormatError("manifest line " + std::to_string(line_no) +
                          ": ranks must run 1, 2, 3, ...");
      }
      manifest.entries.push_back(RankedEntry{
          j.at("item_id").get<std::uint64_t>(), j.at("score").get<double>(),
          manifest.entries.size()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return manifest;
}

RankedManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest: " + path.string());
  }
  return read_manifest(in);
}

std::vector<std::uint64_t> filter_manifest(const RankedManifest& manifest,
                                           double retention) {
  const std::size_t keep = retained_count(retention, manifest.entries.size());
  std::vector<std::uint64_t> ids;
  ids.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    ids.push_back(manifest.entries[i].item_id);
  }
  return ids;
}
//==============================================================================
}  // namespace saev
//==============================================================================
