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
#include "saev/patchfilter.hpp"
//==============================================================================
#include <algorithm>
#include <cmath>
#include <string_view>
#include <charconv>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "saev/errors.hpp"
//==============================================================================
namespace saev {
//==============================================================================
std::string_view to_string(PatchMethod method) noexcept {
  switch (method) {
    case PatchMethod::kL0:
      return "l0";
    case PatchMethod::kL1:
      return "l1";
    case PatchMethod::kCooccur:
      return "cooccur";
    case PatchMethod::kCosine:
      return "cosine";
  }
  return "unknown";
}

std::optional<PatchMethod> parse_patch_method(std::string_view text) noexcept {
  for (PatchMethod m : {PatchMethod::kL0, PatchMethod::kL1,
                        PatchMethod::kCooccur, PatchMethod::kCosine}) {
    if (to_string(m) == text) {
      return m;
    }
  }
  return std::nullopt;
}

PatchScores score_patches(const DataItem& item, const SaeModel& model,
                          PatchMethod method, double delta,
                          const CrossModalWeights* weights) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw InvalidArgumentError("activation bound delta must be >= 0");
  }
  if (!item.has(Modality::kVision)) {
    throw PreconditionError("item " + std::to_string(item.item_id) +
                            " has no vision tokens");
  }
  const bool cross_modal =
      method == PatchMethod::kCooccur || method == PatchMethod::kCosine;
  if (cross_modal && !item.has(Modality::kText)) {
    throw PreconditionError("item " + std::to_string(item.item_id) +
                            " needs text tokens for the " +
                            std::string(to_string(method)) + " patch filter");
  }
  if (method == PatchMethod::kCosine) {
    if (weights == nullptr) {
      throw MissingInputError("cosine patch filter needs cross-modal weights");
    }
    if (static_cast<Eigen::Index>(weights->omega.size()) != model.n()) {
      throw DimensionError("weights do not match model feature count");
    }
  }

  const MatrixF z = encode(hidden_matrix(item), model).z;
  std::vector<std::uint8_t> counted;
  if (cross_modal) {
    counted = item_feature_sets(item, z, delta).cooccurring;
    if (method == PatchMethod::kCosine) {
      for (std::size_t k = 0; k < counted.size(); ++k) {
        if (!(weights->omega[k] > 0.0)) {
          counted[k] = 0;
        }
      }
    }
  }

  PatchScores out;
  out.item_id = item.item_id;
  out.method = method;
  out.delta = delta;
  for (std::size_t j = 0; j < item.records.size(); ++j) {
    const TokenRecord& rec = item.records[j];
    if (rec.modality != Modality::kVision) {
      continue;
    }
    const auto row = static_cast<Eigen::Index>(j);
    double p = 0.0;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const double a = z(row, k);
      const auto kk = static_cast<std::size_t>(k);
      switch (method) {
        case PatchMethod::kL0:
          p += a > delta ? 1.0 : 0.0;
          break;
        case PatchMethod::kL1:
          p += a;
          break;
        case PatchMethod::kCooccur:
          p += (a > delta && counted[kk] != 0) ? 1.0 : 0.0;
          break;
        case PatchMethod::kCosine:
          p += (a > delta && counted[kk] != 0) ? weights->omega[kk] : 0.0;
          break;
      }
    }
    out.patches.push_back({rec.token_index, p});
  }
  return out;
}

PatchMask make_mask(const PatchScores& scores, double gamma) {
  PatchMask mask;
  mask.item_id = scores.item_id;
  mask.gamma = gamma;
  mask.method = scores.method;
  const std::size_t keep = retained_count(gamma, scores.patches.size());

  std::vector<std::size_t> order(scores.patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const PatchScore& pa = scores.patches[a];
    const PatchScore& pb = scores.patches[b];
    return pa.score > pb.score ||
           (pa.score == pb.score && pa.token_index < pb.token_index);
  });
  mask.kept.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    mask.kept.push_back(scores.patches[order[i]].token_index);
  }
  std::sort(mask.kept.begin(), mask.kept.end());
  return mask;
}

void write_mask(const PatchMask& mask, std::ostream& out) {
  out << nlohmann::json{{"item_id", mask.item_id},
                        {"gamma", mask.gamma},
                        {"method", std::string(to_string(mask.method))},
                        {"kept", mask.kept}}
             .dump()
      << '\n';
}

void write_patch_scores(const PatchScores& scores, std::ostream& out) {
  const std::string method(to_string(scores.method));
  char buf[32];
  for (const PatchScore& p : scores.patches) {
    const auto res = std::to_chars(buf, buf + sizeof buf, p.score);
    out << scores.item_id << ',' << p.token_index << ',' << method << ','
        << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
        << '\n';
  }
}
//==============================================================================
}  // namespace saev
//==============================================================================
