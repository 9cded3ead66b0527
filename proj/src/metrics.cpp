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
#include "saev/metrics.hpp"
//==============================================================================
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "saev/errors.hpp"
#include "saev/parallel.hpp"
//==============================================================================
namespace saev {
//==============================================================================
namespace {

struct ItemStats {
  double l0 = 0;  // summed over tokens
  double l1 = 0;
  double recon = 0;
  double baseline = 0;
  std::uint64_t tokens = 0;
};

}  // namespace

EvalReport evaluate(const ItemSource& source, const SaeModel& model,
                    const EvalOptions& options) {
  validate(model);
  if (source.d_model() != 0 &&
      static_cast<Eigen::Index>(source.d_model()) != model.m()) {
    throw DimensionError("shard d_model " + std::to_string(source.d_model()) +
                         " does not match model m " +
                         std::to_string(model.m()));
  }

  ItemStats total;
  std::uint64_t items = 0;
  map_reduce_items<ItemStats>(
      source, options.threads,
      [&](const DataItem& item) {
        const MatrixF h = hidden_matrix(item);
        const auto acts = encode(h, model, item.item_id);
        ItemStats s;
        s.tokens = static_cast<std::uint64_t>(h.rows());
        s.l0 = static_cast<double>((acts.z.array() > 0.0F).count());
        s.l1 = acts.z.cast<double>().sum();
        s.recon = static_cast<double>(
            reconstruction_loss(h, decode(acts.z, model)));
        s.baseline = static_cast<double>(zero_baseline(h));
        return s;
      },
      [&](ItemStats s) {
        total.l0 += s.l0;
        total.l1 += s.l1;
        total.recon += s.recon;
        total.baseline += s.baseline;
        total.tokens += s.tokens;
        ++items;
      });
  if (total.tokens == 0) {
    throw EmptyInputError("evaluation corpus has no tokens");
  }

  EvalReport report;
  const auto tokens = static_cast<double>(total.tokens);
  const double recon_denominator =
      options.per_token_recon ? tokens : static_cast<double>(items);
  report.mean_l0 = total.l0 / tokens;
  report.mean_l1 = total.l1 / tokens;
  report.mean_recon = total.recon / recon_denominator;
  report.mean_zero_baseline = total.baseline / recon_denominator;
  report.token_count = total.tokens;
  report.model_id = options.model_id;
  report.shard_ids = options.shard_ids;
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  return nlohmann::json{{"mean_l0", report.mean_l0},
                        {"mean_l1", report.mean_l1},
                        {"mean_recon", report.mean_recon},
                        {"mean_zero_baseline", report.mean_zero_baseline},
                        {"token_count", report.token_count},
                        {"model_id", report.model_id},
                        {"shard_ids", report.shard_ids}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport report;
  report.mean_l0 = j.at("mean_l0").get<double>();
  report.mean_l1 = j.at("mean_l1").get<double>();
  report.mean_recon = j.at("mean_recon").get<double>();
  report.mean_zero_baseline = j.at("mean_zero_baseline").get<double>();
  report.token_count = j.at("token_count").get<std::uint64_t>();
  report.model_id = j.at("model_id").get<std::string>();
  report.shard_ids = j.at("shard_ids").get<std::vector<std::string>>();
  return report;
}
//==============================================================================
double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw DimensionError("pearson needs equal-length inputs");
  }
  if (xs.size() < 2) {
    throw DegenerateInputError("pearson needs at least two points");
  }
  const auto count = static_cast<double>(xs.size());
  double mean_x = 0;
  double mean_y = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= count;
  mean_y /= count;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mean_x;
    const double dy = ys[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateInputError("pearson input has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open score table: " + path.string());
  }
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::string id;
    std::string score_text;
    if (!(fields >> id)) {
      continue;
    }
    if (!(fields >> score_text)) {
      throw InvalidArgumentError(path.string() + ":" +
                                 std::to_string(line_no) +
                                 ": expected id and score");
    }
    double score = 0;
    const char* end = score_text.data() + score_text.size();
    auto [ptr, ec] = std::from_chars(score_text.data(), end, score);
    if (ec != std::errc() || ptr != end) {
      if (table.empty() && line_no == 1) {
        continue;  // header
      }
      throw InvalidArgumentError(path.string() + ":" +
                                 std::to_string(line_no) +
                                 ": score is not a number");
    }
    table.emplace_back(std::move(id), score);
  }
  return table;
}

double correlate(const ScoreTable& xs, const ScoreTable& ys) {
  std::unordered_map<std::string, double> lookup;
  for (const auto& [id, score] : ys) {
    lookup.emplace(id, score);
  }
  std::vector<double> a;
  std::vector<double> b;
  for (const auto& [id, score] : xs) {
    if (auto it = lookup.find(id); it != lookup.end()) {
      a.push_back(score);
      b.push_back(it->second);
    }
  }
  return pearson(a, b);
}
//==============================================================================
}  // namespace saev
//==============================================================================
