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
#include "saev/trainer.hpp"
//==============================================================================
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "saev/errors.hpp"
//==============================================================================
namespace saev {
//==============================================================================
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InvalidArgumentError("config key '" + key + "': cannot parse '" +
                               text + "'");
  }
  return value;
}

struct Field {
  std::string_view name;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field make_field(std::string_view name, T TrainConfig::*member) {
  return Field{
      name,
      [name, member](TrainConfig& c, const std::string& text) {
        c.*member = parse_number<T>(std::string(name), text);
      },
      [member](const TrainConfig& c) {
        // Shortest text that parses back to the same value.
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, c.*member);
        return std::string(buf, res.ptr);
      }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      make_field("total_steps", &TrainConfig::total_steps),
      make_field("batch_size", &TrainConfig::batch_size),
      make_field("lr", &TrainConfig::lr),
      make_field("lr_warmup_steps", &TrainConfig::lr_warmup_steps),
      make_field("lr_decay_steps", &TrainConfig::lr_decay_steps),
      make_field("adam_beta1", &TrainConfig::adam_beta1),
      make_field("adam_beta2", &TrainConfig::adam_beta2),
      make_field("adam_epsilon", &TrainConfig::adam_epsilon),
      make_field("lambda", &TrainConfig::lambda),
      make_field("feature_sampling_window",
                 &TrainConfig::feature_sampling_window),
      make_field("dead_feature_window", &TrainConfig::dead_feature_window),
      make_field("dead_feature_threshold",
                 &TrainConfig::dead_feature_threshold),
      make_field("seed", &TrainConfig::seed),
      make_field("expansion_factor", &TrainConfig::expansion_factor),
      make_field("buffer_batches_num", &TrainConfig::buffer_batches_num),
  };
  return kFields;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  // seed_seq keeps only 32 bits per value.
  std::seed_seq seq{seed & 0xFFFFFFFFU, seed >> 32, stream & 0xFFFFFFFFU,
                    stream >> 32};
  return std::mt19937_64(seq);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Block>
void adam_update(Block& param, Block& m1, Block& m2, const Block& grad,
                 float beta1, float beta2, float step_size, float epsilon,
                 float correction2) {
  m1.array() = beta1 * m1.array() + (1.0F - beta1) * grad.array();
  m2.array() = beta2 * m2.array() + (1.0F - beta2) * grad.array().square();
  // step_size already carries the first-moment bias correction.
  param.array() -= step_size * m1.array() /
                   ((m2.array() / correction2).sqrt() + epsilon);
}

void normalize_rows(MatrixF& rows) {
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    const float norm = rows.row(k).norm();
    if (norm > 0.0F) {
      rows.row(k) /= norm;
    }
  }
}

}  // namespace
//==============================================================================
void validate(const TrainConfig& config) {
  if (config.total_steps == 0 || config.batch_size == 0 ||
      config.feature_sampling_window == 0 ||
      config.dead_feature_window == 0 || config.expansion_factor == 0 ||
      config.buffer_batches_num == 0) {
    throw InvalidArgumentError("train config counts must be positive");
  }
  if (!(config.lr > 0.0) || !std::isfinite(config.lr)) {
    throw InvalidArgumentError("lr must be positive");
  }
  if (config.lr_warmup_steps + config.lr_decay_steps > config.total_steps) {
    throw InvalidArgumentError(
        "lr_warmup_steps + lr_decay_steps exceeds total_steps");
  }
  if (!(config.adam_beta1 >= 0.0 && config.adam_beta1 < 1.0) ||
      !(config.adam_beta2 >= 0.0 && config.adam_beta2 < 1.0)) {
    throw InvalidArgumentError("adam betas must lie in [0, 1)");
  }
  if (!(config.adam_epsilon > 0.0)) {
    throw InvalidArgumentError("adam_epsilon must be positive");
  }
  if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) {
    throw InvalidArgumentError("lambda must be finite and >= 0");
  }
  if (!(config.dead_feature_threshold >= 0.0)) {
    throw InvalidArgumentError("dead_feature_threshold must be >= 0");
  }
}

void set_config_value(TrainConfig& config, const std::string& key,
                      const std::string& value) {
  for (const Field& field : fields()) {
    if (field.name == key) {
      field.set(config, value);
      return;
    }
  }
  throw InvalidArgumentError("unknown train config key '" + key + "'");
}

TrainConfig parse_train_config(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string stripped = trim(line);
    if (stripped.empty()) {
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgumentError("config line " + std::to_string(line_no) +
                                 ": expected key = value");
    }
    set_config_value(base, trim(std::string_view(stripped).substr(0, eq)),
                     trim(std::string_view(stripped).substr(eq + 1)));
  }
  return base;
}

TrainConfig load_train_config(const std::filesystem::path& path,
                              TrainConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config: " + path.string());
  }
  return parse_train_config(in, base);
}

std::string format_train_config(const TrainConfig& config) {
  std::string out;
  for (const Field& field : fields()) {
    out += std::string(field.name) + " = " + field.get(config) + "\n";
  }
  return out;
}
//==============================================================================
double lr_at(std::uint64_t step, const TrainConfig& config) {
  if (step >= config.total_steps) {
    throw RangeError("step " + std::to_string(step) + " outside [0, " +
                     std::to_string(config.total_steps) + ")");
  }
  double scale = 1.0;
  if (step < config.lr_warmup_steps) {
    scale = static_cast<double>(step) /
            static_cast<double>(config.lr_warmup_steps);
  }
  const std::uint64_t decay_start = config.total_steps - config.lr_decay_steps;
  if (config.lr_decay_steps > 0 && step >= decay_start) {
    scale = std::min(scale, static_cast<double>(config.total_steps - step) /
                                static_cast<double>(config.lr_decay_steps));
  }
  return config.lr * scale;
}

SaeModel init_model(std::uint32_t m, const TrainConfig& config) {
  if (m == 0) {
    throw InvalidArgumentError("init_model needs m > 0");
  }
  const auto n = static_cast<Eigen::Index>(config.expansion_factor) * m;
  SaeModel model(n, m);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorD row(m);
  for (Eigen::Index k = 0; k < n; ++k) {
    do {
      for (std::uint32_t d = 0; d < m; ++d) {
        row[d] = gauss(rng);
      }
    } while (row.norm() == 0.0);
    row.normalize();
    model.dictionary.row(k) = row.cast<float>().transpose();
  }
  model.w_enc = model.dictionary;
  return model;
}

void write_loss_history(const std::vector<StepRecord>& history,
                        std::ostream& out) {
  out << "step,recon,l1,total,lr,dead_count\n";
  out << std::setprecision(9);
  for (const StepRecord& r : history) {
    out << r.step << ',' << r.recon << ',' << r.l1 << ',' << r.total << ','
        << r.lr << ',' << r.dead_count << '\n';
  }
}
//==============================================================================
TrainState::TrainState(const SaeModel& model, const TrainConfig& config)
    : rng(derived_rng(config.seed, 0x7265'7361'6d70)) {
  first_moment.w_enc = MatrixF::Zero(model.n(), model.m());
  first_moment.b_enc = VectorF::Zero(model.n());
  first_moment.dictionary = MatrixF::Zero(model.n(), model.m());
  second_moment = first_moment;
  max_activation = MatrixF::Zero(
      static_cast<Eigen::Index>(config.dead_feature_window), model.n());
}

namespace {

StepRecord train_step_impl(SaeModel& model, TrainState& state,
                           const MatrixF& batch, const TrainConfig& config,
                           MatrixF* activations) {
  const auto lambda = static_cast<float>(config.lambda);
  LossBreakdown<float> loss;
  MatrixF z;
  Gradients<float> grad = gradients(batch, model, lambda, &loss, &z);

  StepRecord record;
  record.step = state.step;
  record.recon = loss.recon;
  record.l1 = loss.l1;
  record.total = loss.total;
  record.lr = lr_at(state.step, config);
  if (!std::isfinite(loss.total) || !grad.w_enc.allFinite() ||
      !grad.b_enc.allFinite() || !grad.dictionary.allFinite()) {
    throw DivergenceError("non-finite training loss", state.step);
  }

  // Only the tangential part of each dictionary gradient survives the
  // renormalization below.
  const VectorF radial =
      (grad.dictionary.cwiseProduct(model.dictionary)).rowwise().sum();
  grad.dictionary -= radial.asDiagonal() * model.dictionary;

  const auto t = static_cast<double>(state.step + 1);
  const double correction1 = 1.0 - std::pow(config.adam_beta1, t);
  const double correction2 = 1.0 - std::pow(config.adam_beta2, t);
  const auto step_size = static_cast<float>(record.lr / correction1);
  const auto beta1 = static_cast<float>(config.adam_beta1);
  const auto beta2 = static_cast<float>(config.adam_beta2);
  const auto eps = static_cast<float>(config.adam_epsilon);
  const auto c2 = static_cast<float>(correction2);
  adam_update(model.w_enc, state.first_moment.w_enc, state.second_moment.w_enc,
              grad.w_enc, beta1, beta2, step_size, eps, c2);
  adam_update(model.b_enc, state.first_moment.b_enc, state.second_moment.b_enc,
              grad.b_enc, beta1, beta2, step_size, eps, c2);
  adam_update(model.dictionary, state.first_moment.dictionary,
              state.second_moment.dictionary, grad.dictionary, beta1, beta2,
              step_size, eps, c2);
  normalize_rows(model.dictionary);

  const auto window = state.max_activation.rows();
  const auto slot = static_cast<Eigen::Index>(
      state.step % static_cast<std::uint64_t>(window));
  if (z.rows() > 0) {
    state.max_activation.row(slot) = z.colwise().maxCoeff();
  } else {
    state.max_activation.row(slot).setZero();
  }
  state.window_filled =
      std::min<std::uint64_t>(state.window_filled + 1,
                              static_cast<std::uint64_t>(window));
  ++state.step;
  if (activations != nullptr) {
    *activations = std::move(z);
  }
  return record;
}

}  // namespace

StepRecord train_step(SaeModel& model, TrainState& state,
                      const MatrixF& batch, const TrainConfig& config) {
  return train_step_impl(model, state, batch, config, nullptr);
}

std::size_t resample_dead(SaeModel& model, TrainState& state,
                          const MatrixF& recent_batch,
                          const TrainConfig& config) {
  if (state.window_filled <
      static_cast<std::uint64_t>(state.max_activation.rows())) {
    throw PreconditionError("resample_dead needs a full dead-feature window");
  }
  // Every check consumes the window, so a feature is judged on fresh
  // evidence next time.
  state.window_filled = 0;

  const VectorF window_max = state.max_activation.colwise().maxCoeff();
  const auto threshold = static_cast<float>(config.dead_feature_threshold);
  std::vector<Eigen::Index> dead;
  for (Eigen::Index k = 0; k < model.n(); ++k) {
    if (window_max[k] < threshold) {
      dead.push_back(k);
    }
  }
  if (dead.empty() || recent_batch.rows() == 0) {
    return 0;
  }

  const MatrixF residual = decode(encode(recent_batch, model).z, model) -
                           recent_batch;
  const VectorF error = residual.rowwise().squaredNorm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(error.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return error[a] > error[b];
                   });

  double alive_norm = 0.0;
  std::size_t alive = 0;
  for (Eigen::Index k = 0; k < model.n(); ++k) {
    if (window_max[k] >= threshold) {
      alive_norm += model.w_enc.row(k).norm();
      ++alive;
    }
  }
  const double encoder_scale =
      0.2 * (alive > 0 ? alive_norm / static_cast<double>(alive) : 1.0);

  std::normal_distribution<float> gauss(0.0F, 1.0F);
  for (std::size_t i = 0; i < dead.size(); ++i) {
    const Eigen::Index k = dead[i];
    Eigen::RowVectorXf direction = recent_batch.row(order[i % order.size()]);
    while (direction.norm() == 0.0F) {
      for (Eigen::Index d = 0; d < direction.size(); ++d) {
        direction[d] = gauss(state.rng);
      }
    }
    direction.normalize();
    model.dictionary.row(k) = direction;
    model.w_enc.row(k) = static_cast<float>(encoder_scale) * direction;
    model.b_enc[k] = 0.0F;
    for (Gradients<float>* moments :
         {&state.first_moment, &state.second_moment}) {
      moments->w_enc.row(k).setZero();
      moments->b_enc[k] = 0.0F;
      moments->dictionary.row(k).setZero();
    }
  }
  return dead.size();
}
//==============================================================================
TokenBuffer::TokenBuffer(const ItemSource& source, const TrainConfig& config)
    : source_(source),
      cursor_(source.open()),
      batch_size_(config.batch_size),
      reservoir_(static_cast<Eigen::Index>(config.buffer_batches_num) *
                     config.batch_size,
                 source.d_model()),
      rng_(derived_rng(config.seed, 0x6275'6666'6572)) {
  if (source.d_model() == 0) {
    throw EmptyInputError("training corpus is empty");
  }
  for (Eigen::Index slot = 0; slot < reservoir_.rows(); ++slot) {
    pull_token(slot);
  }
}

void TokenBuffer::pull_token(Eigen::Index slot) {
  bool reopened = false;
  while (item_ == nullptr || token_ >= item_->records.size()) {
    item_ = cursor_->next();
    token_ = 0;
    if (item_ == nullptr) {
      if (reopened) {
        throw EmptyInputError("training corpus has no tokens");
      }
      cursor_ = source_.open();
      reopened = true;
    }
  }
  const auto& hidden = item_->records[token_++].hidden;
  reservoir_.row(slot) = Eigen::Map<const Eigen::RowVectorXf>(
      hidden.data(), static_cast<Eigen::Index>(hidden.size()));
}

MatrixF TokenBuffer::next_batch() {
  MatrixF batch(batch_size_, reservoir_.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, reservoir_.rows() - 1);
  for (Eigen::Index b = 0; b < batch.rows(); ++b) {
    const Eigen::Index slot = pick(rng_);
    batch.row(b) = reservoir_.row(slot);
    pull_token(slot);
  }
  return batch;
}
//==============================================================================
TrainResult train(const ItemSource& source, const TrainConfig& config) {
  validate(config);
  if (source.d_model() == 0) {
    throw EmptyInputError("training corpus is empty");
  }
  return train(source, config, init_model(source.d_model(), config));
}

TrainResult train(const ItemSource& source, const TrainConfig& config,
                  SaeModel initial) {
  validate(config);
  validate(initial);
  if (source.d_model() == 0) {
    throw EmptyInputError("training corpus is empty");
  }
  if (initial.m() != static_cast<Eigen::Index>(source.d_model())) {
    throw DimensionError("model m does not match shard d_model");
  }

  TrainResult result;
  result.model = std::move(initial);
  SaeModel& model = result.model;
  TrainState state(model, config);
  TokenBuffer buffer(source, config);
  result.history.reserve(config.total_steps);

  std::vector<std::uint8_t> fired(static_cast<std::size_t>(model.n()), 0);
  double l0_sum = 0.0;
  std::uint64_t l0_tokens = 0;
  MatrixF z;
  for (std::uint64_t step = 0; step < config.total_steps; ++step) {
    const MatrixF batch = buffer.next_batch();
    StepRecord record = train_step_impl(model, state, batch, config, &z);

    const auto threshold = static_cast<float>(config.dead_feature_threshold);
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      if (z.col(k).maxCoeff() >= threshold) {
        fired[static_cast<std::size_t>(k)] = 1;
      }
    }
    l0_sum += static_cast<double>((z.array() > 0.0F).count());
    l0_tokens += static_cast<std::uint64_t>(z.rows());

    if ((step + 1) % config.dead_feature_window == 0) {
      record.dead_count = resample_dead(model, state, batch, config);
    }
    if ((step + 1) % config.feature_sampling_window == 0) {
      FeatureActivity activity;
      activity.step = step;
      activity.active_features = static_cast<std::uint64_t>(
          std::count(fired.begin(), fired.end(), std::uint8_t{1}));
      activity.mean_l0 =
          l0_tokens > 0 ? l0_sum / static_cast<double>(l0_tokens) : 0.0;
      result.activity.push_back(activity);
      std::fill(fired.begin(), fired.end(), std::uint8_t{0});
      l0_sum = 0.0;
      l0_tokens = 0;
    }
    result.history.push_back(record);
  }
  return result;
}
//==============================================================================
}  // namespace saev
//==============================================================================
