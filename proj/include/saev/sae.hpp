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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "saev/errors.hpp"
#include "saev/linalg.hpp"
//==============================================================================
namespace saev {
//==============================================================================
/// Sparse autoencoder parameters: Z = ReLU(H W_enc^T + b_enc), H^ = Z D.
///
/// Rows of `dictionary` are the feature directions f_k. There is no decoder
/// bias. Float is the training precision; double exists for gradient checks.
template <typename Scalar>
struct BasicSaeModel {
  RowMatrix<Scalar> w_enc;       // n x m
  ColVector<Scalar> b_enc;       // n
  RowMatrix<Scalar> dictionary;  // n x m

  BasicSaeModel() = default;
  BasicSaeModel(Eigen::Index n, Eigen::Index m)
      : w_enc(RowMatrix<Scalar>::Zero(n, m)),
        b_enc(ColVector<Scalar>::Zero(n)),
        dictionary(RowMatrix<Scalar>::Zero(n, m)) {}

  [[nodiscard]] Eigen::Index n() const noexcept { return w_enc.rows(); }
  [[nodiscard]] Eigen::Index m() const noexcept { return w_enc.cols(); }

  template <typename Other>
  [[nodiscard]] BasicSaeModel<Other> cast() const {
    BasicSaeModel<Other> out;
    out.w_enc = w_enc.template cast<Other>();
    out.b_enc = b_enc.template cast<Other>();
    out.dictionary = dictionary.template cast<Other>();
    return out;
  }

  friend bool operator==(const BasicSaeModel& a, const BasicSaeModel& b) {
    return a.w_enc.rows() == b.w_enc.rows() &&
           a.w_enc.cols() == b.w_enc.cols() && a.w_enc == b.w_enc &&
           a.b_enc == b.b_enc && a.dictionary == b.dictionary;
  }
};

using SaeModel = BasicSaeModel<float>;
using SaeModel64 = BasicSaeModel<double>;

/// Throws DimensionError unless the three blocks agree, and
/// InvalidArgumentError on non-finite entries.
template <typename Scalar>
void validate(const BasicSaeModel<Scalar>& model) {
  if (model.n() < 1 || model.m() < 1) {
    throw DimensionError("model needs n >= 1 and m >= 1");
  }
  if (model.b_enc.size() != model.n() ||
      model.dictionary.rows() != model.n() ||
      model.dictionary.cols() != model.m()) {
    throw DimensionError("inconsistent model parameter shapes");
  }
  if (!model.w_enc.allFinite() || !model.b_enc.allFinite() ||
      !model.dictionary.allFinite()) {
    throw InvalidArgumentError("model parameters must be finite");
  }
}

template <typename Scalar>
struct BasicFeatureActivations {
  RowMatrix<Scalar> z;  // l x n, entrywise >= 0
  std::uint64_t item_id = 0;
};

using FeatureActivations = BasicFeatureActivations<float>;

template <typename Scalar>
struct LossBreakdown {
  Scalar recon = 0;
  Scalar l1 = 0;
  Scalar total = 0;
  Scalar lambda = 0;
};

template <typename Scalar>
struct Gradients {
  RowMatrix<Scalar> w_enc;
  ColVector<Scalar> b_enc;
  RowMatrix<Scalar> dictionary;
};
//==============================================================================
namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) {
    throw DimensionError(what);
  }
}

template <typename Scalar>
RowMatrix<Scalar> pre_activation(const RowMatrix<Scalar>& h,
                                 const BasicSaeModel<Scalar>& model) {
  require(h.cols() == model.m(), "input width does not match model m");
  RowMatrix<Scalar> pre = h * model.w_enc.transpose();
  pre.rowwise() += model.b_enc.transpose();
  return pre;
}

}  // namespace detail
//==============================================================================
/// Pre-activations H W_enc^T + b_enc, before the ReLU.
template <typename Scalar>
[[nodiscard]] RowMatrix<Scalar> pre_activation(
    const RowMatrix<Scalar>& h, const BasicSaeModel<Scalar>& model) {
  return detail::pre_activation(h, model);
}

template <typename Scalar>
[[nodiscard]] BasicFeatureActivations<Scalar> encode(
    const RowMatrix<Scalar>& h, const BasicSaeModel<Scalar>& model,
    std::uint64_t item_id = 0) {
  BasicFeatureActivations<Scalar> out;
  out.z = detail::pre_activation(h, model).cwiseMax(Scalar(0));
  out.item_id = item_id;
  return out;
}

template <typename Scalar>
[[nodiscard]] RowMatrix<Scalar> decode(const RowMatrix<Scalar>& z,
                                       const BasicSaeModel<Scalar>& model) {
  detail::require(z.cols() == model.n(),
                  "activation width does not match model n");
  return z * model.dictionary;
}

template <typename Scalar>
[[nodiscard]] RowMatrix<Scalar> decode(
    const BasicFeatureActivations<Scalar>& acts,
    const BasicSaeModel<Scalar>& model) {
  return decode(acts.z, model);
}

/// Squared Frobenius norm of h - h_hat.
template <typename Scalar>
[[nodiscard]] Scalar reconstruction_loss(const RowMatrix<Scalar>& h,
                                         const RowMatrix<Scalar>& h_hat) {
  detail::require(h.rows() == h_hat.rows() && h.cols() == h_hat.cols(),
                  "reconstruction_loss shape mismatch");
  return (h - h_hat).squaredNorm();
}

/// Loss of the all-zero reconstruction, i.e. ||h||_F^2.
template <typename Scalar>
[[nodiscard]] Scalar zero_baseline(const RowMatrix<Scalar>& h) {
  return h.squaredNorm();
}

template <typename Scalar>
[[nodiscard]] LossBreakdown<Scalar> training_loss(
    const RowMatrix<Scalar>& h, const BasicSaeModel<Scalar>& model,
    Scalar lambda) {
  if (!(lambda >= Scalar(0))) {
    throw InvalidArgumentError("lambda must be >= 0");
  }
  const auto acts = encode(h, model);
  LossBreakdown<Scalar> out;
  out.recon = reconstruction_loss(h, decode(acts.z, model));
  out.l1 = acts.z.sum();
  out.lambda = lambda;
  out.total = out.recon + lambda * out.l1;
  return out;
}

/// Closed-form gradients of recon + lambda * ||Z||_1 with respect to the
/// three parameter blocks. Inactive units (pre-activation <= 0) pass no
/// gradient. Also returns the loss evaluated at the same point.
template <typename Scalar>
[[nodiscard]] Gradients<Scalar> gradients(const RowMatrix<Scalar>& h,
                                          const BasicSaeModel<Scalar>& model,
                                          Scalar lambda,
                                          LossBreakdown<Scalar>* loss = nullptr,
                                          RowMatrix<Scalar>* z_out = nullptr) {
  if (!(lambda >= Scalar(0))) {
    throw InvalidArgumentError("lambda must be >= 0");
  }
  const RowMatrix<Scalar> pre = detail::pre_activation(h, model);
  const RowMatrix<Scalar> z = pre.cwiseMax(Scalar(0));
  const RowMatrix<Scalar> residual = z * model.dictionary - h;  // l x m

  Gradients<Scalar> g;
  g.dictionary = Scalar(2) * z.transpose() * residual;
  RowMatrix<Scalar> d_pre = Scalar(2) * residual * model.dictionary.transpose();
  d_pre.array() += lambda;
  d_pre = (pre.array() > Scalar(0)).select(d_pre, Scalar(0));
  g.w_enc = d_pre.transpose() * h;
  g.b_enc = d_pre.colwise().sum().transpose();

  if (loss != nullptr) {
    loss->recon = residual.squaredNorm();
    loss->l1 = z.sum();
    loss->lambda = lambda;
    loss->total = loss->recon + lambda * loss->l1;
  }
  if (z_out != nullptr) {
    *z_out = z;
  }
  return g;
}

/// Mean over tokens of the number of strictly positive activations.
template <typename Scalar>
[[nodiscard]] double l0_metric(const RowMatrix<Scalar>& z) {
  if (z.rows() == 0) {
    throw EmptyInputError("l0_metric of an empty activation matrix");
  }
  const auto active = (z.array() > Scalar(0)).count();
  return static_cast<double>(active) / static_cast<double>(z.rows());
}

template <typename Scalar>
[[nodiscard]] double l0_metric(const BasicFeatureActivations<Scalar>& acts) {
  return l0_metric(acts.z);
}
//==============================================================================
// Model files: "SAEM" | version u32 | m u32 | n u32 | w_enc f32[n*m] |
// b_enc f32[n] | dictionary f32[n*m], little-endian, row-major.
//==============================================================================
inline constexpr char kModelMagic[4] = {'S', 'A', 'E', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const SaeModel& model, std::ostream& out);
void save_model(const SaeModel& model, const std::filesystem::path& path);
[[nodiscard]] SaeModel load_model(std::istream& in);
[[nodiscard]] SaeModel load_model(const std::filesystem::path& path);
//==============================================================================
}  // namespace saev
//==============================================================================
