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
#include "saev/sae.hpp"
//==============================================================================
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
//==============================================================================
using namespace saev;
//==============================================================================
namespace {

template <typename Scalar>
RowMatrix<Scalar> random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                                Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  RowMatrix<Scalar> out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out.data()[i] = static_cast<Scalar>(gauss(rng));
  }
  return out;
}

template <typename Scalar>
BasicSaeModel<Scalar> random_model(std::mt19937_64& rng, Eigen::Index n,
                                   Eigen::Index m) {
  BasicSaeModel<Scalar> model(n, m);
  model.w_enc = random_matrix<Scalar>(rng, n, m);
  model.b_enc = random_matrix<Scalar>(rng, n, 1, 0.5);
  model.dictionary = random_matrix<Scalar>(rng, n, m);
  return model;
}

std::vector<double> to_vector(const VectorD& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace
//==============================================================================
TEST_CASE("encode") {
  std::mt19937_64 rng(1);
  SUBCASE("zero parameters give zero activations") {
    SaeModel model(5, 4);
    const auto z = encode(random_matrix<float>(rng, 3, 4), model).z;
    CHECK(z.isZero(0.0F));
  }
  SUBCASE("zero input yields ReLU of the bias") {
    SaeModel model(2, 3);
    model.b_enc << -1.0F, 2.0F;
    const auto z = encode(MatrixF(MatrixF::Zero(1, 3)), model).z;
    CHECK(z(0, 0) == 0.0F);
    CHECK(z(0, 1) == 2.0F);
  }
  SUBCASE("matches the triple-loop oracle") {
    const auto h = random_matrix<float>(rng, 3, 4);
    const auto model = random_model<float>(rng, 5, 4);
    const auto z = encode(h, model).z;
    const auto expected =
        oracle::encode(oracle::to_dense(h), oracle::to_dense(model.w_enc),
                       to_vector(model.b_enc.cast<double>()));
    for (Eigen::Index j = 0; j < 3; ++j) {
      for (Eigen::Index k = 0; k < 5; ++k) {
        CHECK(std::abs(z(j, k) - expected[j][k]) < 1e-6);
      }
    }
  }
  SUBCASE("width mismatch") {
    SaeModel model(5, 4);
    CHECK_THROWS_AS((void)encode(MatrixF(MatrixF::Zero(2, 3)), model), DimensionError);
  }
}

TEST_CASE("encode output is nonnegative for random inputs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = random_model<float>(rng, 1 + rng() % 20, 1 + rng() % 10);
    const auto h = random_matrix<float>(rng, 1 + rng() % 8, model.m(), 3.0);
    const auto z = encode(h, model).z;
    REQUIRE(z.minCoeff() >= 0.0F);
    REQUIRE(z.allFinite());
  }
}

TEST_CASE("decode") {
  std::mt19937_64 rng(3);
  const auto model = random_model<float>(rng, 6, 4);
  SUBCASE("zero activations decode to zero") {
    CHECK(decode(MatrixF(MatrixF::Zero(2, 6)), model).isZero(0.0F));
  }
  SUBCASE("one-hot reads out a scaled dictionary row") {
    MatrixF z = MatrixF::Zero(1, 6);
    z(0, 3) = 2.5F;
    const MatrixF h_hat = decode(z, model);
    CHECK((h_hat.row(0) - 2.5F * model.dictionary.row(3)).norm() == 0.0F);
  }
  SUBCASE("matches the triple-loop oracle") {
    const MatrixF z = random_matrix<float>(rng, 3, 6).cwiseAbs();
    const MatrixF h_hat = decode(z, model);
    const auto expected = oracle::decode(oracle::to_dense(z),
                                         oracle::to_dense(model.dictionary));
    for (Eigen::Index j = 0; j < 3; ++j) {
      for (Eigen::Index d = 0; d < 4; ++d) {
        CHECK(std::abs(h_hat(j, d) - expected[j][d]) < 1e-6);
      }
    }
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS((void)decode(MatrixF(MatrixF::Zero(1, 5)), model), DimensionError);
  }
}

TEST_CASE("decode is linear") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = random_model<double>(rng, 7, 5);
    const MatrixD z1 = random_matrix<double>(rng, 4, 7);
    const MatrixD z2 = random_matrix<double>(rng, 4, 7);
    const double a = 1.7;
    const double b = -0.4;
    const MatrixD lhs = decode(MatrixD(a * z1 + b * z2), model);
    const MatrixD rhs = a * decode(z1, model) + b * decode(z2, model);
    REQUIRE((lhs - rhs).norm() <= 1e-6 * rhs.norm());
  }
}

TEST_CASE("reconstruction loss and zero baseline") {
  std::mt19937_64 rng(5);
  const auto h = random_matrix<float>(rng, 4, 3);
  CHECK(reconstruction_loss(h, h) == 0.0F);

  MatrixF token(1, 2);
  token << 3.0F, 4.0F;
  CHECK(reconstruction_loss(token, MatrixF(MatrixF::Zero(1, 2))) == 25.0F);
  CHECK(zero_baseline(token) == 25.0F);
  CHECK(zero_baseline(MatrixF(MatrixF::Zero(3, 2))) == 0.0F);

  const auto other = random_matrix<float>(rng, 4, 3);
  CHECK(reconstruction_loss(h, other) ==
        doctest::Approx(oracle::squared_diff(oracle::to_dense(h),
                                             oracle::to_dense(other)))
            .epsilon(1e-6));
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    sum_sq += static_cast<double>(h.data()[i]) * h.data()[i];
  }
  CHECK(zero_baseline(h) == doctest::Approx(sum_sq).epsilon(1e-6));

  CHECK_THROWS_AS((void)reconstruction_loss(h, MatrixF(MatrixF::Zero(4, 2))),
                  DimensionError);
}

TEST_CASE("training loss") {
  SUBCASE("lambda = 0 leaves only the reconstruction term") {
    std::mt19937_64 rng(6);
    const auto model = random_model<double>(rng, 5, 3);
    const auto h = random_matrix<double>(rng, 4, 3);
    const auto loss = training_loss(h, model, 0.0);
    CHECK(loss.total == loss.recon);
  }
  SUBCASE("perfect reconstruction with z = (1, 2)") {
    SaeModel64 model(2, 2);
    model.w_enc = MatrixD::Identity(2, 2);
    model.dictionary = MatrixD::Identity(2, 2);
    MatrixD h(1, 2);
    h << 1.0, 2.0;
    const auto loss = training_loss(h, model, 0.5);
    CHECK(loss.recon == 0.0);
    CHECK(loss.l1 == 3.0);
    CHECK(loss.total == 1.5);
  }
  SUBCASE("matches the composed loop oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      const auto model = random_model<double>(rng, 9, 4);
      const auto h = random_matrix<double>(rng, 6, 4);
      const double lambda = 0.1 * trial;
      const auto loss = training_loss(h, model, lambda);
      const double expected = oracle::total_loss(
          oracle::to_dense(h), oracle::to_dense(model.w_enc),
          to_vector(model.b_enc), oracle::to_dense(model.dictionary), lambda);
      CHECK(loss.total == doctest::Approx(expected).epsilon(1e-12));
      CHECK(std::abs(loss.total - (loss.recon + lambda * loss.l1)) <=
            1e-9 * std::abs(loss.total));
    }
  }
  SUBCASE("total is nondecreasing in lambda") {
    std::mt19937_64 rng(8);
    const auto model = random_model<float>(rng, 8, 4);
    const auto h = random_matrix<float>(rng, 5, 4);
    float previous = -1.0F;
    for (float lambda = 0.0F; lambda < 5.0F; lambda += 0.25F) {
      const float total = training_loss(h, model, lambda).total;
      CHECK(total >= previous);
      previous = total;
    }
  }
  SUBCASE("negative lambda is rejected") {
    SaeModel model(2, 2);
    CHECK_THROWS_AS((void)training_loss(MatrixF(MatrixF::Zero(1, 2)), model, -1.0F),
                    InvalidArgumentError);
  }
}

TEST_CASE("gradients of a dead network vanish") {
  std::mt19937_64 rng(9);
  SaeModel64 model(6, 4);
  model.b_enc.setConstant(-0.5);
  model.dictionary = random_matrix<double>(rng, 6, 4);
  const auto g = gradients(random_matrix<double>(rng, 5, 4), model, 2.0);
  CHECK(g.w_enc.isZero(0.0));
  CHECK(g.b_enc.isZero(0.0));
  CHECK(g.dictionary.isZero(0.0));
}

TEST_CASE("gradients match central finite differences") {
  std::mt19937_64 rng(10);
  constexpr double kStep = 1e-5;
  std::size_t checked = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const auto model = random_model<double>(rng, 10, 6);
    const auto h = random_matrix<double>(rng, 7, 6);
    const double lambda = 0.25 * trial;
    // Every coordinate is checkable only when no pre-activation sits at a kink.
    if ((pre_activation(h, model).array().abs() <= 1e-3).any()) {
      continue;
    }
    const auto g = gradients(h, model, lambda);
    const auto dense_h = oracle::to_dense(h);
    auto fd = [&](auto perturb) {
      SaeModel64 plus = model;
      SaeModel64 minus = model;
      perturb(plus, kStep);
      perturb(minus, -kStep);
      auto loss = [&](const SaeModel64& p) {
        return oracle::total_loss(dense_h, oracle::to_dense(p.w_enc),
                                  to_vector(p.b_enc),
                                  oracle::to_dense(p.dictionary), lambda);
      };
      return (loss(plus) - loss(minus)) / (2 * kStep);
    };
    auto compare = [&](double analytic, double numeric) {
      const double scale =
          std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      CHECK(std::abs(analytic - numeric) / scale < 1e-5);
      ++checked;
    };
    for (Eigen::Index k = 0; k < model.n(); ++k) {
      compare(g.b_enc[k],
              fd([k](SaeModel64& p, double s) { p.b_enc[k] += s; }));
      for (Eigen::Index d = 0; d < model.m(); ++d) {
        compare(g.w_enc(k, d),
                fd([k, d](SaeModel64& p, double s) { p.w_enc(k, d) += s; }));
        compare(g.dictionary(k, d), fd([k, d](SaeModel64& p, double s) {
                  p.dictionary(k, d) += s;
                }));
      }
    }
  }
  CHECK(checked >= 500);
}

TEST_CASE("raising lambda shifts the bias gradient by delta times active count") {
  std::mt19937_64 rng(12);
  const auto model = random_model<double>(rng, 8, 5);
  const auto h = random_matrix<double>(rng, 6, 5);
  const double delta = 0.75;
  const auto g0 = gradients(h, model, 0.5);
  const auto g1 = gradients(h, model, 0.5 + delta);
  const MatrixD z = encode(h, model).z;
  for (Eigen::Index k = 0; k < model.n(); ++k) {
    const auto active = static_cast<double>((z.col(k).array() > 0.0).count());
    CHECK(g1.b_enc[k] - g0.b_enc[k] ==
          doctest::Approx(delta * active).epsilon(1e-12));
  }
}

TEST_CASE("l0 metric") {
  CHECK(l0_metric(MatrixF(MatrixF::Zero(3, 4))) == 0.0);
  MatrixF z = MatrixF::Zero(2, 5);
  z(0, 1) = 0.5F;
  z(0, 3) = 1.0F;
  z.row(1) << 1.0F, 2.0F, 0.0F, 3.0F, 4.0F;
  CHECK(l0_metric(z) == 3.0);
  CHECK_THROWS_AS((void)l0_metric(MatrixF(0, 5)), EmptyInputError);
}

TEST_CASE("model files") {
  std::mt19937_64 rng(13);
  const auto model = random_model<float>(rng, 6, 3);
  std::ostringstream out(std::ios::binary);
  save_model(model, out);
  const std::string bytes = out.str();
  CHECK(bytes.size() == 16 + 4 * (2 * 6 * 3 + 6));
  CHECK(bytes.substr(0, 4) == "SAEM");
  CHECK(bytes[8] == 3);   // m
  CHECK(bytes[12] == 6);  // n

  std::istringstream in(bytes);
  CHECK(load_model(in) == model);

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_in(bad);
  CHECK_THROWS_AS((void)load_model(bad_in), FormatError);

  std::istringstream short_in(bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS((void)load_model(short_in), CorruptionError);

  const auto path = std::filesystem::temp_directory_path() / "saev_model.bin";
  save_model(model, path);
  CHECK(load_model(path) == model);
  std::filesystem::remove(path);
}
