// Copyright 2026 The roadwet Authors
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


#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "roadwet/svm.hpp"

namespace roadwet::svm {
namespace {

TEST(Smo, TwoPointSolution) {
  Eigen::MatrixXd x(2, 1);
  x << -1, 1;
  const std::vector<int> y{-1, 1};
  const auto m = smo_train(x, y, 1e3);
  EXPECT_TRUE(m.converged);
  EXPECT_NEAR(m.bias, 0.0, 1e-12);
  const auto on = svm_predict(m, Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(on.decision, 0.0, 1e-12);
  EXPECT_EQ(svm_predict(m, Eigen::VectorXd::Constant(1, 0.3)).label, 1);
  EXPECT_EQ(svm_predict(m, Eigen::VectorXd::Constant(1, -0.3)).label, -1);
  EXPECT_NEAR(svm_predict(m, Eigen::VectorXd::Constant(1, 1.0)).decision, 1.0, 1e-9);
}

TEST(Smo, ZeroDecisionMapsToPositive) {
  SvmModel m;
  m.standardizer.input_dim = 1;
  m.standardizer.kept = {0};
  m.standardizer.mean = Eigen::VectorXd::Zero(1);
  m.standardizer.stddev = Eigen::VectorXd::Ones(1);
  m.support_vectors = Eigen::MatrixXd::Ones(1, 1);
  m.coef = Eigen::VectorXd::Ones(1);
  m.alpha = Eigen::VectorXd::Ones(1);
  const auto p = svm_predict(m, Eigen::VectorXd::Zero(1));
  EXPECT_EQ(p.decision, 0.0);
  EXPECT_EQ(p.label, 1);
}

TEST(Smo, XorIsNotLinearlySeparable) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y{-1, -1, 1, 1};
  const auto m = smo_train(x, y, 10.0);
  EXPECT_GE(oracle::audit_svm(m, x, y).train_errors, 1u);
  const auto rbf = smo_train(x, y, 10.0, {KernelType::Rbf, 1.0});
  EXPECT_EQ(oracle::audit_svm(rbf, x, y).train_errors, 0u);
}

TEST(Smo, SeparableTwentyPointsKkt) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [x, y] = oracle::separable_2d(seed, 20);
    const auto m = smo_train(x, y, 1.0);
    const auto a = oracle::audit_svm(m, x, y);
    EXPECT_TRUE(m.converged);
    EXPECT_LE(a.max_violation, 1e-3) << seed;
    EXPECT_LE(a.equality_residual, 1e-8);
    EXPECT_LE(a.box_violation, 0.0);
  }
}

TEST(Smo, SeparableLargeCPerfectTraining) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto [x, y] = oracle::separable_2d(seed, 5 + static_cast<int>(seed % 26));
    const auto m = smo_train(x, y, 1e3);
    const auto a = oracle::audit_svm(m, x, y);
    EXPECT_EQ(a.train_errors, 0u) << seed;
    EXPECT_LE(a.max_violation, 1e-3) << seed;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      EXPECT_EQ(svm_predict(m, x.row(i).transpose()).label, y[static_cast<std::size_t>(i)]);
  }
}

TEST(Smo, RbfKkt) {
  Rng rng(3);
  Eigen::MatrixXd x(40, 2);
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y.push_back(x.row(i).norm() > 1.0 ? 1 : -1);
  }
  const auto m = smo_train(x, y, 5.0, {KernelType::Rbf, 0.5});
  const auto a = oracle::audit_svm(m, x, y);
  EXPECT_LE(a.max_violation, 1e-3);
  EXPECT_LE(a.equality_residual, 1e-8);
}

TEST(Smo, Errors) {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  EXPECT_THROW(smo_train(x, std::vector<int>{1, 1, 1}, 1.0), DataError);
  EXPECT_THROW(smo_train(x, std::vector<int>{1, 0, -1}, 1.0), DataError);
  EXPECT_THROW(smo_train(x, std::vector<int>{1, -1}, 1.0), DataError);
  EXPECT_THROW(smo_train(x, std::vector<int>{1, -1, 1}, 0.0), DataError);
  x(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(smo_train(x, std::vector<int>{1, -1, 1}, 1.0), DataError);
}

TEST(Standardizer, DropsConstantColumnsAndChecksWidth) {
  Eigen::MatrixXd x(4, 3);
  x << 1, 5, 0, 2, 5, 1, 3, 5, 0, 4, 5, 1;
  const auto s = Standardizer::fit(x);
  EXPECT_EQ(s.kept, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(s.dropped, (std::vector<std::size_t>{1}));
  EXPECT_GT(s.stddev.minCoeff(), 0.0);
  EXPECT_THROW(s.apply(Eigen::VectorXd::Zero(2)), DataError);
}

TEST(Standardizer, ConstantShiftChangesNoPrediction) {
  const auto [x, y] = oracle::separable_2d(7, 25);
  Eigen::MatrixXd shifted = x;
  shifted.col(0).array() += 1000.0;
  const auto a = smo_train(x, y, 10.0), b = smo_train(shifted, y, 10.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd p(2);
    p << rng.uniform(-3, 3), rng.uniform(-3, 3);
    Eigen::VectorXd q = p;
    q[0] += 1000.0;
    EXPECT_EQ(svm_predict(a, p).label, svm_predict(b, q).label);
  }
}

TEST(Serialize, RoundTrip) {
  const auto [x, y] = oracle::separable_2d(11, 30);
  const auto m = smo_train(x, y, 1.0, {KernelType::Rbf, 0.7});
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    EXPECT_EQ(svm_predict(back, x.row(i).transpose()).decision, svm_predict(m, x.row(i).transpose()).decision);
  auto bad = model_to_json(m);
  bad["kernel"]["type"] = "poly";
  EXPECT_THROW(model_from_json(bad), DataError);
  bad = model_to_json(m);
  bad["coef"] = std::vector<double>{1.0};
  EXPECT_THROW(model_from_json(bad), DataError);
}

}  // namespace
}  // namespace roadwet::svm
