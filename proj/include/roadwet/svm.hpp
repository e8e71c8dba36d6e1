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


#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "roadwet/core.hpp"

namespace roadwet::svm {

enum class KernelType { Linear, Rbf };

struct Kernel {
  KernelType type = KernelType::Linear;
  double gamma = 1.0;  // RBF only: exp(-gamma |a - b|^2)

  template <typename A, typename B>
  double operator()(const A& a, const B& b) const {
    if (type == KernelType::Linear) return a.dot(b);
    return std::exp(-gamma * (a - b).squaredNorm());
  }
};

/// Z-score transform fitted on training data. Zero-variance columns are
/// dropped and listed in `dropped`.
struct Standardizer {
  std::size_t input_dim = 0;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;
  Eigen::VectorXd mean;    // over kept columns
  Eigen::VectorXd stddev;  // over kept columns, all > 0

  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    s.input_dim = static_cast<std::size_t>(x.cols());
    std::vector<double> mu, sd;
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double m = x.col(j).mean();
      const double v = (x.col(j).array() - m).square().sum() / n;
      if (v > 0 && std::sqrt(v) > 1e-12 * std::max(1.0, std::abs(m))) {
        s.kept.push_back(static_cast<std::size_t>(j));
        mu.push_back(m);
        sd.push_back(std::sqrt(v));
      } else {
        s.dropped.push_back(static_cast<std::size_t>(j));
      }
    }
    s.mean = Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    s.stddev = Eigen::Map<Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    return s;
  }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& row) const {
    if (static_cast<std::size_t>(row.size()) != input_dim)
      throw DataError("SVM input has " + std::to_string(row.size()) + " features, model expects " +
                      std::to_string(input_dim));
    Eigen::VectorXd out(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out[jj] = (row[static_cast<Eigen::Index>(kept[j])] - mean[jj]) / stddev[jj];
    }
    return out;
  }

  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(kept.size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = apply(x.row(i).transpose()).transpose();
    return out;
  }
};

struct SvmModel {
  Kernel kernel;
  double C = 1.0;
  double tol = 1e-3;
  Standardizer standardizer;
  Eigen::MatrixXd support_vectors;  // standardized, one per row
  Eigen::VectorXd coef;             // alpha_i * y_i
  Eigen::VectorXd alpha;            // alpha_i, in [0, C]
  std::vector<std::size_t> sv_indices;  // rows of the training set
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct Prediction {
  int label = 1;  // -1 or +1
  double decision = 0.0;
};

/// Decision value on an already standardized input.
inline double decision_standardized(const SvmModel& m, const Eigen::Ref<const Eigen::VectorXd>& z) {
  double f = m.bias;
  for (Eigen::Index s = 0; s < m.support_vectors.rows(); ++s)
    f += m.coef[s] * m.kernel(m.support_vectors.row(s).transpose(), z);
  return f;
}

/// sign(sum_i alpha_i y_i K(x_i, x) + b); a zero decision value maps to +1.
inline Prediction svm_predict(const SvmModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double f = decision_standardized(m, m.standardizer.apply(x));
  return {f >= 0 ? 1 : -1, f};
}

/// Dual SMO: repeatedly picks the maximal KKT-violating pair and solves the
/// two-variable subproblem analytically. Stops when the violation gap drops
/// below `tol` or after max_passes * n pair updates.
inline SvmModel smo_train(const Eigen::MatrixXd& features, std::span<const int> labels, double C,
                          Kernel kernel = {}, double tol = 1e-3, std::size_t max_passes = 1000) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw DataError("smo_train: label count mismatch");
  if (!(C > 0)) throw DataError("smo_train: C must be > 0");
  if (!features.allFinite()) throw DataError("smo_train: non-finite feature value");
  std::size_t pos = 0, neg = 0;
  for (int y : labels) {
    if (y == 1) ++pos;
    else if (y == -1) ++neg;
    else throw DataError("smo_train: labels must be -1 or +1");
  }
  if (pos == 0 || neg == 0) throw DataError("smo_train: need at least one example of each class");

  SvmModel model;
  model.kernel = kernel;
  model.C = C;
  model.tol = tol;
  model.standardizer = Standardizer::fit(features);
  const Eigen::MatrixXd x = model.standardizer.apply_rows(features);

  std::vector<double> y(labels.begin(), labels.end());
  std::vector<double> alpha(n, 0.0), grad(n, -1.0), diag(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto tt = static_cast<Eigen::Index>(t);
    diag[t] = kernel(x.row(tt), x.row(tt));
  }
  const auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  const auto lower = [&](std::size_t t) { return alpha[t] <= 0; };
  const double tau = 1e-12;
  Eigen::VectorXd ki(static_cast<Eigen::Index>(n)), kj(static_cast<Eigen::Index>(n));

  const std::size_t max_iter = std::max<std::size_t>(max_passes, 1) * std::max<std::size_t>(n, 1);
  for (; model.iterations < max_iter; ++model.iterations) {
    double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      const bool in_up = y[t] > 0 ? !upper(t) : !lower(t);
      const bool in_low = y[t] > 0 ? !lower(t) : !upper(t);
      if (in_up && v > gmax) gmax = v, i = t;
      if (in_low && v < gmin) gmin = v, j = t;
    }
    if (i == n || j == n || gmax - gmin < tol) {
      model.converged = true;
      break;
    }

    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    for (std::size_t t = 0; t < n; ++t) {
      const auto tt = static_cast<Eigen::Index>(t);
      ki[tt] = kernel(x.row(ii), x.row(tt));
      kj[tt] = kernel(x.row(jj), x.row(tt));
    }
    const double old_ai = alpha[i], old_aj = alpha[j];
    const double qij = y[i] * y[j] * ki[jj];
    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] + 2 * qij;
      if (quad <= 0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
      } else if (alpha[j] > C) {
        alpha[j] = C, alpha[i] = C + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2 * qij;
      if (quad <= 0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
      } else if (alpha[j] < 0) {
        alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      const auto tt = static_cast<Eigen::Index>(t);
      grad[t] += y[t] * (y[i] * ki[tt] * dai + y[j] * kj[tt] * daj);
    }
  }

  // Bias: average over free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity(), sum_free = 0;
  std::size_t nfree = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++nfree;
      sum_free += yg;
    }
  }
  const double rho = nfree > 0 ? sum_free / static_cast<double>(nfree) : (ub + lb) / 2;
  model.bias = -rho;

  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0) model.sv_indices.push_back(t);
  const auto nsv = static_cast<Eigen::Index>(model.sv_indices.size());
  model.support_vectors.resize(nsv, x.cols());
  model.coef.resize(nsv);
  model.alpha.resize(nsv);
  for (Eigen::Index s = 0; s < nsv; ++s) {
    const std::size_t t = model.sv_indices[static_cast<std::size_t>(s)];
    model.support_vectors.row(s) = x.row(static_cast<Eigen::Index>(t));
    model.alpha[s] = alpha[t];
    model.coef[s] = alpha[t] * y[t];
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json model_to_json(const SvmModel& m) {
  nlohmann::json j;
  j["format"] = "roadwet-svm";
  j["format_version"] = 1;
  j["kernel"] = {{"type", m.kernel.type == KernelType::Linear ? "linear" : "rbf"}, {"gamma", m.kernel.gamma}};
  j["C"] = m.C;
  j["tol"] = m.tol;
  const auto& s = m.standardizer;
  j["standardization"] = {{"input_dim", s.input_dim},
                          {"kept", s.kept},
                          {"dropped", s.dropped},
                          {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                          {"stddev", std::vector<double>(s.stddev.data(), s.stddev.data() + s.stddev.size())}};
  auto svs = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.support_vectors.cols()));
    for (Eigen::Index c = 0; c < m.support_vectors.cols(); ++c) row[static_cast<std::size_t>(c)] = m.support_vectors(r, c);
    svs.push_back(row);
  }
  j["support_vectors"] = std::move(svs);
  j["coef"] = std::vector<double>(m.coef.data(), m.coef.data() + m.coef.size());
  j["alpha"] = std::vector<double>(m.alpha.data(), m.alpha.data() + m.alpha.size());
  j["bias"] = m.bias;
  j["iterations"] = m.iterations;
  j["converged"] = m.converged;
  return j;
}

inline SvmModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "roadwet-svm") throw DataError("not an SVM model file");
    SvmModel m;
    const auto type = j.at("kernel").at("type").get<std::string>();
    if (type != "linear" && type != "rbf") throw DataError("unknown SVM kernel '" + type + "'");
    m.kernel.type = type == "linear" ? KernelType::Linear : KernelType::Rbf;
    m.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    m.C = j.at("C").get<double>();
    m.tol = j.at("tol").get<double>();
    const auto& s = j.at("standardization");
    m.standardizer.input_dim = s.at("input_dim").get<std::size_t>();
    m.standardizer.kept = s.at("kept").get<std::vector<std::size_t>>();
    m.standardizer.dropped = s.at("dropped").get<std::vector<std::size_t>>();
    auto mu = s.at("mean").get<std::vector<double>>();
    auto sd = s.at("stddev").get<std::vector<double>>();
    if (mu.size() != m.standardizer.kept.size() || sd.size() != mu.size()) throw DataError("SVM standardization size mismatch");
    m.standardizer.mean = Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    m.standardizer.stddev = Eigen::Map<Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    const auto& svs = j.at("support_vectors");
    const auto dims = static_cast<Eigen::Index>(mu.size());
    m.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), dims);
    for (std::size_t r = 0; r < svs.size(); ++r) {
      const auto row = svs[r].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != dims) throw DataError("SVM support vector width mismatch");
      for (Eigen::Index c = 0; c < dims; ++c) m.support_vectors(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
    }
    auto coef = j.at("coef").get<std::vector<double>>();
    auto alpha = j.at("alpha").get<std::vector<double>>();
    if (coef.size() != svs.size() || alpha.size() != svs.size()) throw DataError("SVM coefficient count mismatch");
    m.coef = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    m.alpha = Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    m.bias = j.at("bias").get<double>();
    m.iterations = j.at("iterations").get<std::size_t>();
    m.converged = j.at("converged").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SVM model: ") + e.what());
  }
}

}  // namespace roadwet::svm
