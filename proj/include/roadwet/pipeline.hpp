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


// Glue between extracted features and the two model families: training on a
// set of trips, per-trip prediction, and a self-describing model container.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "roadwet/dataset.hpp"
#include "roadwet/eval.hpp"
#include "roadwet/rnn.hpp"
#include "roadwet/svm.hpp"

namespace roadwet {

enum class Arch { Lstm, Blstm, Svm };

inline Arch arch_from_string(std::string_view s) {
  if (s == "lstm") return Arch::Lstm;
  if (s == "blstm") return Arch::Blstm;
  if (s == "svm") return Arch::Svm;
  throw DataError("unknown arch '" + std::string(s) + "' (expected lstm|blstm|svm)");
}

inline std::string_view to_string(Arch a) { return a == Arch::Lstm ? "lstm" : a == Arch::Blstm ? "blstm" : "svm"; }

struct TrainOptions {
  Arch arch = Arch::Blstm;
  rnn::NetworkSpec rnn;         // input_dim is filled from the data
  double C = 1e-3;
  svm::Kernel kernel;
  double svm_tol = 1e-3;
  std::vector<std::size_t> columns;  // feature subset; empty keeps all
};

/// A trained model plus the column subset it reads.
struct ModelBundle {
  std::variant<rnn::RnnModel, svm::SvmModel> model;
  std::vector<std::size_t> columns;
  std::vector<std::string> feature_names;  // names of the columns actually used
  std::optional<rnn::TrainHistory> history;

  Arch arch() const {
    if (std::holds_alternative<svm::SvmModel>(model)) return Arch::Svm;
    return std::get<rnn::RnnModel>(model).spec.bidirectional ? Arch::Blstm : Arch::Lstm;
  }
};

inline FeatureMatrix model_inputs(const TripFeatures& t, const std::vector<std::size_t>& columns) {
  return columns.empty() ? t.features : select_columns(t.features, columns);
}

inline rnn::Sequence to_sequence(const TripFeatures& t, const std::vector<std::size_t>& columns) {
  return {model_inputs(t, columns).values.transpose(), t.labels};
}

/// Trains on `train`; `validation` (possibly empty) drives RNN early stopping.
inline ModelBundle train_model(const std::vector<const TripFeatures*>& train,
                               const std::vector<const TripFeatures*>& validation, const TrainOptions& opt) {
  if (train.empty()) throw DataError("no training trips");
  ModelBundle b;
  b.columns = opt.columns;
  b.feature_names = model_inputs(*train.front(), opt.columns).feature_names;
  const std::size_t dims = b.feature_names.size();
  for (const auto* t : train)
    if (t->features.dims() != train.front()->features.dims()) throw DataError("training trips differ in feature count");

  if (opt.arch == Arch::Svm) {
    Eigen::Index rows = 0;
    for (const auto* t : train) rows += static_cast<Eigen::Index>(t->frames());
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(dims));
    std::vector<int> y;
    Eigen::Index r = 0;
    for (const auto* t : train) {
      const auto fm = model_inputs(*t, opt.columns);
      x.middleRows(r, fm.values.rows()) = fm.values;
      r += fm.values.rows();
      for (int l : t->labels) y.push_back(l == 1 ? 1 : -1);
    }
    b.model = svm::smo_train(x, y, opt.C, opt.kernel, opt.svm_tol);
    return b;
  }

  rnn::NetworkSpec spec = opt.rnn;
  spec.input_dim = dims;
  spec.bidirectional = opt.arch == Arch::Blstm;
  std::vector<rnn::Sequence> tr, va;
  for (const auto* t : train) tr.push_back(to_sequence(*t, opt.columns));
  for (const auto* t : validation) va.push_back(to_sequence(*t, opt.columns));
  auto result = rnn::train(rnn::init_model(spec), tr, va);
  b.model = std::move(result.model);
  b.history = std::move(result.history);
  return b;
}

inline eval::TripPrediction predict_trip(const ModelBundle& b, const TripFeatures& t) {
  const FeatureMatrix fm = model_inputs(t, b.columns);
  if (fm.dims() != b.feature_names.size())
    throw DataError("trip '" + t.trip_id + "' has " + std::to_string(fm.dims()) + " features, model expects " +
                    std::to_string(b.feature_names.size()));
  eval::TripPrediction out;
  if (const auto* m = std::get_if<svm::SvmModel>(&b.model)) {
    for (Eigen::Index i = 0; i < fm.values.rows(); ++i) {
      const auto p = svm::svm_predict(*m, fm.values.row(i).transpose());
      out.classes.push_back(p.label > 0 ? 1 : 0);
      out.posterior_wet.push_back(1.0 / (1.0 + std::exp(-p.decision)));
    }
    return out;
  }
  const auto& m = std::get<rnn::RnnModel>(b.model);
  const auto p = rnn::predict_frames(m, fm.values.transpose());
  out.classes = p.classes;
  for (Eigen::Index i = 0; i < p.posteriors.cols(); ++i) out.posterior_wet.push_back(p.posteriors(1, i));
  return out;
}

/// Trainer for the cross-route protocol: validates on the training trips.
inline eval::Trainer make_trainer(const TrainOptions& opt) {
  return [opt](const std::vector<const TripFeatures*>& train) {
    auto bundle = std::make_shared<ModelBundle>(train_model(train, {}, opt));
    return eval::Predictor([bundle](const TripFeatures& t) { return predict_trip(*bundle, t); });
  };
}

inline nlohmann::json bundle_to_json(const ModelBundle& b) {
  nlohmann::json j;
  if (const auto* m = std::get_if<svm::SvmModel>(&b.model)) {
    j = svm::model_to_json(*m);
  } else {
    const auto& r = std::get<rnn::RnnModel>(b.model);
    j = rnn::model_to_json(r, b.history ? &*b.history : nullptr);
  }
  j["arch"] = to_string(b.arch());
  j["input_columns"] = b.columns;
  j["input_names"] = b.feature_names;
  return j;
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  try {
    ModelBundle b;
    const auto format = j.at("format").get<std::string>();
    if (format == "roadwet-svm") b.model = svm::model_from_json(j);
    else if (format == "roadwet-rnn") b.model = rnn::model_from_json(j);
    else throw DataError("unknown model format '" + format + "'");
    b.columns = j.at("input_columns").get<std::vector<std::size_t>>();
    b.feature_names = j.at("input_names").get<std::vector<std::string>>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace roadwet
