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
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "roadwet/core.hpp"
#include "roadwet/dataset.hpp"
#include "roadwet/metrics.hpp"

namespace roadwet::eval {

/// One evaluated frame.
struct TimelineEntry {
  std::string trip_id;
  double time_s = 0.0;
  double speed_mph = 0.0;
  int label = 0;
  int prediction = 0;
  double posterior_wet = 0.0;
};

struct TripPrediction {
  std::vector<int> classes;
  std::vector<double> posterior_wet;
};

using Predictor = std::function<TripPrediction(const TripFeatures&)>;
/// Trains on the given trips and returns the resulting predictor.
using Trainer = std::function<Predictor(const std::vector<const TripFeatures*>&)>;

struct StratifiedUar {
  double threshold_mph = 0.0;
  std::optional<double> uar_below;        // speed < threshold
  std::optional<double> uar_at_or_above;  // speed >= threshold
  ConfusionMatrix below, at_or_above;
};

/// UAR on each side of a speed threshold. A stratum missing either class
/// reports no value rather than failing.
inline StratifiedUar speed_stratified_uar(const std::vector<TimelineEntry>& timeline, double threshold_mph) {
  StratifiedUar s;
  s.threshold_mph = threshold_mph;
  for (const auto& e : timeline) (e.speed_mph < threshold_mph ? s.below : s.at_or_above).add(e.label, e.prediction);
  if (s.below.both_classes_present()) s.uar_below = uar(s.below);
  if (s.at_or_above.both_classes_present()) s.uar_at_or_above = uar(s.at_or_above);
  return s;
}

struct FalsePrediction {
  double time_s = 0.0;
  double speed_mph = 0.0;
  bool operator==(const FalsePrediction&) const = default;
};

/// Misclassified frames in ascending time order.
inline std::vector<FalsePrediction> false_prediction_timeline(const std::vector<TimelineEntry>& timeline) {
  std::vector<FalsePrediction> out;
  for (const auto& e : timeline)
    if (e.prediction != e.label) out.push_back({e.time_s, e.speed_mph});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time_s < b.time_s; });
  return out;
}

struct Experiment {
  int train_route = 0;
  int test_route = 0;
  ConfusionMatrix confusion;
  double uar = 0.0;
  StratifiedUar stratified;
  std::vector<TimelineEntry> timeline;
  std::vector<std::string> train_trips;
  std::vector<std::string> test_trips;
};

struct EvalReport {
  std::vector<Experiment> experiments;
  double mean_uar = 0.0;
  double speed_threshold_mph = 2.9;
};

/// Routes that carry exactly one wet and one dry trip, keyed by route id.
inline std::map<int, std::vector<const TripFeatures*>> group_routes(const std::vector<TripFeatures>& trips) {
  std::map<int, std::vector<const TripFeatures*>> routes;
  for (const auto& t : trips) routes[t.route_id].push_back(&t);
  for (const auto& [route, list] : routes) {
    bool wet = false, dry = false;
    for (const auto* t : list)
      for (int l : t->labels) (l == 1 ? wet : dry) = true;
    if (!wet || !dry)
      throw DataError("route " + std::to_string(route) + " lacks a " + (wet ? "dry" : "wet") + " trip");
  }
  return routes;
}

inline Experiment run_experiment(int train_route, int test_route, const std::vector<const TripFeatures*>& train,
                                 const std::vector<const TripFeatures*>& test, const Trainer& trainer,
                                 double threshold_mph) {
  Experiment ex;
  ex.train_route = train_route;
  ex.test_route = test_route;
  for (const auto* t : train) ex.train_trips.push_back(t->trip_id);
  const Predictor predict = trainer(train);
  for (const auto* t : test) {
    ex.test_trips.push_back(t->trip_id);
    const TripPrediction p = predict(*t);
    if (p.classes.size() != t->frames() || p.posterior_wet.size() != t->frames())
      throw DataError("predictor returned wrong number of frames for trip '" + t->trip_id + "'");
    for (std::size_t i = 0; i < t->frames(); ++i) {
      ex.confusion.add(t->labels[i], p.classes[i]);
      ex.timeline.push_back({t->trip_id, t->features.frame_times[i], t->speeds[i], t->labels[i], p.classes[i],
                             p.posterior_wet[i]});
    }
  }
  ex.uar = uar(ex.confusion);
  ex.stratified = speed_stratified_uar(ex.timeline, threshold_mph);
  return ex;
}

/// Leave-route-out protocol: one experiment per ordered pair of distinct
/// routes (train on one, test on the other), in ascending route order. The
/// trainer only ever sees the training route's trips.
inline EvalReport cross_route_eval(const std::vector<TripFeatures>& trips, const Trainer& trainer,
                                   double threshold_mph = 2.9, std::size_t threads = 1) {
  const auto routes = group_routes(trips);
  if (routes.size() < 3) throw DataError("cross-route protocol needs at least 3 routes, found " + std::to_string(routes.size()));
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [a, ta] : routes)
    for (const auto& [b, tb] : routes)
      if (a != b) pairs.emplace_back(a, b);

  EvalReport report;
  report.speed_threshold_mph = threshold_mph;
  report.experiments.resize(pairs.size());
  const auto run = [&](std::size_t k) {
    const auto [a, b] = pairs[k];
    report.experiments[k] = run_experiment(a, b, routes.at(a), routes.at(b), trainer, threshold_mph);
  };
  if (threads <= 1) {
    for (std::size_t k = 0; k < pairs.size(); ++k) run(k);
  } else {
    for (std::size_t start = 0; start < pairs.size(); start += threads) {
      std::vector<std::future<void>> jobs;
      for (std::size_t k = start; k < std::min(pairs.size(), start + threads); ++k)
        jobs.push_back(std::async(std::launch::async, run, k));
      for (auto& j : jobs) j.get();
    }
  }
  double sum = 0.0;
  for (const auto& e : report.experiments) sum += e.uar;
  report.mean_uar = sum / static_cast<double>(report.experiments.size());
  return report;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
  Eigen::MatrixXd projected;          // n x k
  Eigen::VectorXd explained_variance;  // fraction of total variance per component
  Eigen::MatrixXd components;          // dims x k, unit columns
};

/// Projects centered rows onto the top-k covariance eigenvectors. Each
/// component is signed so its largest-magnitude loading is positive.
inline PcaResult pca_project(const Eigen::MatrixXd& x, std::size_t k = 2) {
  if (x.rows() < 2) throw DataError("PCA needs at least 2 rows");
  if (k > static_cast<std::size_t>(x.cols())) throw DataError("PCA: k exceeds feature dimension");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd evals = solver.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();
  const double total = evals.sum();

  PcaResult r;
  const auto kk = static_cast<Eigen::Index>(k);
  r.components = evecs.leftCols(kk);
  for (Eigen::Index c = 0; c < kk; ++c) {
    Eigen::Index arg = 0;
    r.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (r.components(arg, c) < 0) r.components.col(c) *= -1.0;
  }
  r.explained_variance = total > 0 ? Eigen::VectorXd(evals.head(kk) / total) : Eigen::VectorXd::Zero(kk);
  r.projected = centered * r.components;
  return r;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json confusion_json(const ConfusionMatrix& cm) {
  return {{"dry", {{"dry", cm.counts[0][0]}, {"wet", cm.counts[0][1]}}},
          {"wet", {{"dry", cm.counts[1][0]}, {"wet", cm.counts[1][1]}}}};
}

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json stratified_json(const StratifiedUar& s) {
  return {{"threshold_mph", s.threshold_mph},
          {"uar_below", optional_json(s.uar_below)},
          {"uar_at_or_above", optional_json(s.uar_at_or_above)},
          {"frames_below", s.below.total()},
          {"frames_at_or_above", s.at_or_above.total()},
          {"confusion_below", confusion_json(s.below)},
          {"confusion_at_or_above", confusion_json(s.at_or_above)}};
}

/// Report JSON; per-frame timelines go to the CSV export instead.
inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  auto exps = nlohmann::json::array();
  std::vector<TimelineEntry> pooled;
  for (const auto& e : r.experiments) {
    exps.push_back({{"train_route", e.train_route},
                    {"test_route", e.test_route},
                    {"train_trips", e.train_trips},
                    {"test_trips", e.test_trips},
                    {"frames", e.confusion.total()},
                    {"confusion", confusion_json(e.confusion)},
                    {"uar", e.uar},
                    {"speed_stratified", stratified_json(e.stratified)},
                    {"false_predictions", false_prediction_timeline(e.timeline).size()}});
    pooled.insert(pooled.end(), e.timeline.begin(), e.timeline.end());
  }
  j["experiments"] = std::move(exps);
  j["mean_uar"] = r.mean_uar;
  j["speed_threshold_mph"] = r.speed_threshold_mph;
  j["pooled_speed_stratified"] = stratified_json(speed_stratified_uar(pooled, r.speed_threshold_mph));
  return j;
}

inline std::string timeline_csv_header() { return "time_s,speed_mph,label,prediction,posterior_wet"; }

inline std::string timeline_row(const TimelineEntry& e) {
  return format_g9(e.time_s) + "," + format_g9(e.speed_mph) + "," + std::to_string(e.label) + "," +
         std::to_string(e.prediction) + "," + format_g9(e.posterior_wet);
}

/// Timeline CSV for one set of predictions: trip_id then the timeline columns.
inline std::string timeline_csv(const std::vector<TimelineEntry>& timeline) {
  std::string out = "trip_id," + timeline_csv_header() + "\n";
  for (const auto& e : timeline) out += e.trip_id + "," + timeline_row(e) + "\n";
  return out;
}

/// All experiments' timelines, prefixed by the experiment's route pair.
inline std::string report_timeline_csv(const EvalReport& r) {
  std::string out = "train_route,test_route,trip_id," + timeline_csv_header() + "\n";
  for (const auto& e : r.experiments)
    for (const auto& t : e.timeline)
      out += std::to_string(e.train_route) + "," + std::to_string(e.test_route) + "," + t.trip_id + "," +
             timeline_row(t) + "\n";
  return out;
}

}  // namespace roadwet::eval
