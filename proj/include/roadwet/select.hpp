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
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "roadwet/core.hpp"

namespace roadwet::select {

namespace detail {

/// Maps arbitrary class ids onto 0..C-1 in ascending id order.
inline std::vector<int> compact_labels(std::span<const int> labels, int* num_classes) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [id, idx] : ids) idx = next++;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
  *num_classes = next;
  return out;
}

inline double entropy_of_counts(std::span<const double> counts, double total) {
  if (total <= 0) return 0.0;
  double h = 0.0;
  for (double c : counts)
    if (c > 0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  return h;
}

}  // namespace detail

/// Shannon entropy in bits; 0*log(0) is taken as 0.
inline double entropy(std::span<const int> labels) {
  if (labels.empty()) throw DataError("entropy of an empty label sequence");
  int k = 0;
  const auto compact = detail::compact_labels(labels, &k);
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (int c : compact) counts[static_cast<std::size_t>(c)] += 1.0;
  return detail::entropy_of_counts(counts, static_cast<double>(labels.size()));
}

/// Interval index of `v` given ascending cut points: values below cuts[0]
/// fall in bin 0, values >= cuts.back() in the last bin.
inline int bin_of(std::span<const double> cuts, double v) {
  return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
}

inline std::vector<int> apply_cuts(std::span<const double> values, std::span<const double> cuts) {
  std::vector<int> bins(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) bins[i] = bin_of(cuts, values[i]);
  return bins;
}

namespace detail {

// Recursive Fayyad-Irani splitting over sorted[lo, hi).
inline void mdl_split(const std::vector<double>& v, const std::vector<int>& y, int num_classes, std::size_t lo,
                      std::size_t hi, std::vector<double>& cuts) {
  const std::size_t n = hi - lo;
  if (n < 2) return;
  const auto k_sz = static_cast<std::size_t>(num_classes);
  std::vector<double> total(k_sz, 0.0), left(k_sz, 0.0), right(k_sz);
  for (std::size_t i = lo; i < hi; ++i) total[static_cast<std::size_t>(y[i])] += 1.0;
  const double h_all = entropy_of_counts(total, static_cast<double>(n));

  double best_weighted = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_pos;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    left[static_cast<std::size_t>(y[i - 1])] += 1.0;
    if (!(v[i - 1] < v[i])) continue;
    const double nl = static_cast<double>(i - lo), nr = static_cast<double>(hi - i);
    for (std::size_t c = 0; c < k_sz; ++c) right[c] = total[c] - left[c];
    const double w = (nl * entropy_of_counts(left, nl) + nr * entropy_of_counts(right, nr)) / static_cast<double>(n);
    if (w < best_weighted) {
      best_weighted = w;
      best_pos = i;
    }
  }
  if (!best_pos) return;

  const std::size_t split = *best_pos;
  std::vector<double> l(k_sz, 0.0), r(k_sz, 0.0);
  for (std::size_t i = lo; i < split; ++i) l[static_cast<std::size_t>(y[i])] += 1.0;
  for (std::size_t i = split; i < hi; ++i) r[static_cast<std::size_t>(y[i])] += 1.0;
  const auto present = [](const std::vector<double>& c) {
    return static_cast<double>(std::count_if(c.begin(), c.end(), [](double x) { return x > 0; }));
  };
  const double nl = static_cast<double>(split - lo), nr = static_cast<double>(hi - split);
  const double h_l = entropy_of_counts(l, nl), h_r = entropy_of_counts(r, nr);
  const double k = present(total), k1 = present(l), k2 = present(r);
  const double gain = h_all - best_weighted;
  const double delta = std::log2(std::pow(3.0, k) - 2.0) - (k * h_all - k1 * h_l - k2 * h_r);
  const double threshold = (std::log2(static_cast<double>(n) - 1.0) + delta) / static_cast<double>(n);
  if (!(gain > threshold)) return;

  cuts.push_back(0.5 * (v[split - 1] + v[split]));
  mdl_split(v, y, num_classes, lo, split, cuts);
  mdl_split(v, y, num_classes, split, hi, cuts);
}

}  // namespace detail

/// Supervised Fayyad-Irani MDL discretization of one feature. Returns the
/// ascending cut points (possibly none).
inline std::vector<double> mdl_discretize(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw DataError("mdl_discretize: values and labels differ in length");
  if (values.empty()) return {};
  int k = 0;
  const auto y_compact = detail::compact_labels(labels, &k);
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> v(values.size());
  std::vector<int> y(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    v[i] = values[order[i]];
    y[i] = y_compact[order[i]];
  }
  std::vector<double> cuts;
  detail::mdl_split(v, y, k, 0, v.size(), cuts);
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

/// Unsupervised fallback: `bins` equal-width intervals over the value range.
inline std::vector<double> equal_width_discretize(std::span<const double> values, int bins = 10) {
  if (values.empty() || bins < 2) return {};
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (!(*mn < *mx)) return {};
  std::vector<double> cuts;
  for (int b = 1; b < bins; ++b) cuts.push_back(*mn + (*mx - *mn) * b / bins);
  return cuts;
}

enum class Discretization { Mdl, EqualWidth };

/// Per-feature cut points.
struct Discretizer {
  std::vector<std::vector<double>> cuts;

  static Discretizer fit(const Eigen::MatrixXd& x, std::span<const int> labels,
                         Discretization method = Discretization::Mdl) {
    Discretizer d;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Eigen::VectorXd col = x.col(j);
      const std::span<const double> values(col.data(), static_cast<std::size_t>(col.size()));
      d.cuts.push_back(method == Discretization::Mdl ? mdl_discretize(values, labels) : equal_width_discretize(values));
    }
    return d;
  }
};

/// IG = H(labels) - sum_v (n_v/N) H(labels | bin v), in bits.
inline double info_gain(std::span<const double> values, std::span<const int> labels, std::span<const double> cuts) {
  if (values.size() != labels.size()) throw DataError("info_gain: values and labels differ in length");
  if (values.empty()) return 0.0;
  std::map<int, std::vector<int>> by_bin;
  for (std::size_t i = 0; i < values.size(); ++i) by_bin[bin_of(cuts, values[i])].push_back(labels[i]);
  double cond = 0.0;
  for (const auto& [bin, ys] : by_bin) cond += static_cast<double>(ys.size()) / values.size() * entropy(ys);
  return std::max(0.0, entropy(labels) - cond);
}

struct RankedFeatures {
  struct Entry {
    std::size_t feature = 0;
    double ig = 0.0;  // bits
  };
  std::vector<Entry> entries;
};

/// Scores every column by IG after discretization and sorts by descending
/// IG, breaking ties by ascending column index.
inline RankedFeatures rank_by_ig(const Eigen::MatrixXd& x, std::span<const int> labels,
                                 Discretization method = Discretization::Mdl) {
  if (x.cols() < 1) throw DataError("rank_by_ig needs at least one feature");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("rank_by_ig: row/label count mismatch");
  const Discretizer disc = Discretizer::fit(x, labels, method);
  RankedFeatures ranked;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Eigen::VectorXd col = x.col(j);
    ranked.entries.push_back({static_cast<std::size_t>(j),
                              info_gain({col.data(), static_cast<std::size_t>(col.size())}, labels,
                                        disc.cuts[static_cast<std::size_t>(j)])});
  }
  std::stable_sort(ranked.entries.begin(), ranked.entries.end(),
                   [](const auto& a, const auto& b) { return a.ig > b.ig; });
  return ranked;
}

inline std::vector<std::size_t> select_top(const RankedFeatures& ranked, std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, ranked.entries.size()); ++i) out.push_back(ranked.entries[i].feature);
  return out;
}

// ---------------------------------------------------------------------------
// Correlation-based feature selection

/// SU(X, Y) = 2 IG(X; Y) / (H(X) + H(Y)) over discrete codes; 0 when both
/// entropies vanish.
inline double symmetric_uncertainty(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw DataError("symmetric_uncertainty: length mismatch");
  if (x.empty()) return 0.0;
  const double hx = entropy(x), hy = entropy(y);
  if (hx + hy <= 0) return 0.0;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < x.size(); ++i) joint[{x[i], y[i]}] += 1.0;
  std::vector<double> counts;
  counts.reserve(joint.size());
  for (const auto& [key, c] : joint) counts.push_back(c);
  std::sort(counts.begin(), counts.end());  // summation order independent of argument order
  const double hxy = detail::entropy_of_counts(counts, static_cast<double>(x.size()));
  return std::clamp(2.0 * (hx + hy - hxy) / (hx + hy), 0.0, 1.0);
}

/// k * mean(r_cf) / sqrt(k + k (k - 1) mean(r_ff)).
inline double cfs_merit(std::span<const std::size_t> subset, std::span<const double> su_fc,
                        const Eigen::MatrixXd& su_ff) {
  if (subset.empty()) throw DataError("cfs_merit of an empty subset");
  const double k = static_cast<double>(subset.size());
  double rcf = 0.0;
  for (std::size_t f : subset) rcf += su_fc[f];
  rcf /= k;
  double rff = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < subset.size(); ++a)
    for (std::size_t b = a + 1; b < subset.size(); ++b, ++pairs)
      rff += su_ff(static_cast<Eigen::Index>(subset[a]), static_cast<Eigen::Index>(subset[b]));
  if (pairs > 0) rff /= static_cast<double>(pairs);
  return k * rcf / std::sqrt(k + k * (k - 1) * rff);
}

/// Discretized data plus the class and pairwise SU tables CFS consumes.
struct CfsProblem {
  std::vector<double> su_fc;
  Eigen::MatrixXd su_ff;

  static CfsProblem build(const Eigen::MatrixXd& x, std::span<const int> labels,
                          Discretization method = Discretization::Mdl) {
    if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("CFS: row/label count mismatch");
    const Discretizer disc = Discretizer::fit(x, labels, method);
    std::vector<std::vector<int>> codes;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Eigen::VectorXd col = x.col(j);
      codes.push_back(apply_cuts({col.data(), static_cast<std::size_t>(col.size())}, disc.cuts[static_cast<std::size_t>(j)]));
    }
    CfsProblem p;
    const auto d = static_cast<std::size_t>(x.cols());
    p.su_ff = Eigen::MatrixXd::Identity(x.cols(), x.cols());
    for (std::size_t a = 0; a < d; ++a) {
      p.su_fc.push_back(symmetric_uncertainty(codes[a], labels));
      for (std::size_t b = a + 1; b < d; ++b) {
        const double su = symmetric_uncertainty(codes[a], codes[b]);
        p.su_ff(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = su;
        p.su_ff(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = su;
      }
    }
    return p;
  }

  std::size_t dims() const { return su_fc.size(); }
  double merit(std::span<const std::size_t> subset) const { return cfs_merit(subset, su_fc, su_ff); }
};

struct SubsetResult {
  std::vector<std::size_t> indices;  // ascending
  double merit = 0.0;
  std::size_t evaluations = 0;
};

/// Forward best-first search over feature subsets. Stops once `max_stale`
/// consecutive node expansions fail to raise the best merit, or the open
/// list empties.
inline SubsetResult best_first_cfs(const CfsProblem& problem, std::size_t max_stale = 5) {
  if (problem.dims() < 1) throw DataError("best_first_cfs needs at least one feature");
  if (max_stale < 1) throw DataError("best_first_cfs: max_stale must be >= 1");
  using Subset = std::vector<std::size_t>;
  struct Node {
    double merit;
    Subset subset;
    bool operator<(const Node& o) const {
      if (merit != o.merit) return merit > o.merit;
      return subset < o.subset;
    }
  };
  std::set<Node> open{{0.0, {}}};
  std::set<Subset> visited{{}};
  SubsetResult best;
  bool have_best = false;
  std::size_t stale = 0;

  while (!open.empty()) {
    const Node node = *open.begin();
    open.erase(open.begin());
    bool improved = false;
    for (std::size_t f = 0; f < problem.dims(); ++f) {
      if (std::binary_search(node.subset.begin(), node.subset.end(), f)) continue;
      Subset child = node.subset;
      child.insert(std::upper_bound(child.begin(), child.end(), f), f);
      if (!visited.insert(child).second) continue;
      const double m = problem.merit(child);
      ++best.evaluations;
      if (!have_best || m > best.merit) {
        best.indices = child;
        best.merit = m;
        have_best = improved = true;
      }
      open.insert({m, std::move(child)});
    }
    stale = improved ? 0 : stale + 1;
    if (stale >= max_stale) break;
  }
  return best;
}

inline SubsetResult best_first_cfs(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t max_stale = 5,
                                   Discretization method = Discretization::Mdl) {
  return best_first_cfs(CfsProblem::build(x, labels, method), max_stale);
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json ig_report(const RankedFeatures& ranked, std::size_t top_k,
                                const std::vector<std::string>& names) {
  nlohmann::json j;
  j["method"] = "ig";
  j["parameters"] = {{"top_k", top_k}, {"discretization", "mdl"}};
  auto list = nlohmann::json::array();
  for (const auto& e : ranked.entries)
    list.push_back({{"index", e.feature}, {"name", e.feature < names.size() ? names[e.feature] : ""}, {"ig", e.ig}});
  j["ranked"] = std::move(list);
  j["selected"] = select_top(ranked, top_k);
  j["evaluations"] = ranked.entries.size();
  return j;
}

inline nlohmann::json cfs_report(const SubsetResult& r, std::size_t max_stale, const std::vector<std::string>& names) {
  nlohmann::json j;
  j["method"] = "cfs";
  j["parameters"] = {{"search", "best_first_forward"}, {"max_stale", max_stale}, {"discretization", "mdl"}};
  j["selected"] = r.indices;
  auto sel_names = nlohmann::json::array();
  for (auto i : r.indices) sel_names.push_back(i < names.size() ? names[i] : "");
  j["selected_names"] = std::move(sel_names);
  j["merit"] = r.merit;
  j["evaluations"] = r.evaluations;
  return j;
}

/// Reads the selected column indices back out of either report kind.
inline std::vector<std::size_t> selected_from_report(const nlohmann::json& report) {
  try {
    return report.at("selected").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("selection report: ") + e.what());
  }
}

}  // namespace roadwet::select
