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

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "roadwet/core.hpp"

namespace roadwet {

/// Raised when a recall is requested for a class with no true examples.
class UndefinedRecall : public DataError {
 public:
  using DataError::DataError;
};

/// counts[true][predicted] over {Dry = 0, Wet = 1}.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};

  void add(int truth, int predicted) {
    if (truth < 0 || truth > 1 || predicted < 0 || predicted > 1) throw DataError("class index out of range");
    ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
  }
  std::uint64_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  std::uint64_t class_total(int c) const {
    return counts[static_cast<std::size_t>(c)][0] + counts[static_cast<std::size_t>(c)][1];
  }
  double recall(int c) const {
    const auto n = class_total(c);
    if (n == 0) throw UndefinedRecall(std::string("no true examples of class ") + (c == 1 ? "wet" : "dry"));
    return static_cast<double>(counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
           static_cast<double>(n);
  }
  bool both_classes_present() const { return class_total(0) > 0 && class_total(1) > 0; }

  static ConfusionMatrix from(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) throw DataError("truth/prediction length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
  }
};

/// Unweighted average recall: mean of the per-class recalls.
inline double uar(const ConfusionMatrix& cm) { return 0.5 * (cm.recall(0) + cm.recall(1)); }

}  // namespace roadwet
