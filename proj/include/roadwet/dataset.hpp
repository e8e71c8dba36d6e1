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

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "roadwet/dsp.hpp"
#include "roadwet/ingest.hpp"

namespace roadwet {

/// Features of one trip joined with its per-frame labels and speeds.
struct TripFeatures {
  std::string trip_id;
  int route_id = -1;
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<double> speeds;

  std::size_t frames() const { return features.frames(); }
};

enum class FeatureSet { Asf, Octave };

inline FeatureSet feature_set_from_string(std::string_view s) {
  if (s == "asf") return FeatureSet::Asf;
  if (s == "octave") return FeatureSet::Octave;
  throw DataError("unknown feature set '" + std::string(s) + "' (expected asf|octave)");
}

inline TripFeatures extract_trip(const TripManifest& m, const AudioClip& clip, FeatureSet set) {
  TripFeatures tf;
  tf.trip_id = m.trip_id;
  tf.route_id = m.route_id;
  tf.features = set == FeatureSet::Asf ? asf_features(clip) : third_octave_features(clip);
  const auto seq = label_frames(m, tf.features.frame_times);
  tf.labels = seq.labels;
  tf.speeds = seq.speeds;
  return tf;
}

inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// CSV: trip_id,frame_time_s,label,speed_mph,<feature names...>; one row per
/// frame; numbers printed with 9 significant digits.
inline std::string feature_csv_text(const std::vector<TripFeatures>& trips) {
  std::string out;
  if (trips.empty()) return "trip_id,frame_time_s,label,speed_mph\n";
  const auto& names = trips.front().features.feature_names;
  out += "trip_id,frame_time_s,label,speed_mph";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (const auto& t : trips) {
    if (t.features.feature_names != names) throw DataError("trips carry different feature layouts");
    for (std::size_t i = 0; i < t.frames(); ++i) {
      out += t.trip_id;
      out += "," + format_g9(t.features.frame_times[i]);
      out += "," + std::to_string(t.labels[i]);
      out += "," + format_g9(t.speeds[i]);
      for (Eigen::Index d = 0; d < t.features.values.cols(); ++d)
        out += "," + format_g9(t.features.values(static_cast<Eigen::Index>(i), d));
      out += "\n";
    }
  }
  return out;
}

inline void write_feature_csv(const std::filesystem::path& path, const std::vector<TripFeatures>& trips) {
  write_file_atomic(path, feature_csv_text(trips));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("feature CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace detail

/// Inverse of feature_csv_text. Trips keep their first-appearance order;
/// route ids are unknown (-1) until joined with a manifest.
inline std::vector<TripFeatures> parse_feature_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("feature CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "trip_id" || header[1] != "frame_time_s" || header[2] != "label" ||
      header[3] != "speed_mph")
    throw DataError("feature CSV header must start with trip_id,frame_time_s,label,speed_mph");
  const std::vector<std::string> names(header.begin() + 4, header.end());
  const std::size_t dims = names.size();

  std::vector<TripFeatures> trips;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> rows;  // flattened per trip
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("feature CSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " columns, found " + std::to_string(cells.size()));
    auto [it, fresh] = index.try_emplace(cells[0], trips.size());
    if (fresh) {
      trips.emplace_back();
      trips.back().trip_id = cells[0];
      trips.back().features.feature_names = names;
      rows.emplace_back();
    }
    auto& trip = trips[it->second];
    trip.features.frame_times.push_back(detail::parse_double(cells[1], line_no));
    const double label = detail::parse_double(cells[2], line_no);
    if (label != 0.0 && label != 1.0) throw DataError("feature CSV line " + std::to_string(line_no) + ": label must be 0 or 1");
    trip.labels.push_back(static_cast<int>(label));
    trip.speeds.push_back(detail::parse_double(cells[3], line_no));
    for (std::size_t d = 0; d < dims; ++d) rows[it->second].push_back(detail::parse_double(cells[4 + d], line_no));
  }
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(trips[i].labels.size());
    trips[i].features.values =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            rows[i].data(), n, static_cast<Eigen::Index>(dims));
  }
  return trips;
}

inline std::vector<TripFeatures> read_feature_csv(const std::filesystem::path& path) {
  return parse_feature_csv(read_file(path));
}

/// Fills route ids from the manifest; every trip must be listed there.
inline void attach_routes(std::vector<TripFeatures>& trips, const std::vector<TripManifest>& manifest) {
  std::map<std::string, const TripManifest*> by_id;
  for (const auto& m : manifest) by_id[m.trip_id] = &m;
  for (auto& t : trips) {
    auto it = by_id.find(t.trip_id);
    if (it == by_id.end()) throw DataError("trip '" + t.trip_id + "' not found in manifest");
    t.route_id = it->second->route_id;
    for (int l : t.labels)
      if (l != static_cast<int>(it->second->condition))
        throw DataError("trip '" + t.trip_id + "': feature labels disagree with manifest condition");
  }
}

/// Keeps only the given columns, in the given order.
inline FeatureMatrix select_columns(const FeatureMatrix& fm, const std::vector<std::size_t>& cols) {
  FeatureMatrix out;
  out.frame_times = fm.frame_times;
  out.values.resize(fm.values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= fm.dims()) throw DataError("selected feature index " + std::to_string(cols[j]) + " out of range");
    out.values.col(static_cast<Eigen::Index>(j)) = fm.values.col(static_cast<Eigen::Index>(cols[j]));
    out.feature_names.push_back(fm.feature_names[cols[j]]);
  }
  return out;
}

}  // namespace roadwet
