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
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadwet/core.hpp"

namespace roadwet {

/// Mono signal, amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 0.0;

  double duration() const { return sample_rate > 0 ? samples.size() / sample_rate : 0.0; }
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Decodes a RIFF/WAVE byte buffer. Accepts mono PCM16 and mono float32
/// (plain or WAVE_FORMAT_EXTENSIBLE); everything else is rejected.
inline AudioClip decode_wav(std::span<const unsigned char> bytes, const std::string& name = "<buffer>") {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError(name + ": not a RIFF/WAVE file");

  std::optional<std::uint16_t> format, channels, bits;
  std::uint32_t rate = 0;
  std::span<const unsigned char> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t len = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw DataError(name + ": truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16) throw DataError(name + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      // WAVE_FORMAT_EXTENSIBLE: real format tag is the first two bytes of the subformat GUID.
      if (*format == 0xFFFE) {
        if (len < 40) throw DataError(name + ": short extensible fmt chunk");
        format = read_u16(f + 24);
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.subspan(body, len);
      have_data = true;
    }
    pos = body + len + (len & 1);
  }
  if (!format || !have_data) throw DataError(name + ": missing fmt or data chunk");
  if (*channels != 1)
    throw DataError(name + ": expected 1 channel, found " + std::to_string(*channels));
  if (rate == 0) throw DataError(name + ": sample rate is 0");

  AudioClip clip;
  clip.sample_rate = rate;
  if (*format == 1 && *bits == 16) {
    const std::size_t n = data.size() / 2;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(data.data() + 2 * i));
      clip.samples[i] = v / 32768.0;
    }
  } else if (*format == 3 && *bits == 32) {
    const std::size_t n = data.size() / 4;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t raw = read_u32(data.data() + 4 * i);
      float v;
      std::memcpy(&v, &raw, sizeof v);
      if (!(v >= -1.0f && v <= 1.0f))
        throw DataError(name + ": float sample out of [-1, 1] at index " + std::to_string(i));
      clip.samples[i] = v;
    }
  } else {
    throw DataError(name + ": unsupported encoding (format " + std::to_string(*format) + ", " +
                    std::to_string(*bits) + " bits); expected PCM16 or float32");
  }
  return clip;
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing audio file '" + path.string() + "'");
  const std::string raw = read_file(path);
  return decode_wav({reinterpret_cast<const unsigned char*>(raw.data()), raw.size()}, path.string());
}

/// Encodes as mono PCM16. Samples are rounded and clamped to the int16 range.
inline std::string encode_wav_pcm16(const AudioClip& clip) {
  using detail::put_u16;
  using detail::put_u32;
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate);
  const auto data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_len);
  for (double s : clip.samples) {
    const double v = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  write_file_atomic(path, encode_wav_pcm16(clip));
}

// ---------------------------------------------------------------------------
// Trip metadata

struct SpeedSample {
  double time_s = 0.0;
  double mph = 0.0;
  bool operator==(const SpeedSample&) const = default;
};

/// One recorded trip: a route driven once in a given surface condition.
struct TripManifest {
  std::string trip_id;
  int route_id = 0;
  Condition condition = Condition::Dry;
  std::string audio_path;
  std::vector<SpeedSample> speed_log;
  std::optional<double> avg_iri;  // in/mi, metadata only

  bool operator==(const TripManifest&) const = default;
};

inline void validate(const TripManifest& m) {
  for (std::size_t i = 0; i < m.speed_log.size(); ++i) {
    const auto& s = m.speed_log[i];
    if (!std::isfinite(s.time_s) || !std::isfinite(s.mph))
      throw DataError("trip '" + m.trip_id + "': non-finite speed log entry");
    if (s.mph < 0) throw DataError("trip '" + m.trip_id + "': negative speed in speed_log");
    if (i > 0 && !(s.time_s > m.speed_log[i - 1].time_s))
      throw DataError("trip '" + m.trip_id + "': speed_log times must be strictly increasing");
  }
}

inline TripManifest manifest_entry_from_json(const nlohmann::json& j) {
  try {
    TripManifest m;
    m.trip_id = j.at("trip_id").get<std::string>();
    m.route_id = j.at("route_id").get<int>();
    m.condition = condition_from_string(j.at("condition").get<std::string>());
    m.audio_path = j.at("audio_path").get<std::string>();
    if (j.contains("avg_iri") && !j.at("avg_iri").is_null()) m.avg_iri = j.at("avg_iri").get<double>();
    for (const auto& p : j.at("speed_log")) {
      if (!p.is_array() || p.size() != 2) throw DataError("speed_log entries must be [time_s, mph] pairs");
      m.speed_log.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    validate(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest entry: ") + e.what());
  }
}

inline nlohmann::json to_json(const TripManifest& m) {
  nlohmann::json j;
  j["trip_id"] = m.trip_id;
  j["route_id"] = m.route_id;
  j["condition"] = std::string(to_string(m.condition));
  j["audio_path"] = m.audio_path;
  if (m.avg_iri) j["avg_iri"] = *m.avg_iri;
  auto log = nlohmann::json::array();
  for (const auto& s : m.speed_log) log.push_back({s.time_s, s.mph});
  j["speed_log"] = std::move(log);
  return j;
}

inline std::vector<TripManifest> parse_manifest_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed manifest JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("manifest must be a JSON list of trips");
  std::vector<TripManifest> trips;
  trips.reserve(doc.size());
  for (const auto& entry : doc) trips.push_back(manifest_entry_from_json(entry));
  return trips;
}

inline std::vector<TripManifest> parse_manifest(const std::filesystem::path& path) {
  return parse_manifest_text(read_file(path));
}

inline std::string manifest_to_text(const std::vector<TripManifest>& trips) {
  auto doc = nlohmann::json::array();
  for (const auto& t : trips) doc.push_back(to_json(t));
  return doc.dump(2) + "\n";
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<TripManifest>& trips) {
  write_file_atomic(path, manifest_to_text(trips));
}

/// Audio paths in a manifest are relative to the manifest's directory.
inline std::filesystem::path resolve_audio_path(const std::filesystem::path& manifest_path, const TripManifest& m) {
  std::filesystem::path p(m.audio_path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

/// Linear interpolation of the speed log, held constant outside its range.
inline double speed_at(const TripManifest& m, double t) {
  const auto& log = m.speed_log;
  if (log.empty()) throw DataError("trip '" + m.trip_id + "': empty speed_log");
  if (t <= log.front().time_s) return log.front().mph;
  if (t >= log.back().time_s) return log.back().mph;
  auto hi = std::upper_bound(log.begin(), log.end(), t, [](double v, const SpeedSample& s) { return v < s.time_s; });
  auto lo = hi - 1;
  const double w = (t - lo->time_s) / (hi->time_s - lo->time_s);
  return lo->mph + w * (hi->mph - lo->mph);
}

/// Frame-level labels and speeds for one trip.
struct LabeledSequence {
  std::string trip_id;
  std::vector<double> frame_times;
  std::vector<int> labels;
  std::vector<double> speeds;
};

inline LabeledSequence label_frames(const TripManifest& m, std::span<const double> frame_times) {
  if (!std::is_sorted(frame_times.begin(), frame_times.end()))
    throw DataError("trip '" + m.trip_id + "': frame_times must be sorted ascending");
  LabeledSequence seq;
  seq.trip_id = m.trip_id;
  seq.frame_times.assign(frame_times.begin(), frame_times.end());
  seq.labels.assign(frame_times.size(), static_cast<int>(m.condition));
  seq.speeds.reserve(frame_times.size());
  for (double t : frame_times) seq.speeds.push_back(speed_at(m, t));
  return seq;
}

}  // namespace roadwet
