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
#include <complex>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadwet/core.hpp"
#include "roadwet/dsp.hpp"
#include "roadwet/ingest.hpp"

namespace roadwet::synth {

/// Acoustic signature of one surface condition.
struct SurfaceProfile {
  double tilt_db_per_octave = 0.0;  // tire-noise slope around 1 kHz
  double level = 0.1;               // tire-noise RMS at max speed
  double am_depth = 0.2;            // amplitude-modulation depth
  double am_hz_per_mph = 0.3;       // modulation rate grows with speed
  double hiss_level = 0.0;          // RMS of the high-frequency band at max speed
  double hiss_lo_hz = 2200.0;
  double hiss_hi_hz = 4000.0;
};

struct SynthSpec {
  std::uint64_t seed = 7;
  int routes = 3;
  double trip_seconds = 60.0;
  double sample_rate = 16000.0;
  SurfaceProfile wet{0.5, 0.11, 0.2, 0.3, 0.10, 2200.0, 4000.0};
  SurfaceProfile dry{0.0, 0.09, 0.2, 0.3, 0.0, 2200.0, 4000.0};
  double route_tilt_spread_db = 0.5;  // per-route road-texture slope offset (uniform +/-)
  double route_level_spread_db = 3.0;
  double min_mph = 8.0;
  double max_mph = 35.0;
  double dwell_seconds = 4.0;       // stationary at trip start; half of it again mid-trip
  double ambient_level = 0.004;     // condition-independent background RMS
  double passing_rate_hz = 0.6;     // passing-vehicle bursts per second
  double passing_level = 0.04;      // burst RMS at peak
  double stationary_cue = 1.0;      // scales the wet hiss carried by bursts
};

inline nlohmann::json to_json(const SurfaceProfile& p) {
  return {{"tilt_db_per_octave", p.tilt_db_per_octave}, {"level", p.level},         {"am_depth", p.am_depth},
          {"am_hz_per_mph", p.am_hz_per_mph},           {"hiss_level", p.hiss_level}, {"hiss_lo_hz", p.hiss_lo_hz},
          {"hiss_hi_hz", p.hiss_hi_hz}};
}

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"seed", s.seed},
          {"routes", s.routes},
          {"trip_seconds", s.trip_seconds},
          {"sample_rate", s.sample_rate},
          {"wet", to_json(s.wet)},
          {"dry", to_json(s.dry)},
          {"route_tilt_spread_db", s.route_tilt_spread_db},
          {"route_level_spread_db", s.route_level_spread_db},
          {"min_mph", s.min_mph},
          {"max_mph", s.max_mph},
          {"dwell_seconds", s.dwell_seconds},
          {"ambient_level", s.ambient_level},
          {"passing_rate_hz", s.passing_rate_hz},
          {"passing_level", s.passing_level},
          {"stationary_cue", s.stationary_cue}};
}

namespace detail {

// Overwrites `field` from `j[key]` if present; the key is then consumed.
template <typename T>
void take(nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) {
    field = j.at(key).get<T>();
    j.erase(key);
  }
}

inline void reject_leftovers(const nlohmann::json& j, const std::string& where) {
  if (!j.empty()) throw DataError("unknown key '" + j.begin().key() + "' in " + where);
}

inline SurfaceProfile profile_from_json(nlohmann::json j, SurfaceProfile p, const std::string& where) {
  take(j, "tilt_db_per_octave", p.tilt_db_per_octave);
  take(j, "level", p.level);
  take(j, "am_depth", p.am_depth);
  take(j, "am_hz_per_mph", p.am_hz_per_mph);
  take(j, "hiss_level", p.hiss_level);
  take(j, "hiss_lo_hz", p.hiss_lo_hz);
  take(j, "hiss_hi_hz", p.hiss_hi_hz);
  reject_leftovers(j, where);
  return p;
}

}  // namespace detail

/// Reads a spec; absent keys keep their defaults, unknown keys are rejected.
inline SynthSpec spec_from_json(nlohmann::json j) {
  try {
    SynthSpec s;
    detail::take(j, "seed", s.seed);
    detail::take(j, "routes", s.routes);
    detail::take(j, "trip_seconds", s.trip_seconds);
    detail::take(j, "sample_rate", s.sample_rate);
    if (j.contains("wet")) s.wet = detail::profile_from_json(j.at("wet"), s.wet, "wet profile"), j.erase("wet");
    if (j.contains("dry")) s.dry = detail::profile_from_json(j.at("dry"), s.dry, "dry profile"), j.erase("dry");
    detail::take(j, "route_tilt_spread_db", s.route_tilt_spread_db);
    detail::take(j, "route_level_spread_db", s.route_level_spread_db);
    detail::take(j, "min_mph", s.min_mph);
    detail::take(j, "max_mph", s.max_mph);
    detail::take(j, "dwell_seconds", s.dwell_seconds);
    detail::take(j, "ambient_level", s.ambient_level);
    detail::take(j, "passing_rate_hz", s.passing_rate_hz);
    detail::take(j, "passing_level", s.passing_level);
    detail::take(j, "stationary_cue", s.stationary_cue);
    detail::reject_leftovers(j, "synth spec");
    if (s.routes < 1 || !(s.trip_seconds > 0) || !(s.sample_rate > 0) || !(s.max_mph > 0) || s.min_mph < 0 ||
        s.min_mph > s.max_mph)
      throw DataError("synth spec has out-of-range values");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
}

/// Piecewise-linear speed trajectory of a route: a stationary start, cruise
/// segments with ramps, and one full stop near mid-trip.
inline std::vector<SpeedSample> route_trajectory(const SynthSpec& spec, int route) {
  Rng rng(Rng::derive(spec.seed, 1000 + static_cast<std::uint64_t>(route)));
  std::vector<SpeedSample> knots{{0.0, 0.0}};
  double t = spec.dwell_seconds, v = 0.0;
  bool stopped_mid = false;
  const auto push = [&](double time, double mph) {
    if (time > knots.back().time_s + 1e-9) knots.push_back({time, mph});
  };
  push(t, 0.0);
  while (t < spec.trip_seconds) {
    double target = rng.uniform(spec.min_mph, spec.max_mph);
    double hold = rng.uniform(4.0, 10.0);
    if (!stopped_mid && t > 0.45 * spec.trip_seconds) {
      target = 0.0;
      hold = 0.5 * spec.dwell_seconds;
      stopped_mid = true;
    }
    const double accel = rng.uniform(2.0, 4.0);  // mph per second
    t += std::max(std::abs(target - v) / accel, 0.1);
    v = target;
    push(t, v);
    t += hold;
    push(t, v);
  }
  // Trim to the trip duration, interpolating the final knot.
  std::vector<SpeedSample> out;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (knots[i].time_s < spec.trip_seconds) {
      out.push_back(knots[i]);
      continue;
    }
    const auto& a = knots[i - 1];
    const auto& b = knots[i];
    const double w = (spec.trip_seconds - a.time_s) / (b.time_s - a.time_s);
    out.push_back({spec.trip_seconds, a.mph + w * (b.mph - a.mph)});
    break;
  }
  return out;
}

/// Unit-RMS Gaussian noise with magnitude response `shape(f)`, shaped in one
/// whole-signal FFT.
inline std::vector<double> colored_noise(std::size_t n, double sample_rate, Rng& rng,
                                         const std::function<double(double)>& shape) {
  const std::size_t fft = next_power_of_two(std::max<std::size_t>(n, 2));
  std::vector<std::complex<double>> buf(fft);
  for (auto& x : buf) x = rng.normal();
  fft_inplace(buf);
  for (std::size_t k = 0; k <= fft / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft);
    const double g = shape(f);
    buf[k] *= g;
    if (k > 0 && k < fft / 2) buf[fft - k] *= g;
  }
  fft_inplace(buf, true);
  std::vector<double> out(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = buf[i].real();
    ss += out[i] * out[i];
  }
  const double rms = std::sqrt(ss / static_cast<double>(n));
  if (rms > 0)
    for (auto& x : out) x /= rms;
  return out;
}

inline std::function<double(double)> tilt_shape(double db_per_octave) {
  return [db_per_octave](double f) {
    if (f < 50.0 || f > 7500.0) return 0.0;
    return std::pow(10.0, db_per_octave * std::log2(f / 1000.0) / 20.0);
  };
}

inline std::function<double(double)> band_shape(double lo, double hi) {
  return [lo, hi](double f) { return f >= lo && f <= hi ? 1.0 : 0.0; };
}

/// Per-route properties shared by the route's wet and dry trips.
struct RouteTraits {
  double tilt_offset_db = 0.0;
  double level_gain = 1.0;
  std::vector<SpeedSample> trajectory;
  std::vector<double> passing_times;  // centers of passing-vehicle bursts, seconds
};

inline RouteTraits route_traits(const SynthSpec& spec, int route) {
  Rng rng(Rng::derive(spec.seed, 2000 + static_cast<std::uint64_t>(route)));
  RouteTraits r;
  r.tilt_offset_db = rng.uniform(-spec.route_tilt_spread_db, spec.route_tilt_spread_db);
  r.level_gain = std::pow(10.0, rng.uniform(-spec.route_level_spread_db, spec.route_level_spread_db) / 20.0);
  r.trajectory = route_trajectory(spec, route);
  for (double t = 0.0;;) {
    t += -std::log(std::max(rng.uniform(), 1e-12)) / std::max(spec.passing_rate_hz, 1e-9);
    if (t >= spec.trip_seconds) break;
    r.passing_times.push_back(t);
  }
  return r;
}

/// Audio of one trip. Tire noise and hiss scale with speed; passing-vehicle
/// bursts and a faint ambient bed are present at every speed.
inline AudioClip synthesize_trip(const SynthSpec& spec, const RouteTraits& route, Condition cond, std::uint64_t seed) {
  const SurfaceProfile& prof = cond == Condition::Wet ? spec.wet : spec.dry;
  const auto n = static_cast<std::size_t>(std::llround(spec.trip_seconds * spec.sample_rate));
  Rng rng(seed);
  const double tilt = prof.tilt_db_per_octave + route.tilt_offset_db;
  const auto tire = colored_noise(n, spec.sample_rate, rng, tilt_shape(tilt));
  const auto hiss = colored_noise(n, spec.sample_rate, rng, band_shape(prof.hiss_lo_hz, prof.hiss_hi_hz));
  const auto ambient = colored_noise(n, spec.sample_rate, rng, tilt_shape(-3.0));
  const auto passing = colored_noise(n, spec.sample_rate, rng, tilt_shape(tilt));

  // Passing vehicles: Gaussian envelopes around the route's burst times.
  const std::vector<double>& burst_times = route.passing_times;
  const double burst_sigma = 0.5;

  TripManifest log_holder;
  log_holder.speed_log = route.trajectory;
  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(n);
  double phase = 0.0;
  std::size_t next_burst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    const double mph = speed_at(log_holder, t);
    const double g = mph / spec.max_mph;
    phase += 2.0 * M_PI * prof.am_hz_per_mph * mph / spec.sample_rate;
    const double am = 1.0 + prof.am_depth * std::sin(phase);

    while (next_burst < burst_times.size() && burst_times[next_burst] < t - 4 * burst_sigma) ++next_burst;
    double burst = 0.0;
    for (std::size_t b = next_burst; b < burst_times.size() && burst_times[b] < t + 4 * burst_sigma; ++b) {
      const double d = (t - burst_times[b]) / burst_sigma;
      burst += std::exp(-0.5 * d * d);
    }

    double s = route.level_gain * (prof.level * g * am * tire[i] + prof.hiss_level * g * hiss[i]);
    s += spec.ambient_level * ambient[i];
    s += burst * spec.passing_level * (passing[i] + spec.stationary_cue * (prof.hiss_level / std::max(prof.level, 1e-9)) * hiss[i]);
    clip.samples[i] = std::clamp(s, -1.0, 1.0);
  }
  return clip;
}

struct Corpus {
  std::filesystem::path manifest_path;
  std::vector<TripManifest> trips;
};

/// Writes routes x {wet, dry} WAV files under out_dir/audio and a manifest
/// at out_dir/manifest.json. Output bytes depend only on the spec.
inline Corpus generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "audio", ec);
  if (ec) throw DataError("cannot create '" + (out_dir / "audio").string() + "': " + ec.message());

  Corpus corpus;
  corpus.manifest_path = out_dir / "manifest.json";
  for (int route = 1; route <= spec.routes; ++route) {
    const RouteTraits traits = route_traits(spec, route);
    for (Condition cond : {Condition::Wet, Condition::Dry}) {
      TripManifest m;
      m.trip_id = std::string(to_string(cond)) + std::to_string(route);
      m.route_id = route;
      m.condition = cond;
      m.audio_path = "audio/" + m.trip_id + ".wav";
      m.speed_log = traits.trajectory;
      const std::uint64_t trip_seed =
          Rng::derive(spec.seed, 10 * static_cast<std::uint64_t>(route) + (cond == Condition::Wet ? 1 : 2));
      write_wav(out_dir / m.audio_path, synthesize_trip(spec, traits, cond, trip_seed));
      corpus.trips.push_back(std::move(m));
    }
  }
  write_manifest(corpus.manifest_path, corpus.trips);
  return corpus;
}

}  // namespace roadwet::synth
