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


// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "roadwet/roadwet.hpp"

namespace fs = std::filesystem;
using namespace roadwet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path workdir() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / ("roadwet_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

// --- gradients ---------------------------------------------------------------

oracle::GradCheck check_configuration(std::vector<std::size_t> layout, bool bidi, std::uint64_t seed) {
  Rng rng(seed);
  rnn::NetworkSpec spec;
  spec.input_dim = 12;
  spec.hidden_layout = std::move(layout);
  spec.bidirectional = bidi;
  auto m = rnn::init_model(spec);
  m.params.for_each_tensor([&](double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = rng.uniform(-0.5, 0.5);
  });
  oracle::GradCheck total;
  for (int s = 0; s < 20; ++s) {
    Eigen::MatrixXd x(12, 10), d = Eigen::MatrixXd::Zero(2, 10);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index t = 0; t < 10; ++t) d(static_cast<Eigen::Index>(rng.below(2)), t) = 1.0;
    const auto g = oracle::check_gradients(m, x, d);
    total.max_rel_error = std::max(total.max_rel_error, g.max_rel_error);
    total.params += g.params;
  }
  return total;
}

void gradient_fidelity() {
  const auto t0 = Clock::now();
  std::vector<std::future<oracle::GradCheck>> jobs;
  std::uint64_t seed = 2024;
  for (const std::vector<std::size_t>& layout : {std::vector<std::size_t>{12, 12, 12}, {12, 17, 12}})
    for (bool bidi : {false, true}) jobs.push_back(std::async(std::launch::async, check_configuration, layout, bidi, seed++));
  double worst = 0.0;
  std::size_t checked = 0;
  for (auto& j : jobs) {
    const auto g = j.get();
    worst = std::max(worst, g.max_rel_error);
    checked += g.params;
  }
  const double secs = seconds_since(t0);
  report("gradient_fidelity", worst <= 1e-4 && secs < 60.0,
         fmt("max rel error %.3g", worst) + fmt(" over %.0f parameter checks", static_cast<double>(checked)) +
             fmt(", %.1f s", secs));
}

// --- DSP ---------------------------------------------------------------------

void dsp_oracle() {
  Rng rng(77);
  double worst = 0.0;
  bool shapes = true;
  for (int c = 0; c < 20; ++c) {
    const double rate = c % 2 == 0 ? 16000.0 : 8000.0 + static_cast<double>(rng.below(16001));
    AudioClip clip{std::vector<double>(static_cast<std::size_t>(rate)), rate};
    const double amp = std::pow(10.0, rng.uniform(-3.0, 0.0));
    for (auto& v : clip.samples) v = amp * rng.uniform(-1, 1);
    const auto got = asf_features(clip);
    const auto ref = oracle::asf(clip.samples, rate);
    if (ref.size() != got.frames()) {
      shapes = false;
      continue;
    }
    for (std::size_t t = 0; t < ref.size(); ++t)
      for (std::size_t d = 0; d < 54; ++d) {
        const double a = got.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)), b = ref[t][d];
        worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-3));
      }
  }
  int count_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double rate = 4000 + static_cast<double>(rng.below(44100));
    const auto n = static_cast<std::size_t>(rng.below(20000));
    const long L = std::lround(0.030 * rate), H = std::lround(0.010 * rate);
    const long want = static_cast<long>(n) >= L ? (static_cast<long>(n) - L) / H + 1 : 0;
    const auto f = frame_signal(AudioClip{std::vector<double>(n, 0.0), rate}, {});
    if (static_cast<long>(f.windows.size()) != want) ++count_mismatch;
  }
  report("dsp_oracle", shapes && worst <= 1e-6 && count_mismatch == 0,
         fmt("max rel error %.3g on 20 clips", worst) + fmt(", %.0f/1000 frame-count mismatches", count_mismatch));
}

void feature_invariants() {
  Rng rng(5);
  std::vector<AudioClip> clips;
  clips.push_back({std::vector<double>(16000, 0.0), 16000});
  clips.push_back({std::vector<double>(16000, 1.0), 16000});
  clips.push_back({std::vector<double>(480, -1.0), 16000});
  for (int k = 0; k < 30; ++k) {
    const double rate = 8000 + static_cast<double>(rng.below(40001));
    AudioClip c{std::vector<double>(480 + rng.below(30000)), rate};
    const double f0 = rng.uniform(20, rate / 2), amp = rng.uniform(0, 1);
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      const double v = k % 3 == 0 ? std::sin(2 * M_PI * f0 * static_cast<double>(i) / rate) : rng.uniform(-1, 1);
      c.samples[i] = std::clamp(amp * v * (k % 5 == 0 ? 4.0 : 1.0), -1.0, 1.0);
    }
    clips.push_back(std::move(c));
  }
  bool ok = true;
  std::size_t frames = 0;
  for (const auto& c : clips) {
    const auto f = asf_features(c);
    ok = ok && f.dims() == 54 && f.feature_names.size() == 54 && f.values.allFinite() && f.values.minCoeff() >= 0.0;
    frames += f.frames();
  }
  report("feature_count_and_signs", ok, fmt("%.0f clips", static_cast<double>(clips.size())) +
                                            fmt(", %.0f frames, 54 dims, all values >= 0", static_cast<double>(frames)));
}

// --- feature selection -------------------------------------------------------

std::vector<int> bits(unsigned mask, int n) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<int>(mask >> i & 1u));
  return out;
}

double oracle_feature_ig(const std::vector<int>& x, const std::vector<int>& y) {
  return oracle::mdl_accepts_binary(x, y) ? static_cast<double>(oracle::binary_ig(x, y)) : 0.0;
}

void selection_oracles() {
  std::size_t datasets = 0, bad = 0;
  // Single binary features: every (x, y) pair up to 8 samples.
  for (int n = 1; n <= 8; ++n)
    for (unsigned ym = 0; ym < (1u << n); ++ym) {
      const auto y = bits(ym, n);
      if (std::abs(select::entropy(y) - static_cast<double>(oracle::entropy_bits(y))) > 1e-12) ++bad;
      for (unsigned xm = 0; xm < (1u << n); ++xm) {
        const auto x = bits(xm, n);
        Eigen::MatrixXd m(n, 1);
        for (int i = 0; i < n; ++i) m(i, 0) = x[static_cast<std::size_t>(i)];
        const auto r = select::rank_by_ig(m, y);
        if (std::abs(r.entries.at(0).ig - oracle_feature_ig(x, y)) > 1e-12) ++bad;
        ++datasets;
      }
    }
  // Three binary features: every dataset up to 4 samples, ranking included.
  for (int n = 1; n <= 4; ++n) {
    const unsigned span = 1u << n;
    for (unsigned ym = 0; ym < span; ++ym)
      for (unsigned a = 0; a < span; ++a)
        for (unsigned b = 0; b < span; ++b)
          for (unsigned c = 0; c < span; ++c) {
            const auto y = bits(ym, n);
            const std::vector<std::vector<int>> cols{bits(a, n), bits(b, n), bits(c, n)};
            Eigen::MatrixXd m(n, 3);
            std::vector<double> want;
            for (int j = 0; j < 3; ++j) {
              for (int i = 0; i < n; ++i) m(i, j) = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
              want.push_back(oracle_feature_ig(cols[static_cast<std::size_t>(j)], y));
            }
            const auto r = select::rank_by_ig(m, y);
            bool good = r.entries.size() == 3;
            for (std::size_t k = 0; good && k < 3; ++k) {
              good = std::abs(r.entries[k].ig - want[r.entries[k].feature]) <= 1e-12;
              if (k > 0) good = good && r.entries[k - 1].ig >= r.entries[k].ig - 1e-12;
            }
            if (!good) ++bad;
            ++datasets;
          }
  }
  // Planted single informative feature among ten.
  int planted_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const int informative = static_cast<int>(rng.below(10));
    Eigen::MatrixXd x(200, 10);
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
      y.push_back(static_cast<int>(rng.below(2)));
      for (int j = 0; j < 10; ++j) x(i, j) = j == informative ? y.back() + 0.1 * rng.uniform() : rng.normal();
    }
    const auto problem = select::CfsProblem::build(x, y);
    const auto got = select::best_first_cfs(problem);
    const auto want = oracle::exhaustive_cfs(problem);
    if (got.indices == want.indices && got.indices == std::vector<std::size_t>{static_cast<std::size_t>(informative)})
      ++planted_ok;
  }
  report("selection_oracles", bad == 0 && planted_ok == 100,
         fmt("%.0f exhaustive datasets", static_cast<double>(datasets)) + fmt(", %.0f mismatches", static_cast<double>(bad)) +
             fmt(", CFS planted %.0f/100", planted_ok));
}

// --- SMO ---------------------------------------------------------------------

void smo_correctness() {
  double kkt = 0.0, eq = 0.0, box = 0.0;
  std::size_t errors = 0, unconverged = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto [x, y] = oracle::separable_2d(1000 + seed, 4 + static_cast<int>(seed % 27));
    const auto m = svm::smo_train(x, y, 1e3);
    const auto a = oracle::audit_svm(m, x, y);
    kkt = std::max(kkt, a.max_violation);
    eq = std::max(eq, a.equality_residual);
    box = std::max(box, a.box_violation);
    errors += a.train_errors;
    if (!m.converged) ++unconverged;
  }
  report("smo_correctness", kkt <= 1e-3 && eq <= 1e-8 && box <= 1e-8 && errors == 0 && unconverged == 0,
         fmt("50 instances, max KKT violation %.3g", kkt) + fmt(", sum(alpha y) residual %.3g", eq) +
             fmt(", box %.3g", box) + fmt(", training errors %.0f", static_cast<double>(errors)));
}

// --- end to end --------------------------------------------------------------

struct Extracted {
  std::vector<TripFeatures> asf, octave;
};

Extracted synth_and_extract(const synth::SynthSpec& spec, const fs::path& dir) {
  const auto corpus = synth::generate_corpus(spec, dir);
  Extracted e;
  for (const auto& m : corpus.trips) {
    const auto clip = load_wav(resolve_audio_path(corpus.manifest_path, m));
    e.asf.push_back(extract_trip(m, clip, FeatureSet::Asf));
    e.octave.push_back(extract_trip(m, clip, FeatureSet::Octave));
  }
  return e;
}

// Reduced-size BLSTM: the 54-54-54 default at lr 1e-5 does not fit the time
// budget on one core.
TrainOptions blstm_options() {
  TrainOptions o;
  o.arch = Arch::Blstm;
  o.rnn.hidden_layout = {16};
  o.rnn.learning_rate = 1e-3;
  o.rnn.max_epochs = 15;
  o.rnn.patience = 3;
  o.rnn.subsequence_len = 100;
  return o;
}

// Records, for every prediction, the routes its model was trained on.
struct Spy {
  std::mutex mu;
  std::size_t trainings = 0, predictions = 0, leaks = 0;

  eval::Trainer wrap(eval::Trainer inner) {
    return [this, inner](const std::vector<const TripFeatures*>& train) {
      std::set<int> routes;
      for (const auto* t : train) routes.insert(t->route_id);
      {
        std::lock_guard lock(mu);
        ++trainings;
      }
      auto predictor = inner(train);
      return eval::Predictor([this, routes, predictor](const TripFeatures& t) {
        std::lock_guard lock(mu);
        ++predictions;
        if (routes.count(t.route_id)) ++leaks;
        return predictor(t);
      });
    };
  }
};

void end_to_end(Spy& spy) {
  const auto t0 = Clock::now();
  const synth::SynthSpec spec;  // 3 routes, 60 s trips, 16 kHz
  const auto data = synth_and_extract(spec, workdir() / "corpus");
  const auto blstm = eval::cross_route_eval(data.asf, spy.wrap(make_trainer(blstm_options())));
  TrainOptions svm_opt;
  svm_opt.arch = Arch::Svm;
  const auto svm = eval::cross_route_eval(data.octave, spy.wrap(make_trainer(svm_opt)));
  const double secs = seconds_since(t0);
  std::string per;
  for (const auto& e : blstm.experiments) per += fmt(" %.3f", e.uar);
  report("end_to_end_ordering",
         blstm.mean_uar >= 0.95 && blstm.mean_uar - svm.mean_uar >= 0.05 && secs < 900.0,
         fmt("BLSTM-ASF mean UAR %.4f", blstm.mean_uar) + " (" + per.substr(1) + ")" +
             fmt(", SVM-octave %.4f", svm.mean_uar) + fmt(", gap %.4f", blstm.mean_uar - svm.mean_uar) +
             fmt(", %.0f s", secs));
}

void speed_stratified() {
  synth::SynthSpec spec;
  spec.stationary_cue = 0.3;
  const auto data = synth_and_extract(spec, workdir() / "weak_stationary");
  const auto r = eval::cross_route_eval(data.asf, make_trainer(blstm_options()));
  bool ok = r.experiments.size() == 6;
  std::string detail;
  for (const auto& e : r.experiments) {
    const auto& s = e.stratified;
    const bool both = s.uar_at_or_above.has_value() && s.uar_below.has_value();
    ok = ok && both && *s.uar_at_or_above >= *s.uar_below;
    detail += both ? fmt(" %.3f", *s.uar_at_or_above) + fmt("/%.3f", *s.uar_below) : std::string(" missing");
  }
  report("speed_stratified", ok, "at-or-above/below 2.9 mph:" + detail);
}

// --- CLI determinism ---------------------------------------------------------

int sh(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void cli_determinism() {
  const std::string cli = ROADWET_CLI;
  const auto root = workdir() / "cli";
  fs::create_directories(root);
  write_file_atomic(root / "spec.json", R"({"trip_seconds": 10.0, "dwell_seconds": 2.0, "seed": 11})");
  const std::vector<std::string> artifacts{"corpus/manifest.json", "corpus/audio/wet1.wav", "corpus/audio/dry3.wav",
                                           "asf.csv",  "oct.csv", "ig.json", "model.json", "rnn_report.json",
                                           "svm_report.json", "pred.csv"};
  std::vector<std::string> first;
  bool ran = true;
  for (int k = 0; k < 2; ++k) {
    const auto d = root / std::to_string(k);
    fs::create_directories(d);
    const auto p = [&](const std::string& f) { return "'" + (d / f).string() + "'"; };
    const std::string net = " --arch blstm --layout 8 --epochs 3 --patience 1 --lr 1e-3 --seed 9";
    int rc = 0;
    rc |= sh(cli + " synth --spec '" + (root / "spec.json").string() + "' --out " + p("corpus"));
    rc |= sh(cli + " extract --manifest " + p("corpus/manifest.json") + " --out " + p("asf.csv"));
    rc |= sh(cli + " extract --manifest " + p("corpus/manifest.json") + " --set octave --out " + p("oct.csv"));
    rc |= sh(cli + " select --features " + p("asf.csv") + " --out " + p("ig.json"));
    rc |= sh(cli + " train --features " + p("asf.csv") + " --selection " + p("ig.json") + net + " --out " + p("model.json"));
    rc |= sh(cli + " eval --manifest " + p("corpus/manifest.json") + " --features " + p("asf.csv") + net + " --out " +
             p("rnn_report.json"));
    rc |= sh(cli + " eval --manifest " + p("corpus/manifest.json") + " --features " + p("oct.csv") +
             " --arch svm --out " + p("svm_report.json"));
    rc |= sh(cli + " predict --model " + p("model.json") + " --features " + p("asf.csv") + " --out " + p("pred.csv"));
    ran = ran && rc == 0;
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
      const auto path = d / artifacts[i];
      const auto bytes = fs::exists(path) ? read_file(path) : std::string();
      if (k == 0) first.push_back(bytes);
      else if (bytes.empty() || bytes != first[i]) ran = false;
    }
  }
  report("cli_determinism", ran,
         fmt("%.0f artifacts byte-identical across two seeded runs", static_cast<double>(artifacts.size())));
}

void protocol_integrity(const Spy& spy) {
  report("protocol_integrity", spy.trainings == 12 && spy.predictions == 24 && spy.leaks == 0,
         fmt("%.0f trainings", static_cast<double>(spy.trainings)) +
             fmt(", %.0f test-trip predictions", static_cast<double>(spy.predictions)) +
             fmt(", %.0f on a training route", static_cast<double>(spy.leaks)));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<const char*, std::function<void()>>> steps{
      {"gradient_fidelity", gradient_fidelity}, {"dsp_oracle", dsp_oracle},
      {"feature_count_and_signs", feature_invariants}, {"selection_oracles", selection_oracles},
      {"smo_correctness", smo_correctness}};
  for (const auto& [name, step] : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      report(name, false, std::string("exception: ") + e.what());
    }
  }
  Spy spy;
  try {
    end_to_end(spy);
  } catch (const std::exception& e) {
    report("end_to_end_ordering", false, std::string("exception: ") + e.what());
  }
  try {
    speed_stratified();
  } catch (const std::exception& e) {
    report("speed_stratified", false, std::string("exception: ") + e.what());
  }
  try {
    cli_determinism();
  } catch (const std::exception& e) {
    report("cli_determinism", false, std::string("exception: ") + e.what());
  }
  protocol_integrity(spy);
  fs::remove_all(workdir());
  std::printf("%d criteria failed, %.0f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
