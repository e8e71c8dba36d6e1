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


// roadwet command-line tool: synth, extract, select, train, eval, predict, pca.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "roadwet/roadwet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

[[noreturn]] void fail(const char* kind, int code, std::string msg) {
  for (char& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "roadwet: error kind=" << kind << " exit=" << code << " message=" << json(msg).dump() << "\n";
  std::exit(code);
}

std::string key_of(const CLI::Option* o) {
  std::string name = o->get_single_name();
  return name;
}

// Every option of a subcommand except help and --config, by config key.
std::map<std::string, CLI::Option*> config_options(CLI::App* sub) {
  std::map<std::string, CLI::Option*> out;
  for (auto* o : sub->get_options()) {
    const auto key = key_of(o);
    if (key == "help" || key == "config") continue;
    out[key] = o;
  }
  return out;
}

/// The fully resolved option values of a subcommand, as strings.
json resolved_config(CLI::App* sub) {
  json j = json::object();
  for (const auto& [key, o] : config_options(sub)) {
    if (o->count() > 0) j[key] = o->results().back();
    else j[key] = o->get_default_str();
  }
  return j;
}

void write_config(const fs::path& path, CLI::App* sub) {
  roadwet::write_file_atomic(path, resolved_config(sub).dump(2) + "\n");
}

// Splices --config file values in front of the command-line flags so that
// flags (parsed later, last value wins) override the file.
std::vector<std::string> expand_config(CLI::App& app, std::vector<std::string> args) {
  if (args.size() < 2) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[1]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string config_path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(roadwet::read_file(config_path));
  } catch (const json::exception& e) {
    fail("usage", kUsage, "config '" + config_path + "': " + e.what());
  } catch (const roadwet::DataError& e) {
    fail("usage", kUsage, e.what());
  }
  if (!cfg.is_object()) fail("usage", kUsage, "config '" + config_path + "' must hold a JSON object");
  const auto known = config_options(sub);
  std::vector<std::string> spliced(args.begin(), args.begin() + 2);
  for (const auto& [raw_key, value] : cfg.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');  // val_route and val-route both name --val-route
    if (!known.count(key)) fail("usage", kUsage, "unknown config key '" + raw_key + "' for '" + args[1] + "'");
    if (value.is_null()) continue;
    std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (text.empty()) continue;
    spliced.push_back("--" + key);
    spliced.push_back(text);
  }
  spliced.insert(spliced.end(), args.begin() + 2, args.end());
  return spliced;
}

struct Settings {
  // synth
  std::string spec_path, seed_override;
  // shared paths
  std::string manifest, features, out, model, selection, timeline;
  // extract
  std::string set = "asf";
  // select
  std::string method = "ig", discretization = "mdl";
  std::size_t top_k = 20, max_stale = 5;
  // train / eval
  std::string arch = "blstm", layout = "54-54-54", kernel = "linear", protocol = "cross-route", val_route;
  double lr = 1e-5, C = 1e-3, gamma = 1.0, svm_tol = 1e-3, threshold = 2.9;
  std::uint64_t seed = 1;
  std::size_t epochs = 100, patience = 10, subseq = 100, threads = 1, components = 2;
  std::string peepholes = "true", standardize = "true";
};

bool parse_bool(const std::string& s, const char* what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw roadwet::DataError(std::string(what) + " must be true or false");
}

roadwet::TrainOptions train_options(const Settings& s) {
  roadwet::TrainOptions o;
  o.arch = roadwet::arch_from_string(s.arch);
  o.rnn.hidden_layout = roadwet::rnn::parse_layout(s.layout);
  o.rnn.learning_rate = s.lr;
  o.rnn.seed = s.seed;
  o.rnn.max_epochs = s.epochs;
  o.rnn.patience = s.patience;
  o.rnn.subsequence_len = s.subseq;
  o.rnn.peepholes = parse_bool(s.peepholes, "--peepholes");
  o.rnn.standardize_inputs = parse_bool(s.standardize, "--standardize");
  o.rnn.input_dim = 1;
  o.rnn.validate();
  o.C = s.C;
  if (s.kernel == "linear") o.kernel = {roadwet::svm::KernelType::Linear, s.gamma};
  else if (s.kernel == "rbf") o.kernel = {roadwet::svm::KernelType::Rbf, s.gamma};
  else throw roadwet::DataError("unknown kernel '" + s.kernel + "' (expected linear|rbf)");
  o.svm_tol = s.svm_tol;
  if (!s.selection.empty()) o.columns = roadwet::select::selected_from_report(json::parse(roadwet::read_file(s.selection)));
  return o;
}

std::vector<roadwet::TripFeatures> load_trips(const Settings& s) {
  auto trips = roadwet::read_feature_csv(s.features);
  if (!s.manifest.empty()) roadwet::attach_routes(trips, roadwet::parse_manifest(s.manifest));
  return trips;
}

void cmd_synth(const Settings& s, CLI::App* sub) {
  roadwet::synth::SynthSpec spec;
  if (!s.spec_path.empty()) spec = roadwet::synth::spec_from_json(json::parse(roadwet::read_file(s.spec_path)));
  if (!s.seed_override.empty()) spec.seed = std::stoull(s.seed_override);
  const fs::path out(s.out);
  const auto corpus = roadwet::synth::generate_corpus(spec, out);
  roadwet::write_file_atomic(out / "synth_spec.json", roadwet::synth::to_json(spec).dump(2) + "\n");
  write_config(out / "config.json", sub);
  std::cout << corpus.manifest_path.string() << "\n";
}

void cmd_extract(const Settings& s, CLI::App* sub) {
  const auto set = roadwet::feature_set_from_string(s.set);
  const auto manifest = roadwet::parse_manifest(s.manifest);
  std::vector<roadwet::TripFeatures> trips;
  for (const auto& m : manifest)
    trips.push_back(roadwet::extract_trip(m, roadwet::load_wav(roadwet::resolve_audio_path(s.manifest, m)), set));
  roadwet::write_feature_csv(s.out, trips);
  write_config(s.out + ".config.json", sub);
}

void cmd_select(const Settings& s, CLI::App* sub) {
  namespace sel = roadwet::select;
  const auto trips = roadwet::read_feature_csv(s.features);
  if (trips.empty()) throw roadwet::DataError("feature file has no trips");
  Eigen::Index rows = 0;
  for (const auto& t : trips) rows += static_cast<Eigen::Index>(t.frames());
  const auto& names = trips.front().features.feature_names;
  Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(names.size()));
  std::vector<int> labels;
  Eigen::Index r = 0;
  for (const auto& t : trips) {
    x.middleRows(r, t.features.values.rows()) = t.features.values;
    r += t.features.values.rows();
    labels.insert(labels.end(), t.labels.begin(), t.labels.end());
  }
  sel::Discretization disc;
  if (s.discretization == "mdl") disc = sel::Discretization::Mdl;
  else if (s.discretization == "equal-width") disc = sel::Discretization::EqualWidth;
  else throw roadwet::DataError("unknown discretization '" + s.discretization + "' (expected mdl|equal-width)");
  json report;
  if (s.method == "ig") {
    report = sel::ig_report(sel::rank_by_ig(x, labels, disc), s.top_k, names);
  } else if (s.method == "cfs") {
    report = sel::cfs_report(sel::best_first_cfs(x, labels, s.max_stale, disc), s.max_stale, names);
  } else {
    throw roadwet::DataError("unknown selection method '" + s.method + "' (expected ig|cfs)");
  }
  report["parameters"]["discretization"] = s.discretization;
  roadwet::write_file_atomic(s.out, report.dump(2) + "\n");
  write_config(s.out + ".config.json", sub);
}

void cmd_train(const Settings& s, CLI::App* sub) {
  const auto opt = train_options(s);
  const auto trips = load_trips(s);
  std::vector<const roadwet::TripFeatures*> train, val;
  for (const auto& t : trips) {
    const bool held_out = !s.val_route.empty() && std::to_string(t.route_id) == s.val_route;
    (held_out ? val : train).push_back(&t);
  }
  if (!s.val_route.empty() && s.manifest.empty()) throw roadwet::DataError("--val-route needs --manifest for route ids");
  if (!s.val_route.empty() && val.empty()) throw roadwet::DataError("no trips on validation route " + s.val_route);
  const auto bundle = roadwet::train_model(train, val, opt);
  roadwet::write_file_atomic(s.out, roadwet::bundle_to_json(bundle).dump() + "\n");
  write_config(s.out + ".config.json", sub);
}

void cmd_eval(const Settings& s, CLI::App* sub) {
  if (s.protocol != "cross-route") throw roadwet::DataError("unknown protocol '" + s.protocol + "' (expected cross-route)");
  const auto opt = train_options(s);
  const auto trips = load_trips(s);
  const auto report = roadwet::eval::cross_route_eval(trips, roadwet::make_trainer(opt), s.threshold, s.threads);
  auto j = roadwet::eval::report_json(report);
  j["arch"] = s.arch;
  j["protocol"] = s.protocol;
  if (!s.timeline.empty()) roadwet::write_file_atomic(s.timeline, roadwet::eval::report_timeline_csv(report));
  roadwet::write_file_atomic(s.out, j.dump(2) + "\n");
  write_config(s.out + ".config.json", sub);
  std::printf("mean_uar %.6f\n", report.mean_uar);
}

void cmd_predict(const Settings& s, CLI::App* sub) {
  const auto bundle = roadwet::bundle_from_json(json::parse(roadwet::read_file(s.model)));
  const auto trips = roadwet::read_feature_csv(s.features);
  std::vector<roadwet::eval::TimelineEntry> timeline;
  for (const auto& t : trips) {
    const auto p = roadwet::predict_trip(bundle, t);
    for (std::size_t i = 0; i < t.frames(); ++i)
      timeline.push_back({t.trip_id, t.features.frame_times[i], t.speeds[i], t.labels[i], p.classes[i], p.posterior_wet[i]});
  }
  roadwet::write_file_atomic(s.out, roadwet::eval::timeline_csv(timeline));
  write_config(s.out + ".config.json", sub);
}

void cmd_pca(const Settings& s, CLI::App* sub) {
  const auto trips = roadwet::read_feature_csv(s.features);
  Eigen::Index rows = 0;
  for (const auto& t : trips) rows += static_cast<Eigen::Index>(t.frames());
  if (trips.empty()) throw roadwet::DataError("feature file has no trips");
  Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(trips.front().features.dims()));
  Eigen::Index r = 0;
  for (const auto& t : trips) {
    x.middleRows(r, t.features.values.rows()) = t.features.values;
    r += t.features.values.rows();
  }
  const auto pca = roadwet::eval::pca_project(x, s.components);
  std::string csv = "trip_id,frame_time_s,label";
  for (std::size_t c = 0; c < s.components; ++c) csv += ",pc" + std::to_string(c + 1);
  csv += "\n";
  r = 0;
  for (const auto& t : trips)
    for (std::size_t i = 0; i < t.frames(); ++i, ++r) {
      csv += t.trip_id + "," + roadwet::format_g9(t.features.frame_times[i]) + "," + std::to_string(t.labels[i]);
      for (Eigen::Index c = 0; c < pca.projected.cols(); ++c) csv += "," + roadwet::format_g9(pca.projected(r, c));
      csv += "\n";
    }
  roadwet::write_file_atomic(s.out, csv);
  json ev = json::array();
  for (Eigen::Index c = 0; c < pca.explained_variance.size(); ++c) ev.push_back(pca.explained_variance[c]);
  roadwet::write_file_atomic(s.out + ".variance.json", json{{"explained_variance", ev}}.dump(2) + "\n");
  write_config(s.out + ".config.json", sub);
}

void add_training_flags(CLI::App* sub, Settings& s) {
  sub->add_option("--arch", s.arch, "Model family: lstm, blstm or svm")->check(CLI::IsMember({"lstm", "blstm", "svm"}));
  sub->add_option("--layout", s.layout, "Hidden layer sizes as A-B-C");
  sub->add_option("--lr", s.lr, "Learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--seed", s.seed, "Weight-initialization and shuffling seed");
  sub->add_option("--epochs", s.epochs, "Maximum training epochs");
  sub->add_option("--patience", s.patience, "Early-stopping patience in epochs");
  sub->add_option("--subseq", s.subseq, "Training subsequence length in frames");
  sub->add_option("--peepholes", s.peepholes, "Use peephole connections (true|false)");
  sub->add_option("--standardize", s.standardize, "Z-score network inputs with training statistics (true|false)");
  sub->add_option("--C", s.C, "SVM regularization constant")->check(CLI::PositiveNumber);
  sub->add_option("--kernel", s.kernel, "SVM kernel: linear or rbf")->check(CLI::IsMember({"linear", "rbf"}));
  sub->add_option("--gamma", s.gamma, "RBF kernel width")->check(CLI::PositiveNumber);
  sub->add_option("--svm-tol", s.svm_tol, "SMO stopping tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--selection", s.selection, "Selection report whose columns the model reads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wet/dry road surface detection from tire-road audio"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  Settings s;
  const auto config_flag = [&](CLI::App* sub) {
    sub->add_option("--config", "JSON file of flag values; command-line flags take precedence");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic wet/dry corpus");
  synth->add_option("--spec", s.spec_path, "Synth spec JSON (defaults apply to missing keys)");
  synth->add_option("--seed", s.seed_override, "Override the spec's seed");
  synth->add_option("--out", s.out, "Output directory")->required();
  config_flag(synth);

  auto* extract = app.add_subcommand("extract", "Extract per-frame features for every trip in a manifest");
  extract->add_option("--manifest", s.manifest, "Trip manifest JSON")->required();
  extract->add_option("--set", s.set, "Feature set: asf or octave")->check(CLI::IsMember({"asf", "octave"}));
  extract->add_option("--out", s.out, "Output CSV")->required();
  config_flag(extract);

  auto* select = app.add_subcommand("select", "Rank or select features");
  select->add_option("--features", s.features, "Feature CSV")->required();
  select->add_option("--method", s.method, "ig or cfs")->check(CLI::IsMember({"ig", "cfs"}));
  select->add_option("--top-k", s.top_k, "Number of features kept by ig");
  select->add_option("--max-stale", s.max_stale, "Non-improving expansions before cfs stops");
  select->add_option("--discretization", s.discretization, "mdl or equal-width")
      ->check(CLI::IsMember({"mdl", "equal-width"}));
  select->add_option("--out", s.out, "Output report JSON")->required();
  config_flag(select);

  auto* train = app.add_subcommand("train", "Train one model on all trips (minus an optional validation route)");
  train->add_option("--features", s.features, "Feature CSV")->required();
  train->add_option("--manifest", s.manifest, "Trip manifest JSON (route ids)");
  train->add_option("--val-route", s.val_route, "Route id held out for early stopping");
  add_training_flags(train, s);
  train->add_option("--out", s.out, "Output model JSON")->required();
  config_flag(train);

  auto* evalc = app.add_subcommand("eval", "Run the six-experiment cross-route evaluation");
  evalc->add_option("--manifest", s.manifest, "Trip manifest JSON")->required();
  evalc->add_option("--features", s.features, "Feature CSV")->required();
  evalc->add_option("--protocol", s.protocol, "Evaluation protocol")->check(CLI::IsMember({"cross-route"}));
  evalc->add_option("--threshold", s.threshold, "Speed threshold in mph for the stratified UAR");
  evalc->add_option("--threads", s.threads, "Experiments run concurrently");
  evalc->add_option("--timeline", s.timeline, "Optional per-frame timeline CSV");
  add_training_flags(evalc, s);
  evalc->add_option("--out", s.out, "Output report JSON")->required();
  config_flag(evalc);

  auto* predict = app.add_subcommand("predict", "Per-frame predictions of a trained model");
  predict->add_option("--model", s.model, "Model JSON")->required();
  predict->add_option("--features", s.features, "Feature CSV")->required();
  predict->add_option("--out", s.out, "Output timeline CSV")->required();
  config_flag(predict);

  auto* pca = app.add_subcommand("pca", "Project features onto their principal components");
  pca->add_option("--features", s.features, "Feature CSV")->required();
  pca->add_option("--components", s.components, "Number of components");
  pca->add_option("--out", s.out, "Output CSV")->required();
  config_flag(pca);

  std::vector<std::string> args(argv, argv + argc);
  args = expand_config(app, args);
  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", kUsage, e.what());
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth") cmd_synth(s, sub);
    else if (name == "extract") cmd_extract(s, sub);
    else if (name == "select") cmd_select(s, sub);
    else if (name == "train") cmd_train(s, sub);
    else if (name == "eval") cmd_eval(s, sub);
    else if (name == "predict") cmd_predict(s, sub);
    else if (name == "pca") cmd_pca(s, sub);
  } catch (const roadwet::NumericError& e) {
    fail("numeric", kNumeric, e.what());
  } catch (const roadwet::DataError& e) {
    fail("data", kData, e.what());
  } catch (const json::exception& e) {
    fail("data", kData, e.what());
  } catch (const std::invalid_argument& e) {
    fail("usage", kUsage, e.what());
  } catch (const std::out_of_range& e) {
    fail("usage", kUsage, e.what());
  }
  return kOk;
}
