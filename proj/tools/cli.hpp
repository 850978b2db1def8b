#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vtgrasp.hpp"

namespace vtgrasp::cli {

namespace fs = std::filesystem;

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kData = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot write '" + p.string() + "'");
  return f;
}

inline std::ifstream open_in(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open '" + p + "'");
  return f;
}

inline harness::ScenarioConfig scenario(const Globals& g, harness::ScenarioConfig fallback = {}) {
  harness::ScenarioConfig s = g.config.empty() ? std::move(fallback) : harness::load_scenario(g.config);
  if (g.seed) s.seed = *g.seed;
  s.validate();
  return s;
}

/// Numbers separated by commas, whitespace or newlines; read from a file when `spec` names one.
inline std::vector<double> read_scores(const std::string& spec) {
  std::string body = spec;
  if (fs::is_regular_file(spec)) {
    std::ostringstream ss;
    ss << open_in(spec).rdbuf();
    body = ss.str();
  }
  for (char& c : body) if (c == ',' || c == '\n' || c == '\r' || c == '\t') c = ' ';
  std::vector<double> out;
  std::istringstream in(body);
  std::string tok;
  while (in >> tok) out.push_back(text::parse_double(tok, "score"));
  if (out.empty()) throw Error(ErrorCode::parse, "empty score list '" + spec + "'");
  return out;
}

inline std::vector<TactileFrame> load_frames(const std::vector<std::string>& paths, SensorUnit unit) {
  std::vector<TactileFrame> frames;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    TactileFrame f;
    f.pixels = pnm::load_ppm(paths[i]);
    f.unit = unit;
    f.timestamp_ms = harness::frame_time_ms(static_cast<std::int64_t>(i));
    frames.push_back(std::move(f));
  }
  return frames;
}

// --- subcommands ---------------------------------------------------------------

struct FilterArgs {
  std::vector<std::string> frames;
  int threshold = 25;
  int kernel = 5;
  std::string unit = "A";
};

inline int cmd_filter(const FilterArgs& a, const Globals& g, std::ostream& out) {
  FilterConfig cfg;
  cfg.binarize_threshold = a.threshold;
  cfg.kernel_width = cfg.kernel_height = a.kernel;
  cfg.sequence_length = a.frames.size();
  cfg.validate();
  const auto frames = load_frames(a.frames, parse_sensor_unit(a.unit));
  const FilteredImage psi = filter_image(std::span<const TactileFrame>(frames), cfg);
  out << "brightness " << fmt("%.6g", brightness(psi)) << '\n';
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    pnm::save_pgm(fs::path(g.out) / "psi.pgm", psi.image());
  }
  return kOk;
}

struct DetectSlipArgs {
  std::vector<std::string> frames;
  std::string method = "brightness";
  std::optional<double> threshold;
  std::string unit = "A";
  std::string scores;
};

inline int cmd_detect_slip(const DetectSlipArgs& a, const Globals& g, std::ostream& out) {
  harness::ScenarioConfig s = scenario(g);
  const SlipMethod method = parse_slip_method(a.method);
  if (a.threshold) {
    (method == SlipMethod::brightness ? s.classifier.slip_threshold_brightness : s.classifier.slip_threshold_cnn) = *a.threshold;
  }
  s.classifier.validate();
  const SensorUnit unit = parse_sensor_unit(a.unit);
  std::optional<OracleProvider> provider;
  if (method == SlipMethod::cnn) {
    if (a.scores.empty()) throw Error(ErrorCode::usage, "--method cnn needs --scores");
    auto in = open_in(a.scores);
    provider = OracleProvider::from_csv(in, unit, Task::slip);
  }
  const std::size_t n = s.filter.sequence_length;
  if (a.frames.size() < n || a.frames.size() % n != 0) {
    throw Error(ErrorCode::structural, "frame count " + std::to_string(a.frames.size()) + " is not a multiple of the window length " +
                                           std::to_string(n));
  }
  const auto frames = load_frames(a.frames, unit);
  out << "window,statistic,slip\n";
  int events = 0;
  std::ostringstream csv;
  csv << "window,statistic,slip\n";
  for (std::size_t w = 0; w * n < frames.size(); ++w) {
    const std::span<const TactileFrame> win(frames.data() + w * n, n);
    const auto ev = evaluate_slip(win, method, provider ? &*provider : nullptr, s.classifier, s.filter);
    events += ev.label.value;
    const std::string line = std::to_string(w) + ',' + fmt("%.6g", ev.statistic) + ',' + (ev.label.value ? "1" : "0") + '\n';
    out << line;
    csv << line;
    if (!g.out.empty() && ev.label.value) {
      fs::create_directories(g.out);
      pnm::save_pgm(fs::path(g.out) / ("psi_" + std::to_string(w) + ".pgm"), ev.evidence.image());
    }
  }
  out << "slip_events " << events << '\n';
  if (!g.out.empty()) open_out(fs::path(g.out) / "slip.csv") << csv.str();
  return kOk;
}

struct GraspSimArgs {
  std::string scores_a;
  std::string scores_b;
  std::string mode = "grasp";
  int count = 3;
  int max_steps = 255;
  int start_step = 0;
  double contact_threshold = 0.5;
};

inline int cmd_grasp_sim(const GraspSimArgs& a, const Globals& g, std::ostream& out) {
  const auto sa = read_scores(a.scores_a);
  const auto sb = read_scores(a.scores_b);
  GripperState gripper(a.max_steps, a.start_step);
  ScriptedFrameSource fa(SensorUnit::A, sa.size()), fb(SensorUnit::B, sb.size());
  const auto pa = scripted_provider(SensorUnit::A, sa);
  const auto pb = scripted_provider(SensorUnit::B, sb);
  ClassifierConfig ccfg;
  ccfg.contact_threshold = a.contact_threshold;
  const auto ctl = ControllerConfig::for_gripper(gripper, a.count);
  GraspPhaseResult r;
  if (a.mode == "grasp") r = grasp_contact_loop(fa, fb, pa, pb, gripper, ccfg, ctl);
  else if (a.mode == "release") r = release_loop(fa, fb, pa, pb, gripper, ccfg, ctl);
  else throw Error(ErrorCode::usage, "--mode must be grasp or release");
  write_trace_csv(out, r.trace);
  out << "outcome " << to_string(r.outcome) << " iterations " << r.iterations << " steps " << r.steps_taken
      << " final_step " << gripper.step() << '\n';
  if (!g.out.empty()) {
    auto f = open_out(fs::path(g.out) / "trace.csv");
    write_trace_csv(f, r.trace);
  }
  return r.outcome == Outcome::fault_provider ? kData : kOk;
}

struct RunEpisodeArgs {
  std::string batch;
};

inline void write_csr_tables(const std::vector<metrics::EpisodeOutcome>& outcomes, const fs::path& dir, std::ostream& out) {
  using metrics::GroupBy;
  const std::pair<const char*, GroupBy> groups[] = {
      {"environment", GroupBy::environment}, {"class", GroupBy::object_class}, {"module", GroupBy::module}};
  for (const auto& [name, by] : groups) {
    const auto rows = metrics::csr(outcomes, by);
    out << "# csr by " << name << '\n';
    metrics::write_csr_csv(out, rows);
    if (!dir.empty()) {
      auto f = open_out(dir / (std::string("csr_") + name + ".csv"));
      metrics::write_csr_csv(f, rows);
    }
  }
  out << "first_attempt_rate " << fmt("%.4f", metrics::first_attempt_rate(outcomes)) << '\n';
}

inline int cmd_run_episode(const RunEpisodeArgs& a, const Globals& g, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (a.batch.empty()) {
    const auto s = scenario(g);
    const auto r = harness::run_episode(s);
    if (!g.out.empty()) {
      harness::write_episode_outputs(r, g.out);
      open_out(fs::path(g.out) / "scenario.json") << harness::to_json(s).dump(2) << '\n';
    }
    for (const auto& [k, v] : r.summary) out << k << ' ' << v << '\n';
  } else {
    const auto path = a.batch;
    const auto j = harness::read_json_file(path);
    if (!j.is_array()) throw Error(ErrorCode::invalid_config, "batch file must hold a JSON array of scenarios");
    const auto slash = path.find_last_of('/');
    const std::string base = slash == std::string::npos ? std::string{} : path.substr(0, slash);
    std::vector<harness::ScenarioConfig> scenarios;
    for (const auto& item : j) {
      auto s = harness::scenario_from_json(item, base);
      if (g.seed) s.seed = *g.seed + scenarios.size();
      scenarios.push_back(std::move(s));
    }
    const auto results = harness::run_batch(scenarios);
    std::vector<metrics::EpisodeOutcome> outcomes;
    for (std::size_t i = 0; i < results.size(); ++i) {
      outcomes.push_back(results[i].outcome);
      if (!g.out.empty()) harness::write_episode_outputs(results[i], fs::path(g.out) / ("episode_" + std::to_string(i)));
    }
    metrics::write_episodes_csv(out, outcomes);
    if (!g.out.empty()) {
      auto f = open_out(fs::path(g.out) / "episodes.csv");
      metrics::write_episodes_csv(f, outcomes);
    }
    write_csr_tables(outcomes, g.out.empty() ? fs::path{} : fs::path(g.out), out);
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  out << "elapsed_ms " << fmt("%.1f", ms) << '\n';
  return kOk;
}

struct ExperimentArgs {
  std::string name;
  std::vector<int> counts{1, 2, 3, 4, 5};
  std::vector<std::string> classes;
  std::vector<double> thresholds{5.0, 10.0, 15.0};
  double lift_seconds = 15.0;
};

inline int cmd_experiment(const ExperimentArgs& a, const Globals& g, std::ostream& out) {
  const fs::path dir = g.out;
  if (a.name == "slip-comp") {
    const auto s = scenario(g, harness::water_object_scenario());
    std::ostringstream timeline, summary;
    timeline << "compensation,iteration,time_s,slip,cumulative,gripper_step\n";
    summary << "compensation,slip_events,bursts,fell,retained,grasp_step,required_hold_step,final_step\n";
    for (bool on : {true, false}) {
      const auto r = harness::experiment_slip_compensation(s, on, a.lift_seconds);
      const char* label = on ? "on" : "off";
      harness::write_slip_timeline_csv(timeline, r.timeline, label);
      summary << label << ',' << r.slip_events << ',' << r.bursts << ',' << r.fell << ',' << r.retained << ','
              << r.grasp_step << ',' << r.required_hold_step << ',' << r.final_step << '\n';
      if (!dir.empty()) {
        auto f = open_out(dir / (std::string("events_") + label + ".csv"));
        harness::write_events_csv(f, r.events);
      }
    }
    out << summary.str();
    if (!dir.empty()) {
      open_out(dir / "slip_compensation.csv") << summary.str();
      open_out(dir / "slip_timeline.csv") << timeline.str();
    }
    return kOk;
  }
  if (a.name == "contact-sweep") {
    const auto s = scenario(g);
    std::vector<ObjectClass> classes;
    if (a.classes.empty()) classes.assign(kObjectClasses.begin(), kObjectClasses.end());
    for (const auto& c : a.classes) classes.push_back(parse_object_class(c));
    const auto r = harness::experiment_contact_sweep(s, classes, a.counts);
    std::ostringstream table, minimal, timeline;
    table << "class,count,slip_events,fell,stable\n";
    timeline << "class,count,iteration,time_s,slip,cumulative,gripper_step\n";
    for (const auto& row : r.rows) {
      table << to_string(row.cls) << ',' << row.count << ',' << row.slip_events << ',' << row.fell << ',' << row.stable() << '\n';
      harness::write_slip_timeline_csv(timeline, row.timeline, std::string(to_string(row.cls)) + ',' + std::to_string(row.count));
    }
    minimal << "class,minimal_stable_count\n";
    for (auto c : classes) minimal << to_string(c) << ',' << r.minimal_stable_count(c) << '\n';
    out << table.str() << minimal.str();
    if (!dir.empty()) {
      open_out(dir / "contact_sweep.csv") << table.str();
      open_out(dir / "minimal_counts.csv") << minimal.str();
      open_out(dir / "contact_sweep_timeline.csv") << timeline.str();
    }
    return kOk;
  }
  if (a.name == "slip-accuracy") {
    const auto s = scenario(g);
    auto fx = harness::SlipFixture::standard();
    fx.sensor.noise_amplitude = s.sensor.noise_amplitude;
    const auto r = harness::experiment_slip_accuracy(fx, s.seed, a.thresholds);
    std::ostringstream table, windows;
    harness::write_accuracy_csv(table, r.rows);
    harness::write_window_scores_csv(windows, r, fx);
    out << table.str();
    out << "median_ms_per_window " << fmt("%.3f", r.median_ms) << '\n';
    if (!dir.empty()) {
      open_out(dir / "slip_accuracy.csv") << table.str();
      open_out(dir / "slip_windows.csv") << windows.str();
    }
    return kOk;
  }
  throw Error(ErrorCode::usage, "unknown experiment '" + a.name + "'");
}

struct EvalArgs {
  std::string kind;
  std::string input;
  std::string detections;
  std::string ground_truth;
  std::string mode = "box";
  std::vector<double> iou{0.5, 0.75, 0.9};
  std::vector<std::string> classes;
};

inline int cmd_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  std::ostringstream report;
  if (a.kind == "ap") {
    if (a.detections.empty() || a.ground_truth.empty()) throw Error(ErrorCode::usage, "ap needs --detections and --ground-truth");
    const auto mode = a.mode == "mask" ? metrics::RegionMode::mask : metrics::RegionMode::box;
    auto din = open_in(a.detections);
    auto gin = open_in(a.ground_truth);
    const auto dets = metrics::read_detections_csv(din, mode, fs::path(a.detections).parent_path());
    const auto gts = metrics::to_ground_truth(metrics::read_detections_csv(gin, mode, fs::path(a.ground_truth).parent_path()));
    metrics::write_ap_report(report, metrics::evaluate_detections(dets, gts, a.iou));
  } else if (a.kind == "iou") {
    auto in = open_in(a.input);
    const auto rows = text::read_csv(in, {"x1", "y1", "w1", "h1", "x2", "y2", "w2", "h2"});
    report << "row,iou\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() != 8) throw Error(ErrorCode::parse, "iou row needs 8 fields");
      double v[8];
      for (int k = 0; k < 8; ++k) v[k] = text::parse_double(r[k], "box coordinate");
      report << i << ',' << fmt("%.10f", metrics::iou(metrics::Box{v[0], v[1], v[2], v[3]}, metrics::Box{v[4], v[5], v[6], v[7]})) << '\n';
    }
  } else if (a.kind == "accuracy") {
    auto in = open_in(a.input);
    std::vector<std::pair<bool, bool>> pairs;
    for (const auto& r : text::read_csv(in, {"truth", "predicted"})) {
      if (r.size() != 2) throw Error(ErrorCode::parse, "label row needs 2 fields");
      auto bit = [](const std::string& s) {
        if (s != "0" && s != "1") throw Error(ErrorCode::parse, "binary labels must be 0 or 1");
        return s == "1";
      };
      pairs.emplace_back(bit(r[0]), bit(r[1]));
    }
    const auto c = metrics::count_binary(pairs);
    report << "tp,tn,fp,fn,accuracy\n"
           << c.tp << ',' << c.tn << ',' << c.fp << ',' << c.fn << ',' << fmt("%.6f", metrics::accuracy(c)) << '\n';
  } else if (a.kind == "confusion") {
    auto in = open_in(a.input);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::string> classes = a.classes;
    for (const auto& r : text::read_csv(in, {"truth", "predicted"})) {
      if (r.size() != 2) throw Error(ErrorCode::parse, "label row needs 2 fields");
      pairs.emplace_back(r[0], r[1]);
      if (a.classes.empty()) {
        for (const auto& c : {r[0], r[1]}) {
          if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
        }
      }
    }
    if (a.classes.empty()) std::sort(classes.begin(), classes.end());
    metrics::write_confusion_csv(report, metrics::confusion_matrix(pairs, classes));
  } else if (a.kind == "csr") {
    auto in = open_in(a.input);
    write_csr_tables(metrics::read_episodes_csv(in), {}, report);
  } else {
    throw Error(ErrorCode::usage, "unknown metric kind '" + a.kind + "'");
  }
  out << report.str();
  if (!g.out.empty()) open_out(fs::path(g.out) / (a.kind + ".csv")) << report.str();
  return kOk;
}

// --- entry point ---------------------------------------------------------------

inline int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::usage ? kUsage : kData;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Visual-tactile grasping pipeline tools", "vtgrasp"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed override");
  app.add_option("--config", g.config, "Scenario JSON file");
  app.add_option("--out", g.out, "Output directory");

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Filter a PPM frame sequence into a PGM and print its brightness");
  filter->add_option("frames", fa.frames, "PPM frames, oldest first")->required()->expected(2, -1);
  filter->add_option("--threshold", fa.threshold, "Binarization threshold");
  filter->add_option("--kernel", fa.kernel, "Square structuring element size (odd)");
  filter->add_option("--unit", fa.unit, "Sensor unit A or B");

  DetectSlipArgs da;
  auto* detect = app.add_subcommand("detect-slip", "Classify consecutive non-overlapping windows of a PPM sequence");
  detect->add_option("frames", da.frames, "PPM frames, oldest first")->required()->expected(1, -1);
  detect->add_option("--method", da.method, "brightness or cnn")->check(CLI::IsMember({"brightness", "cnn"}));
  detect->add_option("--threshold", da.threshold, "Slip threshold for the chosen method");
  detect->add_option("--unit", da.unit, "Sensor unit A or B");
  detect->add_option("--scores", da.scores, "image_id,score CSV for the cnn method");

  GraspSimArgs ga;
  auto* grasp = app.add_subcommand("grasp-sim", "Run one contact controller loop on scripted per-unit scores");
  grasp->add_option("--scores-a", ga.scores_a, "Scores for unit A (file or comma list)")->required();
  grasp->add_option("--scores-b", ga.scores_b, "Scores for unit B (file or comma list)")->required();
  grasp->add_option("--mode", ga.mode, "grasp or release")->check(CLI::IsMember({"grasp", "release"}));
  grasp->add_option("--count", ga.count, "Consecutive contact detections required");
  grasp->add_option("--max-steps", ga.max_steps, "Gripper step range");
  grasp->add_option("--start-step", ga.start_step, "Initial gripper step");
  grasp->add_option("--contact-threshold", ga.contact_threshold, "Contact score threshold");

  RunEpisodeArgs ra;
  auto* episode = app.add_subcommand("run-episode", "Run one scenario, or a batch, end to end");
  episode->add_option("--batch", ra.batch, "JSON array of scenarios");

  ExperimentArgs ea;
  auto* exp = app.add_subcommand("experiment", "Desk-scale experiments");
  exp->add_option("name", ea.name, "slip-comp, contact-sweep or slip-accuracy")
      ->required()
      ->check(CLI::IsMember({"slip-comp", "contact-sweep", "slip-accuracy"}));
  exp->add_option("--counts", ea.counts, "Contact counts to sweep")->delimiter(',');
  exp->add_option("--classes", ea.classes, "Object classes to sweep")->delimiter(',');
  exp->add_option("--thresholds", ea.thresholds, "Brightness thresholds")->delimiter(',');
  exp->add_option("--lift-seconds", ea.lift_seconds, "Simulated lift duration for slip-comp");

  EvalArgs va;
  auto* eval = app.add_subcommand("eval-metrics", "Detection and grasping metrics from CSV");
  eval->add_option("kind", va.kind, "ap, iou, accuracy, confusion or csr")
      ->required()
      ->check(CLI::IsMember({"ap", "iou", "accuracy", "confusion", "csr"}));
  eval->add_option("--input", va.input, "Input CSV");
  eval->add_option("--detections", va.detections, "Detections CSV (ap)");
  eval->add_option("--ground-truth", va.ground_truth, "Ground-truth CSV (ap)");
  eval->add_option("--mode", va.mode, "box or mask regions (ap)")->check(CLI::IsMember({"box", "mask"}));
  eval->add_option("--iou", va.iou, "IoU thresholds (ap)")->delimiter(',');
  eval->add_option("--classes", va.classes, "Class order (confusion)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (filter->parsed()) return cmd_filter(fa, g, out);
    if (detect->parsed()) return cmd_detect_slip(da, g, out);
    if (grasp->parsed()) return cmd_grasp_sim(ga, g, out);
    if (episode->parsed()) return cmd_run_episode(ra, g, out);
    if (exp->parsed()) return cmd_experiment(ea, g, out);
    if (eval->parsed()) return cmd_eval(va, g, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace vtgrasp::cli
