#pragma once

// Desk-scale experiments: slip compensation on/off, contact-count sweep, and
// slip-detection accuracy on a scripted instability fixture.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "vtgrasp/classifiers.hpp"
#include "vtgrasp/harness/episode.hpp"
#include "vtgrasp/harness/scenario.hpp"
#include "vtgrasp/harness/stream.hpp"
#include "vtgrasp/tactile_image.hpp"

namespace vtgrasp::harness {

inline int iterations_for_seconds(double seconds, std::size_t window_length) {
  return static_cast<int>(std::ceil(seconds * kFramesPerSecond / static_cast<double>(window_length)));
}

struct SlipTimelineRow {
  int iteration = 0;
  double time_s = 0.0;
  int slip = 0;
  int cumulative = 0;
  int gripper_step = 0;
};

inline std::vector<SlipTimelineRow> slip_timeline(const GraspPhaseResult& slip, std::size_t window_length) {
  std::vector<SlipTimelineRow> out;
  int cum = 0;
  for (const auto& t : slip.trace) {
    cum += t.fused;
    out.push_back({t.iteration, t.iteration * static_cast<double>(window_length) / kFramesPerSecond, t.fused, cum,
                   t.gripper_step});
  }
  return out;
}

// --- slip compensation ---------------------------------------------------------

struct SlipCompensationResult {
  bool compensate = true;
  int slip_events = 0;
  int bursts = 0;
  bool fell = false;
  bool retained = false;
  int grasp_step = 0;
  int required_hold_step = 0;
  int final_step = 0;
  std::vector<SlipTimelineRow> timeline;
  std::vector<EventRecord> events;
};

/// Water-weighted bottle: needs one step more than the contact gate leaves it at.
inline ScenarioConfig water_object_scenario() {
  ScenarioConfig s;
  s.object = ObjectSpec::defaults(ObjectClass::plastic);
  s.object.hold_depth_steps = s.controller.contact_count_threshold;
  return s;
}

/// Grasps, then lifts for `lift_seconds` with compensation on or off.
inline SlipCompensationResult experiment_slip_compensation(ScenarioConfig cfg, bool compensate, double lift_seconds = 15.0) {
  cfg.controller.compensate = compensate;
  cfg.waypoints.lift_iterations = iterations_for_seconds(lift_seconds, cfg.filter.sequence_length);
  cfg.waypoints.transport_iterations = 0;
  cfg.validate();
  EpisodeOptions opt;
  opt.keep_snapshots = false;
  const auto m = run_manipulation(cfg, cfg.object.width_mm + cfg.controller.pre_grasp_margin_mm, opt);
  SlipCompensationResult r;
  r.compensate = compensate;
  r.bursts = m.bursts;
  r.fell = m.fell;
  r.grasp_step = m.contact.trace.empty() ? 0 : m.contact.trace.back().gripper_step;
  r.required_hold_step = m.required_hold_step;
  r.final_step = m.final_step;
  r.events = m.events;
  if (m.slip) {
    r.slip_events = m.slip->slip_events;
    r.timeline = slip_timeline(*m.slip, cfg.filter.sequence_length);
  }
  r.retained = m.contact.outcome == Outcome::grasped && !m.fell;
  return r;
}

inline void write_slip_timeline_csv(std::ostream& out, const std::vector<SlipTimelineRow>& rows, std::string_view label) {
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f", r.time_s);
    out << label << ',' << r.iteration << ',' << buf << ',' << r.slip << ',' << r.cumulative << ',' << r.gripper_step << '\n';
  }
}

// --- contact-count sweep -------------------------------------------------------

struct ContactSweepRow {
  ObjectClass cls = ObjectClass::cardboard;
  int count = 0;
  int slip_events = 0;
  bool fell = false;
  int grasp_step = 0;
  std::vector<SlipTimelineRow> timeline;

  bool stable() const { return !fell && slip_events <= 1; }
};

struct ContactSweepResult {
  std::vector<ContactSweepRow> rows;

  /// Smallest count with at most one slip event; 0 when none qualifies.
  int minimal_stable_count(ObjectClass c) const {
    int best = 0;
    for (const auto& r : rows) {
      if (r.cls == c && r.stable() && (best == 0 || r.count < best)) best = r.count;
    }
    return best;
  }
};

/// Each class uses its default proxy; the base scenario supplies sensor,
/// filter, classifier and controller settings.
inline ContactSweepResult experiment_contact_sweep(const ScenarioConfig& base, const std::vector<ObjectClass>& classes,
                                                   const std::vector<int>& counts, double lift_seconds = 6.0) {
  ContactSweepResult out;
  EpisodeOptions opt;
  opt.keep_snapshots = false;
  for (auto c : classes) {
    for (int n : counts) {
      ScenarioConfig cfg = base;
      cfg.object = ObjectSpec::defaults(c);
      cfg.controller.contact_count_threshold = n;
      cfg.controller.compensate = true;
      cfg.waypoints.lift_iterations = iterations_for_seconds(lift_seconds, cfg.filter.sequence_length);
      cfg.waypoints.transport_iterations = 0;
      cfg.validate();
      const auto m = run_manipulation(cfg, cfg.object.width_mm + cfg.controller.pre_grasp_margin_mm, opt);
      ContactSweepRow row;
      row.cls = c;
      row.count = n;
      row.fell = m.fell;
      row.grasp_step = m.contact.trace.empty() ? 0 : m.contact.trace.back().gripper_step;
      if (m.slip) {
        row.slip_events = m.slip->slip_events;
        row.timeline = slip_timeline(*m.slip, cfg.filter.sequence_length);
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

// --- slip-detection accuracy ---------------------------------------------------

enum class InstabilityKind { translate_x, translate_y, rotate };

inline std::string_view to_string(InstabilityKind k) {
  switch (k) {
    case InstabilityKind::translate_x: return "translate_x";
    case InstabilityKind::translate_y: return "translate_y";
    case InstabilityKind::rotate: return "rotate";
  }
  return "?";
}

struct FixtureObject {
  std::string name;
  double semi_x = 50.0;
  double semi_y = 70.0;
  int offset = 55;
  std::vector<double> translate_px;  // 5 magnitudes per axis
  std::vector<double> rotate_rad;    // 5 magnitudes
};

/// Three held objects, each subjected to 15 instabilities (five per kind),
/// separated by stable windows. Some stable windows contain a local
/// grip-pressure change, which is not an instability.
struct SlipFixture {
  std::vector<FixtureObject> objects;
  int stable_windows_between = 2;
  double pressure_radius_px = 26.0;
  int pressure_offset = 30;
  StreamCalibration sensor;

  static SlipFixture standard() {
    SlipFixture f;
    f.objects = {
        {"soft_toy", 50.0, 68.0, 55, {10, 9, 10, 8, 10}, {0.07, 0.07, 0.07, 0.07, 0.12}},
        {"plastic_toy", 60.0, 75.0, 55, {10, 10, 9, 10, 10}, {0.08, 0.1, 0.08, 0.1, 0.08}},
        {"salt_bottle", 40.0, 110.0, 55, {10, 8, 10, 9, 10}, {0.06, 0.08, 0.06, 0.08, 0.06}},
    };
    return f;
  }

  std::size_t instability_count() const { return objects.size() * 15; }
};

struct FixtureWindow {
  int object = 0;
  int instability = -1;  // index within the object, -1 for stable windows
  InstabilityKind kind = InstabilityKind::translate_x;
  bool pressure_change = false;
};

/// Window plan shared by both units.
inline std::vector<FixtureWindow> fixture_schedule(const SlipFixture& fx) {
  std::vector<FixtureWindow> plan;
  for (int o = 0; o < static_cast<int>(fx.objects.size()); ++o) {
    for (int i = 0; i < 15; ++i) {
      for (int s = 0; s < fx.stable_windows_between; ++s) {
        // Pressure appears before instability 1 mod 5 and relaxes before 3 mod 5.
        const bool pressure = s == 0 && (i % 5 == 1 || i % 5 == 3);
        plan.push_back({o, -1, InstabilityKind::translate_x, pressure});
      }
      static constexpr InstabilityKind order[3] = {InstabilityKind::translate_x, InstabilityKind::translate_y,
                                                   InstabilityKind::rotate};
      plan.push_back({o, i, order[i % 3], false});
    }
  }
  return plan;
}

struct WindowScore {
  int object = 0;
  int instability = -1;
  InstabilityKind kind = InstabilityKind::translate_x;
  bool pressure_change = false;
  double brightness = 0.0;
  double elapsed_ms = 0.0;
};

/// Rigid rotation of the patch about its topmost point (the object pivots
/// about the upper edge of the contact).
inline PatchPose swing_about_top(const PatchPose& p, double semi_y, double delta_rad) {
  const double c = std::cos(p.angle_rad), s = std::sin(p.angle_rad);
  const double px = p.dx + s * semi_y, py = p.dy - c * semi_y;  // pivot
  const double rx = p.dx - px, ry = p.dy - py;
  const double cd = std::cos(delta_rad), sd = std::sin(delta_rad);
  return {px + cd * rx - sd * ry, py + sd * rx + cd * ry, p.angle_rad + delta_rad};
}

/// Renders the fixture for one unit and scores every window with
/// filter_image + brightness.
inline std::vector<WindowScore> score_fixture(const SlipFixture& fx, SensorUnit unit, std::uint64_t seed,
                                              const FilterConfig& filter = {}) {
  SyntheticTactileStream stream(unit, fx.sensor, seed);
  const auto plan = fixture_schedule(fx);
  std::vector<WindowScore> out;
  out.reserve(plan.size());
  std::int64_t frame = 0;
  int current_object = -1;
  ContactAppearance look;
  bool pressure_on = false;
  for (const auto& w : plan) {
    if (w.object != current_object) {
      current_object = w.object;
      const auto& ob = fx.objects[w.object];
      look = {};
      look.in_contact = true;
      look.offset = ob.offset;
      look.semi_x = ob.semi_x;
      look.semi_y = ob.semi_y;
      pressure_on = false;
    }
    const auto& ob = fx.objects[w.object];
    ContactAppearance after = look;
    if (w.instability >= 0) {
      const int k = w.instability / 3;  // 0..4 within the kind
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      switch (w.kind) {
        case InstabilityKind::translate_x: after.pose.dx += sign * ob.translate_px.at(k); break;
        case InstabilityKind::translate_y: after.pose.dy += sign * ob.translate_px.at(k); break;
        case InstabilityKind::rotate: after.pose = swing_about_top(look.pose, ob.semi_y, sign * ob.rotate_rad.at(k)); break;
      }
    }
    if (w.pressure_change) {
      pressure_on = !pressure_on;
      after.spots.clear();
      if (pressure_on) after.spots.push_back({0.0, 0.0, fx.pressure_radius_px, fx.pressure_offset});
    }
    std::vector<TactileFrame> window;
    for (std::size_t f = 0; f < filter.sequence_length; ++f) {
      ++frame;
      window.push_back(stream.render(f < filter.sequence_length / 2 ? look : after, frame_time_ms(frame)));
    }
    look = after;
    const auto t0 = std::chrono::steady_clock::now();
    const double b = brightness(filter_image(std::span<const TactileFrame>(window), filter));
    const auto t1 = std::chrono::steady_clock::now();
    out.push_back({w.object, w.instability, w.kind, w.pressure_change, b,
                   std::chrono::duration<double, std::milli>(t1 - t0).count()});
  }
  return out;
}

struct AccuracyRow {
  SensorUnit unit = SensorUnit::A;
  double threshold = 0.0;
  int detected = 0;
  int instabilities = 0;
  int false_positives = 0;
  int windows = 0;
  int correct_windows = 0;

  /// Share of instabilities detected.
  double accuracy() const { return instabilities ? static_cast<double>(detected) / instabilities : 0.0; }
  double window_accuracy() const { return windows ? static_cast<double>(correct_windows) / windows : 0.0; }
};

inline AccuracyRow accuracy_at(const std::vector<WindowScore>& scores, SensorUnit unit, double threshold) {
  AccuracyRow r;
  r.unit = unit;
  r.threshold = threshold;
  ClassifierConfig cfg;
  cfg.slip_threshold_brightness = threshold;
  for (const auto& s : scores) {
    const bool predicted = slip_from_statistic(s.brightness, SlipMethod::brightness, cfg).value;
    const bool actual = s.instability >= 0;
    ++r.windows;
    r.correct_windows += predicted == actual;
    if (actual) {
      ++r.instabilities;
      r.detected += predicted;
    } else {
      r.false_positives += predicted;
    }
  }
  return r;
}

struct SlipAccuracyResult {
  std::vector<AccuracyRow> rows;
  std::vector<std::pair<SensorUnit, std::vector<WindowScore>>> scores;
  double median_ms = 0.0;  // filter_image + brightness per window

  const AccuracyRow& row(SensorUnit u, double t) const {
    for (const auto& r : rows) if (r.unit == u && r.threshold == t) return r;
    throw Error(ErrorCode::usage, "no accuracy row for that unit/threshold");
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::undefined_metric, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline SlipAccuracyResult experiment_slip_accuracy(const SlipFixture& fx, std::uint64_t seed,
                                                   const std::vector<double>& thresholds = {5.0, 10.0, 15.0}) {
  SlipAccuracyResult res;
  std::vector<double> times;
  for (auto unit : {SensorUnit::A, SensorUnit::B}) {
    auto scores = score_fixture(fx, unit, seed);
    for (const auto& s : scores) times.push_back(s.elapsed_ms);
    for (double t : thresholds) res.rows.push_back(accuracy_at(scores, unit, t));
    res.scores.emplace_back(unit, std::move(scores));
  }
  res.median_ms = median(times);
  return res;
}

inline void write_accuracy_csv(std::ostream& out, const std::vector<AccuracyRow>& rows) {
  out << "unit,method,threshold,detected,instabilities,accuracy,false_positives,window_accuracy\n";
  char a[32], w[32], t[32];
  for (const auto& r : rows) {
    std::snprintf(a, sizeof a, "%.3f", r.accuracy());
    std::snprintf(w, sizeof w, "%.3f", r.window_accuracy());
    std::snprintf(t, sizeof t, "%g", r.threshold);
    out << to_string(r.unit) << ",brightness," << t << ',' << r.detected << ',' << r.instabilities << ',' << a << ','
        << r.false_positives << ',' << w << '\n';
  }
}

/// Per-window brightness log; timing is excluded so the file is reproducible.
inline void write_window_scores_csv(std::ostream& out, const SlipAccuracyResult& res, const SlipFixture& fx) {
  out << "unit,window,object,instability,kind,pressure_change,brightness\n";
  char b[32];
  for (const auto& [unit, scores] : res.scores) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto& s = scores[i];
      std::snprintf(b, sizeof b, "%.4f", s.brightness);
      out << to_string(unit) << ',' << i << ',' << fx.objects[s.object].name << ',' << s.instability << ','
          << (s.instability >= 0 ? to_string(s.kind) : std::string_view("stable")) << ',' << (s.pressure_change ? 1 : 0)
          << ',' << b << '\n';
    }
  }
}

}  // namespace vtgrasp::harness
