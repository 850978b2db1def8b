#pragma once

// Closed-loop gripper controllers: contact-driven grasp and release, and
// slip compensation during transport. The gripper is a stepwise opening
// model; every command moves it by exactly one motor step.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "vtgrasp/classifiers.hpp"
#include "vtgrasp/error.hpp"
#include "vtgrasp/snapshot.hpp"
#include "vtgrasp/tactile_image.hpp"

namespace vtgrasp {

class GripperState {
 public:
  static constexpr double kFullOpeningMm = 140.0;

  explicit GripperState(int max_steps = 255, int step = 0) : max_steps_(max_steps), step_(step) {
    if (max_steps < 1) throw Error(ErrorCode::invalid_config, "gripper max_steps must be >= 1");
    if (step < 0 || step > max_steps) throw Error(ErrorCode::invalid_config, "gripper step outside [0, max_steps]");
  }

  int step() const noexcept { return step_; }
  int max_steps() const noexcept { return max_steps_; }
  bool fully_closed() const noexcept { return step_ == max_steps_; }
  bool fully_open() const noexcept { return step_ == 0; }

  static double opening_mm(int step, int max_steps) {
    return kFullOpeningMm * (1.0 - static_cast<double>(step) / static_cast<double>(max_steps));
  }
  double opening_mm() const { return opening_mm(step_, max_steps_); }

  /// Smallest step whose opening is at most `width_mm`.
  static int step_for_opening(double width_mm, int max_steps) {
    if (width_mm >= kFullOpeningMm) return 0;
    if (width_mm <= 0.0) return max_steps;
    const double exact = static_cast<double>(max_steps) * (1.0 - width_mm / kFullOpeningMm);
    int s = static_cast<int>(std::ceil(exact - 1e-9));
    return std::clamp(s, 0, max_steps);
  }

  /// Returns false (and does nothing) at the bound.
  bool close_step() {
    if (step_ >= max_steps_) return false;
    ++step_;
    return true;
  }

  bool open_step() {
    if (step_ <= 0) return false;
    --step_;
    return true;
  }

 private:
  int max_steps_;
  int step_;
};

struct ControllerConfig {
  int contact_count_threshold = 3;
  int max_loop_iterations = 255 + 16;

  static ControllerConfig for_gripper(const GripperState& g, int contact_count = 3) {
    return {contact_count, g.max_steps() + 16};
  }

  void validate(const GripperState& g) const {
    if (contact_count_threshold < 1) throw Error(ErrorCode::invalid_config, "contact count threshold must be >= 1");
    if (max_loop_iterations <= g.max_steps()) {
      throw Error(ErrorCode::invalid_config, "max_loop_iterations must exceed the gripper step range");
    }
  }
};

struct SlipLoopConfig {
  SlipMethod method = SlipMethod::brightness;
  bool compensate = true;
  int max_loop_iterations = 100000;
};

enum class Outcome {
  grasped,
  released,
  transported,
  fault_fully_closed_no_contact,
  fault_compensation_exhausted,
  fault_provider,
  timeout,
};

constexpr std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::grasped: return "grasped";
    case Outcome::released: return "released";
    case Outcome::transported: return "transported";
    case Outcome::fault_fully_closed_no_contact: return "fault_fully_closed_no_contact";
    case Outcome::fault_compensation_exhausted: return "fault_compensation_exhausted";
    case Outcome::fault_provider: return "fault_provider";
    case Outcome::timeout: return "timeout";
  }
  return "unknown";
}

struct TraceRow {
  int iteration = 0;
  int label_a = 0;
  int label_b = 0;
  int fused = 0;
  int gripper_step = 0;
  std::string event;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct GraspPhaseResult {
  Outcome outcome = Outcome::timeout;
  int iterations = 0;
  int steps_taken = 0;
  int slip_events = 0;
  std::vector<TraceRow> trace;
  std::string detail;

  friend bool operator==(const GraspPhaseResult&, const GraspPhaseResult&) = default;
};

// --- sensor sources --------------------------------------------------------

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual TactileFrame latest() = 0;
};

class WindowSource {
 public:
  virtual ~WindowSource() = default;
  /// The next window of consecutive frames, oldest first.
  virtual std::vector<TactileFrame> next_window() = 0;
};

/// Reads whatever a concurrent producer published last.
class SnapshotFrameSource final : public FrameSource {
 public:
  explicit SnapshotFrameSource(const LatestSnapshot<TactileFrame>& slot) : slot_(slot) {}

  TactileFrame latest() override {
    auto snap = slot_.latest();
    if (!snap) throw Error(ErrorCode::structural, "no frame published yet");
    return *snap;
  }

 private:
  const LatestSnapshot<TactileFrame>& slot_;
};

inline bool check_robot_in_release_pose(std::string_view current_waypoint, std::string_view release_waypoint) {
  return current_waypoint == release_waypoint;
}

// --- loops -----------------------------------------------------------------

namespace detail {

inline bool is_provider_failure(const Error& e) { return e.code() == ErrorCode::provider_failure; }

inline GraspPhaseResult provider_fault(GraspPhaseResult r, int it, int step, const Error& e) {
  r.trace.push_back({it, 0, 0, 0, step, "fault_provider"});
  r.iterations = it;
  r.outcome = Outcome::fault_provider;
  r.detail = e.what();
  return r;
}

}  // namespace detail

/// Closes one step per iteration while the AND-fused contact label is 0 and
/// declares the object grasped after `contact_count_threshold` consecutive
/// fused detections. The gripper is left where contact was confirmed.
inline GraspPhaseResult grasp_contact_loop(FrameSource& sensor_a, FrameSource& sensor_b,
                                           const ScoreProvider& provider_a, const ScoreProvider& provider_b,
                                           GripperState& gripper, const ClassifierConfig& ccfg,
                                           const ControllerConfig& cfg) {
  ccfg.validate();
  cfg.validate(gripper);
  GraspPhaseResult r;
  int consecutive = 0;
  for (int it = 1; it <= cfg.max_loop_iterations; ++it) {
    Label la, lb;
    try {
      la = contact_classify(sensor_a.latest(), provider_a, ccfg);
      lb = contact_classify(sensor_b.latest(), provider_b, ccfg);
    } catch (const Error& e) {
      if (!detail::is_provider_failure(e)) throw;
      return detail::provider_fault(std::move(r), it, gripper.step(), e);
    }
    const Label fused = fuse_contact(la, lb);
    r.iterations = it;
    TraceRow row{it, la.value, lb.value, fused.value, gripper.step(), {}};
    if (fused.value) {
      ++consecutive;
      if (consecutive >= cfg.contact_count_threshold) {
        row.event = "grasped";
        r.trace.push_back(row);
        r.outcome = Outcome::grasped;
        return r;
      }
      row.event = "contact";
    } else {
      consecutive = 0;
      if (!gripper.close_step()) {
        row.event = "fault_fully_closed_no_contact";
        r.trace.push_back(row);
        r.outcome = Outcome::fault_fully_closed_no_contact;
        return r;
      }
      ++r.steps_taken;
      row.gripper_step = gripper.step();
      row.event = "close";
    }
    r.trace.push_back(row);
  }
  r.outcome = Outcome::timeout;
  return r;
}

/// Opens one step per iteration while fused contact persists.
inline GraspPhaseResult release_loop(FrameSource& sensor_a, FrameSource& sensor_b, const ScoreProvider& provider_a,
                                     const ScoreProvider& provider_b, GripperState& gripper,
                                     const ClassifierConfig& ccfg, const ControllerConfig& cfg) {
  ccfg.validate();
  cfg.validate(gripper);
  GraspPhaseResult r;
  for (int it = 1; it <= cfg.max_loop_iterations; ++it) {
    Label la, lb;
    try {
      la = contact_classify(sensor_a.latest(), provider_a, ccfg);
      lb = contact_classify(sensor_b.latest(), provider_b, ccfg);
    } catch (const Error& e) {
      if (!detail::is_provider_failure(e)) throw;
      return detail::provider_fault(std::move(r), it, gripper.step(), e);
    }
    const Label fused = fuse_contact(la, lb);
    r.iterations = it;
    TraceRow row{it, la.value, lb.value, fused.value, gripper.step(), {}};
    if (!fused.value) {
      row.event = "released";
      r.trace.push_back(row);
      r.outcome = Outcome::released;
      return r;
    }
    if (gripper.open_step()) {
      ++r.steps_taken;
      row.gripper_step = gripper.step();
      row.event = "open";
    } else {
      row.event = "open_limit";
    }
    r.trace.push_back(row);
  }
  r.outcome = Outcome::timeout;
  return r;
}

/// Per-iteration hook receiving both slip evaluations (for evidence snapshots).
using SlipObserver = std::function<void(int iteration, const SlipEvaluation& a, const SlipEvaluation& b)>;

/// Runs slip detection on both units each iteration, OR-fuses, and closes one
/// step on slip when compensation is enabled. Exits once `in_release_pose`
/// reports true; the predicate is evaluated after the iteration's action.
inline GraspPhaseResult grasp_slip_loop(WindowSource& sensor_a, WindowSource& sensor_b, GripperState& gripper,
                                        const ClassifierConfig& ccfg, const SlipLoopConfig& cfg,
                                        const std::function<bool()>& in_release_pose,
                                        const ScoreProvider* provider_a = nullptr,
                                        const ScoreProvider* provider_b = nullptr,
                                        const FilterConfig& filter = {}, const SlipObserver& observer = {}) {
  ccfg.validate();
  if (cfg.method == SlipMethod::cnn && (!provider_a || !provider_b)) {
    throw Error(ErrorCode::invalid_config, "cnn slip method requires a provider per unit");
  }
  GraspPhaseResult r;
  for (int it = 1; it <= cfg.max_loop_iterations; ++it) {
    SlipEvaluation ea, eb;
    try {
      const auto wa = sensor_a.next_window();
      const auto wb = sensor_b.next_window();
      ea = evaluate_slip(wa, cfg.method, provider_a, ccfg, filter);
      eb = evaluate_slip(wb, cfg.method, provider_b, ccfg, filter);
    } catch (const Error& e) {
      if (!detail::is_provider_failure(e)) throw;
      return detail::provider_fault(std::move(r), it, gripper.step(), e);
    }
    const Label fused = fuse_slip(ea.label, eb.label);
    r.iterations = it;
    TraceRow row{it, ea.label.value, eb.label.value, fused.value, gripper.step(), {}};
    if (fused.value) {
      ++r.slip_events;
      if (cfg.compensate) {
        if (!gripper.close_step()) {
          row.event = "fault_compensation_exhausted";
          r.trace.push_back(row);
          r.outcome = Outcome::fault_compensation_exhausted;
          return r;
        }
        ++r.steps_taken;
        row.gripper_step = gripper.step();
        row.event = "slip_close";
      } else {
        row.event = "slip";
      }
    }
    if (observer) observer(it, ea, eb);
    r.trace.push_back(row);
    if (in_release_pose()) {
      r.outcome = Outcome::transported;
      return r;
    }
  }
  r.outcome = Outcome::timeout;
  return r;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iteration,label_A,label_B,fused,gripper_step,event\n";
  for (const auto& t : trace) {
    out << t.iteration << ',' << t.label_a << ',' << t.label_b << ',' << t.fused << ',' << t.gripper_step << ','
        << t.event << '\n';
  }
}

// --- scripted sources ------------------------------------------------------

/// Emits 1x1 frames labelled "<unit><index>", holding the last index once the
/// script is exhausted. Paired with scripted_provider() to replay score streams.
class ScriptedFrameSource final : public FrameSource {
 public:
  ScriptedFrameSource(SensorUnit unit, std::size_t script_length) : unit_(unit), length_(script_length) {
    if (script_length == 0) throw Error(ErrorCode::invalid_config, "empty score script");
  }

  TactileFrame latest() override {
    const std::size_t i = std::min(next_, length_ - 1);
    ++next_;
    TactileFrame f;
    f.pixels = RgbImage(1, 1);
    f.unit = unit_;
    f.timestamp_ms = static_cast<std::int64_t>(next_);
    f.id = id(unit_, i);
    return f;
  }

  static std::string id(SensorUnit unit, std::size_t i) { return std::string(to_string(unit)) + std::to_string(i); }

 private:
  SensorUnit unit_;
  std::size_t length_;
  std::size_t next_ = 0;
};

inline OracleProvider scripted_provider(SensorUnit unit, const std::vector<double>& scores) {
  std::map<std::string, double, std::less<>> table;
  for (std::size_t i = 0; i < scores.size(); ++i) table[ScriptedFrameSource::id(unit, i)] = scores[i];
  return OracleProvider(unit, Task::contact, std::move(table));
}

}  // namespace vtgrasp
