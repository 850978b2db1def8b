#pragma once

// End-to-end pick-and-place episode against a simulated object and pair of
// tactile sensors. Every module fault ends the episode with a failure stage;
// nothing escapes to the caller except configuration errors.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vtgrasp/classifiers.hpp"
#include "vtgrasp/controller.hpp"
#include "vtgrasp/geometry.hpp"
#include "vtgrasp/harness/scenario.hpp"
#include "vtgrasp/harness/scene.hpp"
#include "vtgrasp/harness/stream.hpp"
#include "vtgrasp/metrics.hpp"
#include "vtgrasp/pnm.hpp"

namespace vtgrasp::harness {

inline constexpr int kFramesPerSecond = 30;

inline std::int64_t frame_time_ms(std::int64_t frame_index) { return frame_index * 1000 / kFramesPerSecond; }

struct EventRecord {
  std::int64_t time_ms = 0;
  std::string phase;
  std::string event;
  std::string detail;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Physical state shared by both sensor streams: the gripper, the object and
/// the slip burst schedule. Unit A drives the clock; the controllers always
/// sample A before B within an iteration.
class TactileWorld {
 public:
  enum class Phase { grasp, transport, release };

  TactileWorld(const ScenarioConfig& cfg, GripperState& gripper, int touch_step)
      : obj_(cfg.object),
        waypoints_(cfg.waypoints),
        gripper_(gripper),
        touch_step_(touch_step),
        streams_{SyntheticTactileStream(SensorUnit::A, cfg.sensor, cfg.seed),
                 SyntheticTactileStream(SensorUnit::B, cfg.sensor, cfg.seed)},
        release_waypoint_("container_" + std::string(to_string(cfg.object.cls))) {
    if (touch_step < 0 || touch_step > gripper.max_steps()) {
      throw Error(ErrorCode::invalid_config, "touch step outside the gripper range");
    }
  }

  int touch_step() const noexcept { return touch_step_; }
  int required_hold_step() const noexcept { return std::min(touch_step_ + obj_.hold_depth_steps, gripper_.max_steps()); }
  int depth() const noexcept { return gripper_.step() - touch_step_; }
  bool fallen() const noexcept { return fallen_; }
  int bursts() const noexcept { return bursts_; }
  int uncompensated_bursts() const noexcept { return uncompensated_; }
  const std::string& waypoint() const noexcept { return waypoint_; }
  const std::string& release_waypoint() const noexcept { return release_waypoint_; }
  const std::vector<EventRecord>& events() const noexcept { return events_; }
  std::int64_t now_ms() const noexcept { return frame_time_ms(frame_); }
  SyntheticTactileStream& stream(SensorUnit u) { return streams_[index(u)]; }

  void set_phase(Phase p, std::string waypoint) {
    phase_ = p;
    waypoint_ = std::move(waypoint);
    log("waypoint", waypoint_);
  }

  void log(std::string event, std::string detail = {}) {
    events_.push_back({now_ms(), std::string(phase_name()), std::move(event), std::move(detail)});
  }

  TactileFrame contact_frame(SensorUnit u) {
    if (u == SensorUnit::A) {
      ++frame_;
      current_ = contact_appearance();
    }
    return stream(u).render(current_, now_ms());
  }

  std::vector<TactileFrame> slip_window(SensorUnit u, std::size_t length) {
    if (u == SensorUnit::B) {
      if (!pending_b_) throw Error(ErrorCode::structural, "unit B window requested before unit A");
      auto w = std::move(*pending_b_);
      pending_b_.reset();
      return w;
    }
    begin_iteration();
    std::vector<TactileFrame> wa, wb;
    for (std::size_t f = 0; f < length; ++f) {
      ++frame_;
      const bool after_midpoint = f >= length / 2;
      ContactAppearance look = base_appearance();
      if (burst_ && after_midpoint) look.pose.dy += streams_[0].calibration().slip_translation_px;
      if (falling_ && after_midpoint) look.in_contact = false;
      wa.push_back(stream(SensorUnit::A).render(look, now_ms()));
      wb.push_back(stream(SensorUnit::B).render(look, now_ms()));
    }
    if (burst_) pose_.dy += streams_[0].calibration().slip_translation_px;
    if (falling_) {
      falling_ = false;
      fallen_ = true;
      log("fall", "after " + std::to_string(uncompensated_) + " uncompensated bursts");
    }
    pending_b_ = std::move(wb);
    return wa;
  }

  /// Closes the transport iteration; true once the arm is at the container.
  bool end_iteration() {
    if (burst_) {
      if (gripper_.step() > step_at_start_) {
        log("burst_compensated", "step " + std::to_string(gripper_.step()));
      } else {
        ++uncompensated_;
        log("burst_uncompensated", std::to_string(uncompensated_));
        if (uncompensated_ >= obj_.fall_after && !fallen_) falling_ = true;
      }
    }
    if (iteration_ == waypoints_.lift_iterations) set_phase(Phase::transport, "transport");
    if (iteration_ == waypoints_.lift_iterations + waypoints_.transport_iterations) {
      set_phase(Phase::transport, release_waypoint_);
    }
    return check_robot_in_release_pose(waypoint_, release_waypoint_);
  }

 private:
  static std::size_t index(SensorUnit u) { return u == SensorUnit::A ? 0 : 1; }

  std::string_view phase_name() const {
    switch (phase_) {
      case Phase::grasp: return "grasp";
      case Phase::transport: return "transport";
      case Phase::release: return "release";
    }
    return "grasp";
  }

  ContactAppearance base_appearance() const {
    ContactAppearance look;
    look.in_contact = !fallen_ && depth() >= 0;
    look.offset = streams_[0].offset_for_depth(depth());
    look.pose = pose_;
    return look;
  }

  /// While grasping, the elastomer settles after each step: at compression
  /// depth d the contact reads positive for (d+1)*stability frames, then
  /// shows one faint frame.
  ContactAppearance contact_appearance() {
    ContactAppearance look = base_appearance();
    if (phase_ != Phase::grasp || !look.in_contact) return look;
    if (gripper_.step() != settle_step_) {
      settle_step_ = gripper_.step();
      settle_frames_ = 0;
    }
    if (settle_frames_ == static_cast<long>(depth() + 1) * obj_.contact_stability) {
      look.intensity = streams_[0].calibration().transient_intensity;
    }
    ++settle_frames_;
    return look;
  }

  void begin_iteration() {
    ++iteration_;
    step_at_start_ = gripper_.step();
    if (iteration_ == 1) next_burst_ = std::max(1, obj_.first_burst);
    const bool insecure = gripper_.step() < required_hold_step();
    burst_ = !fallen_ && !falling_ && insecure && iteration_ >= next_burst_;
    if (burst_) {
      ++bursts_;
      next_burst_ = iteration_ + obj_.burst_period;
      log("slip_burst", "step " + std::to_string(gripper_.step()) + " < " + std::to_string(required_hold_step()));
    }
  }

  ObjectSpec obj_;
  WaypointScript waypoints_;
  GripperState& gripper_;
  int touch_step_;
  std::array<SyntheticTactileStream, 2> streams_;
  std::string release_waypoint_;
  std::string waypoint_ = "detect";
  Phase phase_ = Phase::grasp;
  std::int64_t frame_ = 0;
  ContactAppearance current_;
  int settle_step_ = -1;
  long settle_frames_ = 0;
  PatchPose pose_;
  int iteration_ = 0;
  int next_burst_ = 1;
  int step_at_start_ = 0;
  bool burst_ = false;
  bool falling_ = false;
  bool fallen_ = false;
  int bursts_ = 0;
  int uncompensated_ = 0;
  std::vector<EventRecord> events_;
  std::optional<std::vector<TactileFrame>> pending_b_;
};

class WorldFrameSource final : public FrameSource {
 public:
  WorldFrameSource(TactileWorld& w, SensorUnit u) : world_(w), unit_(u) {}
  TactileFrame latest() override { return world_.contact_frame(unit_); }

 private:
  TactileWorld& world_;
  SensorUnit unit_;
};

class WorldWindowSource final : public WindowSource {
 public:
  WorldWindowSource(TactileWorld& w, SensorUnit u, std::size_t length) : world_(w), unit_(u), length_(length) {}
  std::vector<TactileFrame> next_window() override { return world_.slip_window(unit_, length_); }

 private:
  TactileWorld& world_;
  SensorUnit unit_;
  std::size_t length_;
};

// --- episode -------------------------------------------------------------------

struct PhaseTraceRow {
  std::string phase;
  TraceRow row;
};

struct PsiSnapshot {
  std::string name;
  FilteredImage image;
};

struct EpisodeResult {
  metrics::EpisodeOutcome outcome;
  std::string failure_detail;
  std::vector<PhaseTraceRow> trace;
  std::vector<EventRecord> events;
  std::vector<std::pair<std::string, std::string>> summary;  // ordered key/value
  std::vector<PsiSnapshot> snapshots;
  int slip_events = 0;
  int contact_iterations = 0;
  bool object_fell = false;
};

struct EpisodeOptions {
  std::size_t max_snapshots = 8;
  bool keep_snapshots = true;
};

/// Grasp, transport and release with the object already in the gripper's
/// reach; shared by the full episode and the desk experiments.
struct ManipulationResult {
  GraspPhaseResult contact;
  std::optional<GraspPhaseResult> slip;
  std::optional<GraspPhaseResult> release;
  std::vector<EventRecord> events;
  std::vector<PsiSnapshot> snapshots;
  int touch_step = 0;
  int required_hold_step = 0;
  int final_step = 0;
  bool fell = false;
  int bursts = 0;
};

inline ManipulationResult run_manipulation(const ScenarioConfig& cfg, double preopen_mm, const EpisodeOptions& opt = {}) {
  const int max_steps = cfg.controller.max_steps;
  GripperState gripper(max_steps, GripperState::step_for_opening(preopen_mm, max_steps));
  const int touch = GripperState::step_for_opening(cfg.object.width_mm, max_steps);
  TactileWorld world(cfg, gripper, touch);
  ManipulationResult m;
  m.touch_step = touch;
  m.required_hold_step = world.required_hold_step();

  const auto provider_a = synthetic_contact_provider(world.stream(SensorUnit::A).reference_frame());
  const auto provider_b = synthetic_contact_provider(world.stream(SensorUnit::B).reference_frame());
  WorldFrameSource fa(world, SensorUnit::A), fb(world, SensorUnit::B);
  const ControllerConfig ccfg = {cfg.controller.contact_count_threshold, max_steps + 16};

  world.set_phase(TactileWorld::Phase::grasp, "grasp");
  m.contact = grasp_contact_loop(fa, fb, provider_a, provider_b, gripper, cfg.classifier, ccfg);
  world.log(std::string(to_string(m.contact.outcome)), "step " + std::to_string(gripper.step()));

  if (m.contact.outcome == Outcome::grasped) {
    world.set_phase(TactileWorld::Phase::transport, "lift");
    WorldWindowSource wa(world, SensorUnit::A, cfg.filter.sequence_length);
    WorldWindowSource wb(world, SensorUnit::B, cfg.filter.sequence_length);
    SlipLoopConfig scfg;
    scfg.method = cfg.classifier.slip_method;
    scfg.compensate = cfg.controller.compensate;
    scfg.max_loop_iterations = cfg.waypoints.lift_iterations + cfg.waypoints.transport_iterations + 1;
    auto observer = [&](int it, const SlipEvaluation& a, const SlipEvaluation& b) {
      if (!opt.keep_snapshots || m.snapshots.size() + 2 > opt.max_snapshots) return;
      if (!a.label.value && !b.label.value) return;
      const std::string stem = "psi_" + std::to_string(it);
      m.snapshots.push_back({stem + "_A", a.evidence});
      m.snapshots.push_back({stem + "_B", b.evidence});
    };
    m.slip = grasp_slip_loop(wa, wb, gripper, cfg.classifier, scfg, [&] { return world.end_iteration(); }, nullptr,
                             nullptr, cfg.filter, observer);
    world.log(std::string(to_string(m.slip->outcome)), "step " + std::to_string(gripper.step()));
    if (m.slip->outcome == Outcome::transported) {
      world.set_phase(TactileWorld::Phase::release, "release");
      m.release = release_loop(fa, fb, provider_a, provider_b, gripper, cfg.classifier, ccfg);
      world.log(std::string(to_string(m.release->outcome)), "step " + std::to_string(gripper.step()));
    }
  }
  m.events = world.events();
  m.final_step = gripper.step();
  m.fell = world.fallen();
  m.bursts = world.bursts();
  return m;
}

namespace detail {

inline std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace detail

/// Full episode: detect -> segment -> grasp estimate -> pre-position -> grasp
/// -> lift/transport -> release.
inline EpisodeResult run_episode(const ScenarioConfig& cfg, const EpisodeOptions& opt = {}) {
  cfg.validate();
  EpisodeResult r;
  r.outcome.environment = cfg.environment;
  r.outcome.object_class = cfg.object.cls;
  r.outcome.attempt = cfg.attempt;
  auto& sum = r.summary;
  sum.emplace_back("seed", std::to_string(cfg.seed));
  sum.emplace_back("environment", std::string(metrics::to_string(cfg.environment)));
  sum.emplace_back("class", std::string(to_string(cfg.object.cls)));
  sum.emplace_back("attempt", std::to_string(cfg.attempt));

  auto fail = [&](metrics::FailureStage stage, std::string why) {
    r.outcome.success = false;
    r.outcome.failure_stage = stage;
    r.failure_detail = std::move(why);
    const std::int64_t t = r.events.empty() ? 0 : r.events.back().time_ms;
    r.events.push_back({t, "episode", "failure", std::string(metrics::to_string(stage)) + ": " + r.failure_detail});
  };
  auto finish = [&]() {
    sum.emplace_back("success", r.outcome.success ? "1" : "0");
    sum.emplace_back("failure_stage", std::string(metrics::to_string(r.outcome.failure_stage)));
    sum.emplace_back("failure_detail", r.failure_detail);
    return r;
  };

  // Detection and reconstruction.
  SceneImages scene;
  if (!cfg.mask_file.empty()) {
    try {
      scene.mask = pnm::load_pgm(cfg.mask_file);
      scene.depth = pnm::load_pgm16(cfg.depth_file);
    } catch (const Error& e) {
      fail(metrics::FailureStage::detection, e.what());
      return finish();
    }
  } else {
    scene = render_scene(cfg);
  }
  if (cfg.faults.invalid_depth_fraction > 0.0) inject_invalid_depth(scene, cfg.faults.invalid_depth_fraction, cfg.seed);
  const Detection det = detect(scene, cfg);
  const std::size_t masked = count_mask(det.mask);
  sum.emplace_back("mask_pixels", std::to_string(masked));
  if (masked == 0) {
    fail(metrics::FailureStage::detection, "no object mask");
    return finish();
  }
  if (det.label != cfg.object.cls) {
    fail(metrics::FailureStage::detection, "detected class " + std::string(to_string(det.label)));
    return finish();
  }

  constexpr double kMinValidFraction = 0.5;
  geometry::SegmentedCloud cloud;
  try {
    cloud = geometry::segment_cloud(det.mask, scene.depth, cfg.calibration.intrinsics, det.label, "detection");
  } catch (const Error& e) {
    fail(metrics::FailureStage::rgbd_reconstruction, e.what());
    return finish();
  }
  sum.emplace_back("cloud_points", std::to_string(cloud.points.size()));
  sum.emplace_back("valid_depth_fraction", detail::fmt(cloud.valid_fraction()));
  if (cloud.valid_fraction() < kMinValidFraction) {
    fail(metrics::FailureStage::rgbd_reconstruction, "valid depth fraction " + detail::fmt(cloud.valid_fraction()));
    return finish();
  }

  // Grasp estimation in the base frame.
  std::vector<geometry::Vec3> base_pts;
  base_pts.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    base_pts.push_back(geometry::camera_to_base(p, cfg.calibration.detection_pose, cfg.calibration.hand_eye).xyz);
  }
  geometry::GraspCandidate grasp;
  try {
    grasp = geometry::compute_grasp(base_pts);
  } catch (const Error& e) {
    const auto stage = e.code() == ErrorCode::degenerate_geometry && base_pts.size() < geometry::GraspOptions{}.min_points
                           ? metrics::FailureStage::rgbd_reconstruction
                           : metrics::FailureStage::grasp_points;
    fail(stage, e.what());
    return finish();
  }
  sum.emplace_back("grasp_opening_mm", detail::fmt(grasp.opening_required_mm, 2));
  const geometry::Vec3 mid = grasp.midpoint();
  sum.emplace_back("grasp_midpoint_m", detail::fmt(mid.x()) + " " + detail::fmt(mid.y()) + " " + detail::fmt(mid.z()));
  if (!geometry::check_workspace({mid}, cfg.calibration.workspace)) {
    fail(metrics::FailureStage::grasp_points, "grasp midpoint outside the workspace");
    return finish();
  }
  const geometry::Vec3 staging = geometry::staging_point(grasp);
  r.events.push_back({0, "plan", "staging_point",
                      detail::fmt(staging.x()) + " " + detail::fmt(staging.y()) + " " + detail::fmt(staging.z())});

  // Manipulation.
  const double preopen = std::min(GripperState::kFullOpeningMm, grasp.opening_required_mm + cfg.controller.pre_grasp_margin_mm);
  ManipulationResult m = run_manipulation(cfg, preopen, opt);
  r.events.insert(r.events.end(), m.events.begin(), m.events.end());
  for (const auto& row : m.contact.trace) r.trace.push_back({"grasp", row});
  if (m.slip) for (const auto& row : m.slip->trace) r.trace.push_back({"transport", row});
  if (m.release) for (const auto& row : m.release->trace) r.trace.push_back({"release", row});
  r.snapshots = std::move(m.snapshots);
  r.slip_events = m.slip ? m.slip->slip_events : 0;
  r.contact_iterations = m.contact.iterations;
  r.object_fell = m.fell;
  sum.emplace_back("touch_step", std::to_string(m.touch_step));
  sum.emplace_back("required_hold_step", std::to_string(m.required_hold_step));
  sum.emplace_back("contact_outcome", std::string(to_string(m.contact.outcome)));
  sum.emplace_back("slip_events", std::to_string(r.slip_events));
  sum.emplace_back("slip_bursts", std::to_string(m.bursts));
  sum.emplace_back("object_fell", m.fell ? "1" : "0");
  sum.emplace_back("final_step", std::to_string(m.final_step));

  if (m.contact.outcome != Outcome::grasped) {
    fail(metrics::FailureStage::contact_detection, std::string(to_string(m.contact.outcome)));
  } else if (m.slip->outcome != Outcome::transported) {
    fail(metrics::FailureStage::contact_detection, std::string(to_string(m.slip->outcome)));
  } else if (m.fell) {
    fail(metrics::FailureStage::contact_detection, "object fell during transport");
  } else if (m.release->outcome != Outcome::released) {
    fail(metrics::FailureStage::contact_detection, "release: " + std::string(to_string(m.release->outcome)));
  }
  return finish();
}

inline void write_events_csv(std::ostream& out, const std::vector<EventRecord>& events) {
  out << "time_ms,phase,event,detail\n";
  for (const auto& e : events) out << e.time_ms << ',' << e.phase << ',' << e.event << ',' << e.detail << '\n';
}

inline void write_episode_outputs(const EpisodeResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create '" + dir.string() + "': " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::io, "cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("trace.csv");
    f << "phase,iteration,label_A,label_B,fused,gripper_step,event\n";
    for (const auto& t : r.trace) {
      f << t.phase << ',' << t.row.iteration << ',' << t.row.label_a << ',' << t.row.label_b << ',' << t.row.fused << ','
        << t.row.gripper_step << ',' << t.row.event << '\n';
    }
  }
  {
    auto f = open("events.csv");
    write_events_csv(f, r.events);
  }
  {
    auto f = open("summary.csv");
    f << "key,value\n";
    for (const auto& [k, v] : r.summary) f << k << ',' << v << '\n';
  }
  for (const auto& s : r.snapshots) pnm::save_pgm((dir / (s.name + ".pgm")).string(), s.image.image());
}

/// Runs scenarios concurrently; results keep the input order.
inline std::vector<EpisodeResult> run_batch(const std::vector<ScenarioConfig>& scenarios, const EpisodeOptions& opt = {},
                                            unsigned max_parallel = 0) {
  if (max_parallel == 0) max_parallel = std::max(1u, std::thread::hardware_concurrency());
  std::vector<EpisodeResult> out(scenarios.size());
  for (std::size_t begin = 0; begin < scenarios.size(); begin += max_parallel) {
    const std::size_t end = std::min(scenarios.size(), begin + max_parallel);
    std::vector<std::future<EpisodeResult>> jobs;
    for (std::size_t i = begin; i < end; ++i) {
      jobs.push_back(std::async(std::launch::async, [&, i] { return run_episode(scenarios[i], opt); }));
    }
    for (std::size_t i = begin; i < end; ++i) out[i] = jobs[i - begin].get();
  }
  return out;
}

}  // namespace vtgrasp::harness
