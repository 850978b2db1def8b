#pragma once

// Scenario and calibration files. Both are JSON; every key is optional and
// falls back to the defaults below. Unknown keys are rejected so typos fail
// loudly.

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "vtgrasp/classifiers.hpp"
#include "vtgrasp/error.hpp"
#include "vtgrasp/geometry.hpp"
#include "vtgrasp/harness/stream.hpp"
#include "vtgrasp/metrics.hpp"
#include "vtgrasp/object_class.hpp"
#include "vtgrasp/tactile_image.hpp"

namespace vtgrasp::harness {

using nlohmann::json;

enum class Shape { box, cylinder };

inline std::string_view to_string(Shape s) { return s == Shape::box ? "box" : "cylinder"; }

inline Shape parse_shape(std::string_view s) {
  if (s == "box") return Shape::box;
  if (s == "cylinder") return Shape::cylinder;
  throw Error(ErrorCode::invalid_config, "unknown shape '" + std::string(s) + "'");
}

/// Object proxy. Slip is an abstract burst model: while lifted and gripped
/// less than `hold_depth_steps` past first touch, the object slips once every
/// `burst_period` control iterations; `fall_after` uncompensated bursts drop it.
struct ObjectSpec {
  ObjectClass cls = ObjectClass::cardboard;
  Shape shape = Shape::box;
  double width_mm = 60.0;   // across the closing axis
  double length_mm = 110.0;
  double height_mm = 45.0;
  int hold_depth_steps = 3;  // weight proxy
  int burst_period = 10;     // slip susceptibility, iterations between bursts
  int first_burst = 3;       // iterations after lift-off
  int fall_after = 3;
  int contact_stability = 1;  // settled frames per step of compression

  static ObjectSpec defaults(ObjectClass c) {
    ObjectSpec o;
    o.cls = c;
    switch (c) {
      case ObjectClass::cardboard: o.shape = Shape::box; o.width_mm = 60; o.length_mm = 110; o.height_mm = 45; break;
      case ObjectClass::plastic: o.shape = Shape::cylinder; o.width_mm = 65; o.length_mm = 150; o.height_mm = 65; break;
      case ObjectClass::metal: o.shape = Shape::cylinder; o.width_mm = 66; o.length_mm = 115; o.height_mm = 66; break;
      case ObjectClass::glass:
        o.shape = Shape::cylinder; o.width_mm = 70; o.length_mm = 130; o.height_mm = 70;
        o.hold_depth_steps = 4;
        break;
    }
    return o;
  }

  void validate() const {
    if (!(width_mm > 0 && length_mm > 0 && height_mm > 0)) throw Error(ErrorCode::invalid_config, "object dimensions must be positive");
    if (length_mm < width_mm) throw Error(ErrorCode::invalid_config, "width_mm is the closing dimension and must not exceed length_mm");
    if (hold_depth_steps < 0) throw Error(ErrorCode::invalid_config, "hold_depth_steps must be >= 0");
    if (burst_period < 1 || first_burst < 0) throw Error(ErrorCode::invalid_config, "burst timing must be positive");
    if (fall_after < 1) throw Error(ErrorCode::invalid_config, "fall_after must be >= 1");
    if (contact_stability < 1) throw Error(ErrorCode::invalid_config, "contact_stability must be >= 1");
  }
};

struct ControllerSettings {
  int contact_count_threshold = 3;
  int max_steps = 255;
  bool compensate = true;
  double pre_grasp_margin_mm = 20.0;
};

/// Control iterations spent in each timed segment of the waypoint script
/// (detect -> pre_position -> grasp -> lift -> transport -> container -> release).
struct WaypointScript {
  int lift_iterations = 45;
  int transport_iterations = 45;
};

/// Camera rig and robot calibration; also loadable on its own.
struct Calibration {
  geometry::CameraIntrinsics intrinsics{615.0, 615.0, 320.0, 240.0, 640, 480};
  geometry::HandEyeTransform hand_eye = default_hand_eye();
  geometry::EndEffectorPose detection_pose = default_detection_pose();
  geometry::Workspace workspace = geometry::Workspace::centered(0.5, 0.0);

  /// Camera 60 mm ahead of and 40 mm below the flange, optical axis along flange z.
  static geometry::HandEyeTransform default_hand_eye() {
    geometry::Mat3 r;
    r << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    return geometry::HandEyeTransform::from_rotation_translation(r, {0.06, 0.0, 0.04});
  }

  /// Flange pose that puts the camera 550 mm above (0.5, 0, 0) looking straight down.
  static geometry::EndEffectorPose default_detection_pose() {
    geometry::Mat3 r_bc;  // camera axes in the base frame
    r_bc << 0, 0, -1, 0, -1, 0, -1, 0, 0;
    const auto base_cam = geometry::RigidTransform::from_rotation_translation(r_bc, {0.5, 0.0, 0.55});
    const auto ee = base_cam * default_hand_eye().inverse();
    return geometry::RigidTransform::from_matrix(ee.matrix(), 1e-9);
  }

  geometry::RigidTransform camera_to_base() const { return detection_pose * hand_eye; }
};

enum class DetectionFault { none, empty_mask, misclassified };

inline DetectionFault parse_detection_fault(std::string_view s) {
  if (s == "none") return DetectionFault::none;
  if (s == "empty_mask") return DetectionFault::empty_mask;
  if (s == "misclassified") return DetectionFault::misclassified;
  throw Error(ErrorCode::invalid_config, "unknown detection fault '" + std::string(s) + "'");
}

inline std::string_view to_string(DetectionFault f) {
  switch (f) {
    case DetectionFault::none: return "none";
    case DetectionFault::empty_mask: return "empty_mask";
    case DetectionFault::misclassified: return "misclassified";
  }
  return "none";
}

struct FaultInjection {
  DetectionFault detection = DetectionFault::none;
  double invalid_depth_fraction = 0.0;  // share of object pixels with no depth return
};

struct ScenarioConfig {
  std::uint64_t seed = 7;
  int attempt = 1;
  metrics::Environment environment = metrics::Environment::tiled;
  ObjectSpec object = ObjectSpec::defaults(ObjectClass::cardboard);
  double object_x = 0.5;  // base frame, m
  double object_y = 0.0;
  double object_yaw_rad = 0.0;  // long axis relative to base x
  StreamCalibration sensor;
  FilterConfig filter;
  ClassifierConfig classifier;
  ControllerSettings controller;
  WaypointScript waypoints;
  Calibration calibration;
  FaultInjection faults;
  std::string mask_file;   // fixture overrides for the detection stage
  std::string depth_file;

  void validate() const {
    object.validate();
    if (attempt < 1) throw Error(ErrorCode::invalid_config, "attempt index starts at 1");
    filter.validate();
    classifier.validate();
    if (controller.contact_count_threshold < 1) throw Error(ErrorCode::invalid_config, "contact count threshold must be >= 1");
    if (controller.max_steps < 1) throw Error(ErrorCode::invalid_config, "max_steps must be >= 1");
    if (waypoints.lift_iterations < 1 || waypoints.transport_iterations < 0) {
      throw Error(ErrorCode::invalid_config, "waypoint iteration counts must be positive");
    }
    if (!(faults.invalid_depth_fraction >= 0.0 && faults.invalid_depth_fraction <= 1.0)) {
      throw Error(ErrorCode::invalid_config, "invalid_depth_fraction must lie in [0,1]");
    }
    if (sensor.noise_amplitude < 0 || sensor.noise_amplitude > 127) throw Error(ErrorCode::invalid_config, "noise amplitude out of range");
    if (sensor.texture_cell < 1) throw Error(ErrorCode::invalid_config, "texture_cell must be >= 1");
    calibration.intrinsics.validate();
  }
};

// --- JSON --------------------------------------------------------------------

namespace detail {

/// Reads `obj[key]` into `out` when present.
template <typename T>
void get_opt(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_config, std::string("key '") + key + "': " + e.what());
    }
  }
}

inline void require_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw Error(ErrorCode::invalid_config, "section '" + std::string(section) + "' must be an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [k, v] : obj.items()) {
    if (!ok.count(k)) throw Error(ErrorCode::invalid_config, "unknown key '" + k + "' in '" + std::string(section) + "'");
  }
}

inline geometry::Mat4 read_mat4(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::invalid_config, std::string(what) + " must be a 4x4 array");
  geometry::Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw Error(ErrorCode::invalid_config, std::string(what) + " must be a 4x4 array");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline json write_mat4(const geometry::Mat4& m) {
  json j = json::array();
  for (int r = 0; r < 4; ++r) j.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return j;
}

inline std::string get_string(const json& obj, const char* key, std::string fallback) {
  get_opt(obj, key, fallback);
  return fallback;
}

}  // namespace detail

inline Calibration calibration_from_json(const json& j) {
  detail::require_keys(j, "calibration", {"intrinsics", "hand_eye", "detection_pose", "workspace"});
  Calibration c;
  if (auto it = j.find("intrinsics"); it != j.end()) {
    detail::require_keys(*it, "intrinsics", {"fx", "fy", "cx", "cy", "width", "height"});
    auto& k = c.intrinsics;
    detail::get_opt(*it, "fx", k.fx);
    detail::get_opt(*it, "fy", k.fy);
    detail::get_opt(*it, "cx", k.cx);
    detail::get_opt(*it, "cy", k.cy);
    detail::get_opt(*it, "width", k.width);
    detail::get_opt(*it, "height", k.height);
  }
  if (auto it = j.find("hand_eye"); it != j.end()) {
    c.hand_eye = geometry::RigidTransform::from_matrix(detail::read_mat4(*it, "hand_eye"), 1e-6);
  }
  if (auto it = j.find("detection_pose"); it != j.end()) {
    c.detection_pose = geometry::RigidTransform::from_matrix(detail::read_mat4(*it, "detection_pose"), 1e-6);
  }
  if (auto it = j.find("workspace"); it != j.end()) {
    detail::require_keys(*it, "workspace", {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"});
    auto& w = c.workspace;
    detail::get_opt(*it, "x_min", w.x_min);
    detail::get_opt(*it, "x_max", w.x_max);
    detail::get_opt(*it, "y_min", w.y_min);
    detail::get_opt(*it, "y_max", w.y_max);
    detail::get_opt(*it, "z_min", w.z_min);
    detail::get_opt(*it, "z_max", w.z_max);
  }
  c.intrinsics.validate();
  return c;
}

inline json to_json(const Calibration& c) {
  const auto& k = c.intrinsics;
  const auto& w = c.workspace;
  return {{"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
          {"hand_eye", detail::write_mat4(c.hand_eye.matrix())},
          {"detection_pose", detail::write_mat4(c.detection_pose.matrix())},
          {"workspace",
           {{"x_min", w.x_min}, {"x_max", w.x_max}, {"y_min", w.y_min}, {"y_max", w.y_max}, {"z_min", w.z_min}, {"z_max", w.z_max}}}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, "'" + path + "': " + e.what());
  }
}

/// Relative fixture paths resolve against `base_dir`.
inline ScenarioConfig scenario_from_json(const json& j, const std::string& base_dir = {}) {
  detail::require_keys(j, "scenario", {"seed", "attempt", "environment", "object", "placement", "sensor", "filter", "classifier",
                                       "controller", "waypoints", "calibration", "calibration_file", "faults", "fixtures"});
  ScenarioConfig s;
  detail::get_opt(j, "seed", s.seed);
  detail::get_opt(j, "attempt", s.attempt);
  s.environment = metrics::parse_environment(detail::get_string(j, "environment", "tiled"));

  if (auto it = j.find("object"); it != j.end()) {
    const json& o = *it;
    detail::require_keys(o, "object", {"class", "shape", "width_mm", "length_mm", "height_mm", "hold_depth_steps",
                                       "burst_period", "first_burst", "fall_after", "contact_stability"});
    s.object = ObjectSpec::defaults(parse_object_class(detail::get_string(o, "class", "cardboard")));
    if (o.contains("shape")) s.object.shape = parse_shape(o["shape"].get<std::string>());
    detail::get_opt(o, "width_mm", s.object.width_mm);
    detail::get_opt(o, "length_mm", s.object.length_mm);
    detail::get_opt(o, "height_mm", s.object.height_mm);
    detail::get_opt(o, "hold_depth_steps", s.object.hold_depth_steps);
    detail::get_opt(o, "burst_period", s.object.burst_period);
    detail::get_opt(o, "first_burst", s.object.first_burst);
    detail::get_opt(o, "fall_after", s.object.fall_after);
    detail::get_opt(o, "contact_stability", s.object.contact_stability);
  }
  if (auto it = j.find("placement"); it != j.end()) {
    detail::require_keys(*it, "placement", {"x", "y", "yaw_rad"});
    detail::get_opt(*it, "x", s.object_x);
    detail::get_opt(*it, "y", s.object_y);
    detail::get_opt(*it, "yaw_rad", s.object_yaw_rad);
  }
  if (auto it = j.find("sensor"); it != j.end()) {
    detail::require_keys(*it, "sensor", {"noise_amplitude", "patch_semi_x", "patch_semi_y", "patch_offset", "depth_gain",
                                         "max_offset", "texture_amplitude", "texture_cell", "slip_translation_px",
                                         "transient_intensity", "noise_bank_size"});
    auto& c = s.sensor;
    detail::get_opt(*it, "noise_amplitude", c.noise_amplitude);
    detail::get_opt(*it, "patch_semi_x", c.patch_semi_x);
    detail::get_opt(*it, "patch_semi_y", c.patch_semi_y);
    detail::get_opt(*it, "patch_offset", c.patch_offset);
    detail::get_opt(*it, "depth_gain", c.depth_gain);
    detail::get_opt(*it, "max_offset", c.max_offset);
    detail::get_opt(*it, "texture_amplitude", c.texture_amplitude);
    detail::get_opt(*it, "texture_cell", c.texture_cell);
    detail::get_opt(*it, "slip_translation_px", c.slip_translation_px);
    detail::get_opt(*it, "transient_intensity", c.transient_intensity);
    detail::get_opt(*it, "noise_bank_size", c.noise_bank_size);
  }
  if (auto it = j.find("filter"); it != j.end()) {
    detail::require_keys(*it, "filter", {"binarize_threshold", "kernel_width", "kernel_height", "sequence_length"});
    detail::get_opt(*it, "binarize_threshold", s.filter.binarize_threshold);
    detail::get_opt(*it, "kernel_width", s.filter.kernel_width);
    detail::get_opt(*it, "kernel_height", s.filter.kernel_height);
    detail::get_opt(*it, "sequence_length", s.filter.sequence_length);
  }
  if (auto it = j.find("classifier"); it != j.end()) {
    detail::require_keys(*it, "classifier", {"contact_threshold", "slip_method", "slip_threshold_brightness", "slip_threshold_cnn"});
    detail::get_opt(*it, "contact_threshold", s.classifier.contact_threshold);
    if (it->contains("slip_method")) s.classifier.slip_method = parse_slip_method((*it)["slip_method"].get<std::string>());
    detail::get_opt(*it, "slip_threshold_brightness", s.classifier.slip_threshold_brightness);
    detail::get_opt(*it, "slip_threshold_cnn", s.classifier.slip_threshold_cnn);
  }
  if (auto it = j.find("controller"); it != j.end()) {
    detail::require_keys(*it, "controller", {"contact_count_threshold", "max_steps", "compensate", "pre_grasp_margin_mm"});
    detail::get_opt(*it, "contact_count_threshold", s.controller.contact_count_threshold);
    detail::get_opt(*it, "max_steps", s.controller.max_steps);
    detail::get_opt(*it, "compensate", s.controller.compensate);
    detail::get_opt(*it, "pre_grasp_margin_mm", s.controller.pre_grasp_margin_mm);
  }
  if (auto it = j.find("waypoints"); it != j.end()) {
    detail::require_keys(*it, "waypoints", {"lift_iterations", "transport_iterations"});
    detail::get_opt(*it, "lift_iterations", s.waypoints.lift_iterations);
    detail::get_opt(*it, "transport_iterations", s.waypoints.transport_iterations);
  }
  auto resolve = [&](std::string p) {
    if (p.empty() || base_dir.empty() || p.front() == '/') return p;
    return base_dir + "/" + p;
  };
  if (auto it = j.find("calibration_file"); it != j.end()) {
    s.calibration = calibration_from_json(read_json_file(resolve(it->get<std::string>())));
  }
  if (auto it = j.find("calibration"); it != j.end()) s.calibration = calibration_from_json(*it);
  if (auto it = j.find("faults"); it != j.end()) {
    detail::require_keys(*it, "faults", {"detection", "invalid_depth_fraction"});
    s.faults.detection = parse_detection_fault(detail::get_string(*it, "detection", "none"));
    detail::get_opt(*it, "invalid_depth_fraction", s.faults.invalid_depth_fraction);
  }
  if (auto it = j.find("fixtures"); it != j.end()) {
    detail::require_keys(*it, "fixtures", {"mask", "depth"});
    s.mask_file = resolve(detail::get_string(*it, "mask", ""));
    s.depth_file = resolve(detail::get_string(*it, "depth", ""));
    if (s.mask_file.empty() != s.depth_file.empty()) {
      throw Error(ErrorCode::invalid_config, "fixtures need both 'mask' and 'depth'");
    }
  }
  s.validate();
  return s;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return scenario_from_json(read_json_file(path), slash == std::string::npos ? std::string{} : path.substr(0, slash));
}

/// Effective configuration, echoed into run outputs.
inline json to_json(const ScenarioConfig& s) {
  const auto& o = s.object;
  const auto& c = s.sensor;
  json j = {
      {"seed", s.seed},
      {"attempt", s.attempt},
      {"environment", std::string(metrics::to_string(s.environment))},
      {"object",
       {{"class", std::string(to_string(o.cls))}, {"shape", std::string(to_string(o.shape))}, {"width_mm", o.width_mm},
        {"length_mm", o.length_mm}, {"height_mm", o.height_mm}, {"hold_depth_steps", o.hold_depth_steps},
        {"burst_period", o.burst_period}, {"first_burst", o.first_burst}, {"fall_after", o.fall_after},
        {"contact_stability", o.contact_stability}}},
      {"placement", {{"x", s.object_x}, {"y", s.object_y}, {"yaw_rad", s.object_yaw_rad}}},
      {"sensor",
       {{"noise_amplitude", c.noise_amplitude}, {"patch_semi_x", c.patch_semi_x}, {"patch_semi_y", c.patch_semi_y},
        {"patch_offset", c.patch_offset}, {"depth_gain", c.depth_gain}, {"max_offset", c.max_offset},
        {"texture_amplitude", c.texture_amplitude}, {"texture_cell", c.texture_cell},
        {"slip_translation_px", c.slip_translation_px}, {"transient_intensity", c.transient_intensity},
        {"noise_bank_size", c.noise_bank_size}}},
      {"filter",
       {{"binarize_threshold", s.filter.binarize_threshold}, {"kernel_width", s.filter.kernel_width},
        {"kernel_height", s.filter.kernel_height}, {"sequence_length", s.filter.sequence_length}}},
      {"classifier",
       {{"contact_threshold", s.classifier.contact_threshold},
        {"slip_method", std::string(to_string(s.classifier.slip_method))},
        {"slip_threshold_brightness", s.classifier.slip_threshold_brightness},
        {"slip_threshold_cnn", s.classifier.slip_threshold_cnn}}},
      {"controller",
       {{"contact_count_threshold", s.controller.contact_count_threshold}, {"max_steps", s.controller.max_steps},
        {"compensate", s.controller.compensate}, {"pre_grasp_margin_mm", s.controller.pre_grasp_margin_mm}}},
      {"waypoints",
       {{"lift_iterations", s.waypoints.lift_iterations}, {"transport_iterations", s.waypoints.transport_iterations}}},
      {"calibration", to_json(s.calibration)},
      {"faults",
       {{"detection", std::string(to_string(s.faults.detection))},
        {"invalid_depth_fraction", s.faults.invalid_depth_fraction}}},
  };
  if (!s.mask_file.empty()) j["fixtures"] = {{"mask", s.mask_file}, {"depth", s.depth_file}};
  return j;
}

}  // namespace vtgrasp::harness
