#pragma once

// Threshold classifiers for contact (single frame) and slip (frame window).
// Learned models are not bundled; they plug in through ScoreProvider.

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>


#include "vtgrasp/error.hpp"
#include "vtgrasp/tactile_image.hpp"
#include "vtgrasp/text.hpp"

namespace vtgrasp {

enum class Task { contact, slip };
enum class SlipMethod { brightness, cnn };

constexpr std::string_view to_string(Task t) { return t == Task::contact ? "contact" : "slip"; }
constexpr std::string_view to_string(SlipMethod m) { return m == SlipMethod::brightness ? "brightness" : "cnn"; }

inline SlipMethod parse_slip_method(std::string_view s) {
  if (s == "brightness") return SlipMethod::brightness;
  if (s == "cnn") return SlipMethod::cnn;
  throw Error(ErrorCode::parse, "unknown slip method '" + std::string(s) + "'");
}

/// 0 = no contact / stable, 1 = contact / slip.
struct Label {
  bool value = false;
  Task task = Task::contact;

  friend bool operator==(const Label&, const Label&) = default;
};

struct ClassifierConfig {
  double contact_threshold = 0.5;
  SlipMethod slip_method = SlipMethod::brightness;
  double slip_threshold_brightness = 10.0;
  double slip_threshold_cnn = 0.5;

  void validate() const {
    auto unit_range = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit_range(contact_threshold)) throw Error(ErrorCode::invalid_config, "contact threshold outside [0,1]");
    if (!unit_range(slip_threshold_cnn)) throw Error(ErrorCode::invalid_config, "cnn slip threshold outside [0,1]");
    if (!(slip_threshold_brightness >= 0.0 && slip_threshold_brightness <= 255.0)) {
      throw Error(ErrorCode::invalid_config, "brightness slip threshold outside [0,255]");
    }
  }
};

struct NormalizedRgb {
  double r = 0, g = 0, b = 0;
};
using NormalizedImage = Image<NormalizedRgb>;

/// Per-channel division by 255.
inline NormalizedImage normalize_input(const TactileFrame& frame) {
  NormalizedImage out(frame.pixels.width(), frame.pixels.height());
  std::transform(frame.pixels.pixels().begin(), frame.pixels.pixels().end(), out.pixels().begin(),
                 [](Rgb8 p) { return NormalizedRgb{p.r / 255.0, p.g / 255.0, p.b / 255.0}; });
  return out;
}

struct ScoreQuery {
  std::string_view image_id;
  std::variant<const NormalizedImage*, const FilteredImage*> image;
};

/// Opaque scoring function for one sensor unit and task. Implementations must be
/// deterministic per image and safe to call concurrently.
class ScoreProvider {
 public:
  ScoreProvider(SensorUnit unit, Task task) : unit_(unit), task_(task) {}
  virtual ~ScoreProvider() = default;

  SensorUnit unit() const noexcept { return unit_; }
  Task task() const noexcept { return task_; }

  double score(const ScoreQuery& query) const {
    const double s = compute(query);
    if (!(s >= 0.0 && s <= 1.0)) {
      throw Error(ErrorCode::provider_failure, "score outside [0,1] for '" + std::string(query.image_id) + "'");
    }
    return s;
  }

 private:
  virtual double compute(const ScoreQuery& query) const = 0;

  SensorUnit unit_;
  Task task_;
};

/// Logistic map of the mean absolute difference (0..255 scale) to a no-contact reference.
class SyntheticContactProvider final : public ScoreProvider {
 public:
  SyntheticContactProvider(const TactileFrame& reference, double gain = 0.5, double midpoint = 8.0)
      : ScoreProvider(reference.unit, Task::contact),
        reference_(normalize_input(reference)),
        gain_(gain),
        midpoint_(midpoint) {}

  double mean_abs_difference(const NormalizedImage& img) const {
    require_same_shape(img, reference_, "synthetic contact provider");
    auto a = img.pixels(), r = reference_.pixels();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sum += std::abs(a[i].r - r[i].r) + std::abs(a[i].g - r[i].g) + std::abs(a[i].b - r[i].b);
    }
    return 255.0 * sum / (3.0 * static_cast<double>(a.size()));
  }

  double logistic(double madiff) const { return 1.0 / (1.0 + std::exp(-gain_ * (madiff - midpoint_))); }

 private:
  double compute(const ScoreQuery& q) const override {
    const auto* const* img = std::get_if<const NormalizedImage*>(&q.image);
    if (!img || !*img) throw Error(ErrorCode::usage, "synthetic contact provider scores tactile frames only");
    return logistic(mean_abs_difference(**img));
  }

  NormalizedImage reference_;
  double gain_;
  double midpoint_;
};

inline SyntheticContactProvider synthetic_contact_provider(const TactileFrame& reference, double gain = 0.5,
                                                           double midpoint = 8.0) {
  return SyntheticContactProvider(reference, gain, midpoint);
}

/// Recorded scores keyed by image id.
class OracleProvider final : public ScoreProvider {
 public:
  OracleProvider(SensorUnit unit, Task task, std::map<std::string, double, std::less<>> table)
      : ScoreProvider(unit, task), table_(std::move(table)) {}

  /// Parses `image_id,score` CSV (header required).
  static OracleProvider from_csv(std::istream& in, SensorUnit unit, Task task) {
    std::map<std::string, double, std::less<>> table;
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "image_id,score") {
      throw Error(ErrorCode::parse, "score table: expected header 'image_id,score'");
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      const auto fields = text::split(text::trim(line), ',');
      if (fields.size() != 2 || fields[0].empty()) {
        throw Error(ErrorCode::parse, "score table line " + std::to_string(lineno) + ": expected 2 fields");
      }
      const double s = text::parse_double(fields[1], "score table score");
      if (!(s >= 0.0 && s <= 1.0)) {
        throw Error(ErrorCode::parse, "score table line " + std::to_string(lineno) + ": score outside [0,1]");
      }
      if (!table.emplace(std::string(fields[0]), s).second) {
        throw Error(ErrorCode::parse, "score table: duplicate id '" + std::string(fields[0]) + "'");
      }
    }
    return OracleProvider(unit, task, std::move(table));
  }

  std::size_t size() const noexcept { return table_.size(); }

 private:
  double compute(const ScoreQuery& q) const override {
    auto it = table_.find(q.image_id);
    if (it == table_.end()) {
      throw Error(ErrorCode::provider_failure, "no recorded score for '" + std::string(q.image_id) + "'");
    }
    return it->second;
  }

  std::map<std::string, double, std::less<>> table_;
};

/// Adapts any callable; used to hook external models.
class FunctionProvider final : public ScoreProvider {
 public:
  using Fn = std::function<double(const ScoreQuery&)>;
  FunctionProvider(SensorUnit unit, Task task, Fn fn) : ScoreProvider(unit, task), fn_(std::move(fn)) {}

 private:
  double compute(const ScoreQuery& q) const override { return fn_(q); }
  Fn fn_;
};

// --- classification --------------------------------------------------------

inline void require_provider(const ScoreProvider& p, SensorUnit unit, Task task) {
  if (p.task() != task) {
    throw Error(ErrorCode::invalid_config, "provider task is " + std::string(to_string(p.task())) + ", expected " +
                                               std::string(to_string(task)));
  }
  if (p.unit() != unit) {
    throw Error(ErrorCode::invalid_config, "provider unit " + std::string(to_string(p.unit())) +
                                               " does not match frame unit " + std::string(to_string(unit)));
  }
}

inline Label contact_classify(const TactileFrame& frame, const ScoreProvider& provider, const ClassifierConfig& cfg) {
  require_provider(provider, frame.unit, Task::contact);
  const NormalizedImage norm = normalize_input(frame);
  const std::string id = frame_id(frame);
  const double s = provider.score({id, &norm});
  return {s >= cfg.contact_threshold, Task::contact};
}

inline Label fuse_contact(Label a, Label b) {
  if (a.task != Task::contact || b.task != Task::contact) throw Error(ErrorCode::usage, "fuse_contact needs contact labels");
  return {a.value && b.value, Task::contact};
}

inline Label fuse_slip(Label a, Label b) {
  if (a.task != Task::slip || b.task != Task::slip) throw Error(ErrorCode::usage, "fuse_slip needs slip labels");
  return {a.value || b.value, Task::slip};
}

struct SlipEvaluation {
  Label label{false, Task::slip};
  double statistic = 0.0;  // brightness, or model score for the cnn method
  FilteredImage evidence;
};

inline Label slip_from_statistic(double statistic, SlipMethod method, const ClassifierConfig& cfg) {
  const double t = method == SlipMethod::brightness ? cfg.slip_threshold_brightness : cfg.slip_threshold_cnn;
  return {statistic >= t, Task::slip};
}

inline SlipEvaluation evaluate_slip_evidence(FilteredImage psi, std::string_view window_id, SensorUnit unit,
                                             SlipMethod method, const ScoreProvider* provider,
                                             const ClassifierConfig& cfg) {
  SlipEvaluation out;
  if (method == SlipMethod::brightness) {
    out.statistic = brightness(psi);
  } else {
    if (!provider) throw Error(ErrorCode::invalid_config, "cnn slip method requires a score provider");
    require_provider(*provider, unit, Task::slip);
    out.statistic = provider->score({window_id, &psi});
  }
  out.label = slip_from_statistic(out.statistic, method, cfg);
  out.evidence = std::move(psi);
  return out;
}

/// Window id is the id of its last frame.
inline SlipEvaluation evaluate_slip(std::span<const TactileFrame> window, SlipMethod method,
                                    const ScoreProvider* provider, const ClassifierConfig& cfg,
                                    const FilterConfig& filter = {}) {
  if (method == SlipMethod::cnn && !provider) {
    throw Error(ErrorCode::invalid_config, "cnn slip method requires a score provider");
  }
  FilteredImage psi = filter_image(window, filter);
  return evaluate_slip_evidence(std::move(psi), frame_id(window.back()), window.front().unit, method, provider, cfg);
}

inline SlipEvaluation evaluate_slip(const FrameSequence& seq, SlipMethod method, const ScoreProvider* provider,
                                    const ClassifierConfig& cfg, const FilterConfig& filter = {}) {
  if (method == SlipMethod::cnn && !provider) {
    throw Error(ErrorCode::invalid_config, "cnn slip method requires a score provider");
  }
  FilteredImage psi = filter_image(seq, filter);
  const std::string id = std::string(to_string(seq.unit)) + ":" + std::to_string(seq.timestamps_ms.back());
  return evaluate_slip_evidence(std::move(psi), id, seq.unit, method, provider, cfg);
}

inline Label slip_detect(std::span<const TactileFrame> window, SlipMethod method, const ScoreProvider* provider,
                         const ClassifierConfig& cfg, const FilterConfig& filter = {}) {
  return evaluate_slip(window, method, provider, cfg, filter).label;
}

inline Label slip_detect(const FrameSequence& seq, SlipMethod method, const ScoreProvider* provider,
                         const ClassifierConfig& cfg, const FilterConfig& filter = {}) {
  return evaluate_slip(seq, method, provider, cfg, filter).label;
}

}  // namespace vtgrasp
