#pragma once

// Detection and classification metrics: IoU, interpolated average precision,
// accuracy, confusion matrices, and collection success rates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "vtgrasp/error.hpp"
#include "vtgrasp/image.hpp"
#include "vtgrasp/object_class.hpp"
#include "vtgrasp/pnm.hpp"
#include "vtgrasp/text.hpp"

namespace vtgrasp::metrics {

// --- IoU -------------------------------------------------------------------

struct Box {
  double x = 0, y = 0, w = 0, h = 0;
};

struct Mask {
  GrayImage pixels;  // nonzero = object
};

using Region = std::variant<Box, Mask>;

inline double iou(const Box& a, const Box& b) {
  if (!(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0)) throw Error(ErrorCode::usage, "boxes need positive size");
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

inline double iou(const Mask& a, const Mask& b) {
  require_same_shape(a.pixels, b.pixels, "mask iou");
  std::size_t inter = 0, uni = 0;
  auto pa = a.pixels.pixels(), pb = b.pixels.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const bool x = pa[i] != 0, y = pb[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  if (uni == 0) throw Error(ErrorCode::usage, "masks must be nonempty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double iou(const Region& a, const Region& b) {
  if (a.index() != b.index()) throw Error(ErrorCode::usage, "iou between a box and a mask");
  if (const auto* ba = std::get_if<Box>(&a)) return iou(*ba, std::get<Box>(b));
  return iou(std::get<Mask>(a), std::get<Mask>(b));
}

// --- average precision -----------------------------------------------------

struct GroundTruth {
  std::string image_id;
  std::string cls;
  Region region;
};

struct RankedDetection {
  std::string image_id;
  std::string cls;
  double confidence = 0.0;
  Region region;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Detection indices by descending confidence; ties keep input order.
inline std::vector<std::size_t> rank_order(const std::vector<RankedDetection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  return order;
}

/// Greedy one-to-one matching in rank order: each detection takes the
/// highest-IoU unmatched ground truth of the same image and class, if that IoU
/// reaches the threshold. Returns a TP flag per ranked detection.
inline std::vector<bool> match_detections(const std::vector<RankedDetection>& dets, const std::vector<GroundTruth>& gts,
                                          double iou_threshold) {
  const auto order = rank_order(dets);
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> tp;
  tp.reserve(order.size());
  for (std::size_t idx : order) {
    const auto& d = dets[idx];
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].image_id != d.image_id || gts[g].cls != d.cls) continue;
      const double v = iou(d.region, gts[g].region);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    const bool hit = best_g < gts.size() && best >= iou_threshold;
    if (hit) used[best_g] = true;
    tp.push_back(hit);
  }
  return tp;
}

inline std::vector<PrPoint> pr_curve(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  std::vector<PrPoint> out;
  out.reserve(ranked_tp.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked_tp.size(); ++k) {
    tp += ranked_tp[k];
    out.push_back({static_cast<double>(tp) / static_cast<double>(num_gt),
                   static_cast<double>(tp) / static_cast<double>(k + 1)});
  }
  return out;
}

/// Sum over recall increments of the recall step times the best precision
/// achieved at that recall or beyond.
inline double interpolated_ap(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  if (num_gt == 0) throw Error(ErrorCode::undefined_metric, "average precision without ground truth");
  const auto pr = pr_curve(ranked_tp, num_gt);
  std::vector<double> envelope(pr.size());
  double best = 0.0;
  for (std::size_t k = pr.size(); k-- > 0;) {
    best = std::max(best, pr[k].precision);
    envelope[k] = best;
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < pr.size(); ++k) {
    if (!ranked_tp[k]) continue;
    ap += (pr[k].recall - prev_recall) * envelope[k];
    prev_recall = pr[k].recall;
  }
  return ap;
}

inline double average_precision(const std::vector<RankedDetection>& dets, const std::vector<GroundTruth>& gts,
                                 double iou_threshold) {
  if (gts.empty()) throw Error(ErrorCode::undefined_metric, "average precision without ground truth");
  return interpolated_ap(match_detections(dets, gts, iou_threshold), gts.size());
}

struct ApRow {
  std::string metric;  // e.g. AP50
  std::string cls;     // class name or "overall"
  double iou_threshold = 0.5;
  double ap = 0.0;
};

inline std::string ap_metric_name(double threshold) {
  return "AP" + std::to_string(static_cast<int>(std::lround(threshold * 100.0)));
}

/// AP per (class, threshold) over classes that have ground truth, then an
/// "overall" row per threshold holding the mean over those classes.
inline std::vector<ApRow> evaluate_detections(const std::vector<RankedDetection>& dets,
                                              const std::vector<GroundTruth>& gts,
                                              const std::vector<double>& thresholds) {
  if (gts.empty()) throw Error(ErrorCode::undefined_metric, "no ground truth rows");
  std::vector<std::string> classes;
  for (const auto& g : gts) {
    if (std::find(classes.begin(), classes.end(), g.cls) == classes.end()) classes.push_back(g.cls);
  }
  std::sort(classes.begin(), classes.end());
  std::vector<ApRow> rows;
  for (double t : thresholds) {
    double sum = 0.0;
    for (const auto& c : classes) {
      std::vector<RankedDetection> cd;
      std::vector<GroundTruth> cg;
      for (const auto& d : dets) if (d.cls == c) cd.push_back(d);
      for (const auto& g : gts) if (g.cls == c) cg.push_back(g);
      const double ap = average_precision(cd, cg, t);
      sum += ap;
      rows.push_back({ap_metric_name(t), c, t, ap});
    }
    rows.push_back({ap_metric_name(t), "overall", t, sum / static_cast<double>(classes.size())});
  }
  return rows;
}

enum class RegionMode { box, mask };

/// Reads `image_id,class,confidence,x,y,w,h[,mask_path]`. Mask paths are
/// resolved relative to `base_dir`. Confidence is kept for ground truth rows
/// but never used.
inline std::vector<RankedDetection> read_detections_csv(std::istream& in, RegionMode mode,
                                                        const std::filesystem::path& base_dir = {}) {
  const auto rows = text::read_csv(in, {"image_id", "class", "confidence", "x", "y", "w", "h"});
  std::vector<RankedDetection> out;
  for (const auto& r : rows) {
    if (r.size() < 7) throw Error(ErrorCode::parse, "detection row needs at least 7 fields");
    RankedDetection d;
    d.image_id = r[0];
    d.cls = r[1];
    d.confidence = r[2].empty() ? 0.0 : text::parse_double(r[2], "confidence");
    if (mode == RegionMode::box) {
      d.region = Box{text::parse_double(r[3], "x"), text::parse_double(r[4], "y"), text::parse_double(r[5], "w"),
                     text::parse_double(r[6], "h")};
    } else {
      if (r.size() < 8 || r[7].empty()) throw Error(ErrorCode::parse, "mask mode requires a mask_path column");
      d.region = Mask{pnm::load_pgm(base_dir / r[7])};
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<GroundTruth> to_ground_truth(const std::vector<RankedDetection>& rows) {
  std::vector<GroundTruth> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.image_id, r.cls, r.region});
  return out;
}

inline void write_ap_report(std::ostream& out, const std::vector<ApRow>& rows) {
  out << "metric,class,iou_threshold,ap\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.2f,%.10f", r.iou_threshold, r.ap);
    out << r.metric << ',' << r.cls << ',' << buf << '\n';
  }
}

// --- classification --------------------------------------------------------

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
};

inline double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(ErrorCode::undefined_metric, "accuracy of empty counts");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/// Binary counts from (truth, prediction) pairs, 1 = positive class.
inline ConfusionCounts count_binary(const std::vector<std::pair<bool, bool>>& pairs) {
  ConfusionCounts c;
  for (auto [truth, pred] : pairs) {
    if (truth && pred) ++c.tp;
    else if (!truth && !pred) ++c.tn;
    else if (pred) ++c.fp;
    else ++c.fn;
  }
  return c;
}

/// Rows are true labels, columns predicted labels.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t at(std::string_view truth, std::string_view predicted) const {
    return counts[index(truth)][index(predicted)];
  }

  std::size_t index(std::string_view cls) const {
    auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end()) throw Error(ErrorCode::usage, "unknown class '" + std::string(cls) + "'");
    return static_cast<std::size_t>(it - classes.begin());
  }

  std::size_t row_sum(std::size_t r) const { return std::accumulate(counts[r].begin(), counts[r].end(), std::size_t{0}); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_matrix(const std::vector<std::pair<std::string, std::string>>& pairs,
                                        std::vector<std::string> classes) {
  ConfusionMatrix m;
  m.classes = std::move(classes);
  m.counts.assign(m.classes.size(), std::vector<std::size_t>(m.classes.size(), 0));
  for (const auto& [truth, pred] : pairs) ++m.counts[m.index(truth)][m.index(pred)];
  return m;
}

inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m) {
  out << "true\\predicted";
  for (const auto& c : m.classes) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < m.classes.size(); ++r) {
    out << m.classes[r];
    for (auto v : m.counts[r]) out << ',' << v;
    out << '\n';
  }
}

// --- collection success rate -----------------------------------------------

enum class Environment { tiled, stone_soil, grass };
enum class FailureStage { none, rgbd_reconstruction, contact_detection, grasp_points, detection };

inline constexpr std::array<Environment, 3> kEnvironments = {Environment::tiled, Environment::stone_soil,
                                                             Environment::grass};
inline constexpr std::array<FailureStage, 4> kFailureModules = {
    FailureStage::rgbd_reconstruction, FailureStage::contact_detection, FailureStage::grasp_points,
    FailureStage::detection};

constexpr std::string_view to_string(Environment e) {
  switch (e) {
    case Environment::tiled: return "tiled";
    case Environment::stone_soil: return "stone_soil";
    case Environment::grass: return "grass";
  }
  return "unknown";
}

constexpr std::string_view to_string(FailureStage s) {
  switch (s) {
    case FailureStage::none: return "none";
    case FailureStage::rgbd_reconstruction: return "rgbd_reconstruction";
    case FailureStage::contact_detection: return "contact_detection";
    case FailureStage::grasp_points: return "grasp_points";
    case FailureStage::detection: return "detection";
  }
  return "unknown";
}

inline Environment parse_environment(std::string_view s) {
  for (auto e : kEnvironments) if (to_string(e) == s) return e;
  throw Error(ErrorCode::parse, "unknown environment '" + std::string(s) + "'");
}

inline FailureStage parse_failure_stage(std::string_view s) {
  if (s == "none") return FailureStage::none;
  for (auto m : kFailureModules) if (to_string(m) == s) return m;
  throw Error(ErrorCode::parse, "unknown failure stage '" + std::string(s) + "'");
}

struct EpisodeOutcome {
  Environment environment = Environment::tiled;
  ObjectClass object_class = ObjectClass::cardboard;
  int attempt = 1;
  bool success = true;
  FailureStage failure_stage = FailureStage::none;

  void validate() const {
    if (success != (failure_stage == FailureStage::none)) {
      throw Error(ErrorCode::usage, "failure stage must be none exactly when the episode succeeded");
    }
    if (attempt < 1) throw Error(ErrorCode::usage, "attempt index starts at 1");
  }
};

enum class GroupBy { environment, object_class, module };

struct CsrRow {
  std::string group;
  std::size_t successes = 0;
  std::size_t attempts = 0;
  double rate = 0.0;
};

/// Success rate per group over episodes whose attempt index matches
/// `attempt` (all attempts when unset). Empty groups are omitted. Module rows
/// count an episode as successful unless it failed at that module.
inline std::vector<CsrRow> csr(const std::vector<EpisodeOutcome>& outcomes, GroupBy group_by,
                               std::optional<int> attempt = std::nullopt) {
  std::vector<EpisodeOutcome> sel;
  for (const auto& o : outcomes) {
    o.validate();
    if (!attempt || o.attempt == *attempt) sel.push_back(o);
  }
  std::vector<CsrRow> rows;
  auto emit = [&rows](std::string name, std::size_t ok, std::size_t n) {
    if (n > 0) rows.push_back({std::move(name), ok, n, static_cast<double>(ok) / static_cast<double>(n)});
  };
  switch (group_by) {
    case GroupBy::environment:
      for (auto e : kEnvironments) {
        std::size_t ok = 0, n = 0;
        for (const auto& o : sel) if (o.environment == e) { ++n; ok += o.success; }
        emit(std::string(to_string(e)), ok, n);
      }
      break;
    case GroupBy::object_class:
      for (auto c : kObjectClasses) {
        std::size_t ok = 0, n = 0;
        for (const auto& o : sel) if (o.object_class == c) { ++n; ok += o.success; }
        emit(std::string(to_string(c)), ok, n);
      }
      break;
    case GroupBy::module:
      for (auto m : kFailureModules) {
        std::size_t failed = 0;
        for (const auto& o : sel) failed += o.failure_stage == m;
        emit(std::string(to_string(m)), sel.size() - failed, sel.size());
      }
      break;
  }
  return rows;
}

inline double first_attempt_rate(const std::vector<EpisodeOutcome>& outcomes) {
  std::size_t ok = 0, n = 0;
  for (const auto& o : outcomes) {
    o.validate();
    if (o.attempt != 1) continue;
    ++n;
    ok += o.success;
  }
  if (n == 0) throw Error(ErrorCode::undefined_metric, "no first-attempt episodes");
  return static_cast<double>(ok) / static_cast<double>(n);
}

/// Reads `environment,class,attempt,success,failure_stage`.
inline std::vector<EpisodeOutcome> read_episodes_csv(std::istream& in) {
  const auto rows = text::read_csv(in, {"environment", "class", "attempt", "success", "failure_stage"});
  std::vector<EpisodeOutcome> out;
  for (const auto& r : rows) {
    if (r.size() != 5) throw Error(ErrorCode::parse, "episode row needs 5 fields");
    EpisodeOutcome o;
    o.environment = parse_environment(r[0]);
    o.object_class = parse_object_class(r[1]);
    o.attempt = static_cast<int>(text::parse_int(r[2], "attempt"));
    if (r[3] != "0" && r[3] != "1") throw Error(ErrorCode::parse, "success must be 0 or 1");
    o.success = r[3] == "1";
    o.failure_stage = parse_failure_stage(r[4]);
    o.validate();
    out.push_back(o);
  }
  return out;
}

inline void write_episodes_csv(std::ostream& out, const std::vector<EpisodeOutcome>& outcomes) {
  out << "environment,class,attempt,success,failure_stage\n";
  for (const auto& o : outcomes) {
    out << to_string(o.environment) << ',' << to_string(o.object_class) << ',' << o.attempt << ','
        << (o.success ? 1 : 0) << ',' << to_string(o.failure_stage) << '\n';
  }
}

inline void write_csr_csv(std::ostream& out, const std::vector<CsrRow>& rows) {
  out << "group,successes,attempts,csr\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", r.rate);
    out << r.group << ',' << r.successes << ',' << r.attempts << ',' << buf << '\n';
  }
}

}  // namespace vtgrasp::metrics
