// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "../test_support.hpp"

using namespace vtgrasp;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kAccuracyT15 = 0.911;
constexpr double kAccuracyT15Tol = 0.02;
constexpr double kFixtureBudgetS = 10.0;
constexpr double kMedianBudgetMs = 7.5;
constexpr std::size_t kTimingWindows = 1000;
constexpr double kApTol = 1e-12;
constexpr double kIsometryTol = 1e-9;
constexpr double kRoundTripTol = 1e-6;
constexpr double kCylinderTolMm = 2.0;
constexpr int kPropertyCases = 10000;
constexpr int kMorphologyImages = 1000;

struct Check {
  bool ok = true;
  std::string note;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) note = what;
    ok = ok && cond;
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Slip accuracy on the 3-object x 15-instability fixture.
Check criterion1(std::string& summary) {
  Check c;
  const auto t0 = Clock::now();
  const auto res = harness::experiment_slip_accuracy(harness::SlipFixture::standard(), 7, {10.0, 15.0});
  const double elapsed = seconds_since(t0);
  for (auto u : {SensorUnit::A, SensorUnit::B}) {
    const auto& t10 = res.row(u, 10.0);
    const auto& t15 = res.row(u, 15.0);
    const std::string unit(to_string(u));
    c.expect(t10.instabilities == 45, unit + ": fixture does not hold 45 instabilities");
    c.expect(t10.detected == 45, unit + ": T=10 detected " + std::to_string(t10.detected) + "/45");
    c.expect(t10.false_positives == 0, unit + ": T=10 false positives " + std::to_string(t10.false_positives));
    c.expect(std::abs(t15.accuracy() - kAccuracyT15) <= kAccuracyT15Tol,
             unit + ": T=15 accuracy " + fmt("%.3f", t15.accuracy()));
    summary += unit + " T10 " + std::to_string(t10.detected) + "/45 fp " + std::to_string(t10.false_positives) +
               ", T15 " + fmt("%.3f", t15.accuracy()) + "; ";
  }
  c.expect(elapsed < kFixtureBudgetS, "fixture took " + fmt("%.2f", elapsed) + " s");
  summary += "runtime " + fmt("%.2f", elapsed) + " s";
  return c;
}

// 2. filter_image + brightness median time over >= 1000 full-size windows.
Check criterion2(std::string& summary) {
  Check c;
  harness::SyntheticTactileStream stream(SensorUnit::A, {}, 3);
  harness::ContactAppearance held{true, stream.offset_for_depth(3)};
  harness::ContactAppearance moved = held;
  moved.pose.dy = 10.0;
  std::vector<double> times;
  std::int64_t ts = 0;
  double sink = 0.0;
  for (std::size_t w = 0; w < kTimingWindows; ++w) {
    std::vector<TactileFrame> win;
    for (int f = 0; f < 4; ++f) win.push_back(stream.render(w % 2 && f >= 2 ? moved : held, ts += 33));
    const auto t0 = Clock::now();
    sink += brightness(filter_image(std::span<const TactileFrame>(win)));
    times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  const double med = harness::median(times);
  c.expect(times.size() >= kTimingWindows, "too few windows");
  c.expect(med <= kMedianBudgetMs, "median " + fmt("%.3f", med) + " ms");
  c.expect(sink > 0.0, "timed windows produced no evidence");
  summary = "median " + fmt("%.3f", med) + " ms over " + std::to_string(times.size()) + " windows";
  return c;
}

// 3. Slip compensation on/off and determinism.
Check criterion3(std::string& summary) {
  Check c;
  const auto cfg = harness::water_object_scenario();
  const auto on = harness::experiment_slip_compensation(cfg, true);
  const auto off = harness::experiment_slip_compensation(cfg, false);
  c.expect(on.slip_events == 1, "compensation on: " + std::to_string(on.slip_events) + " slip events");
  c.expect(on.retained && !on.fell, "compensation on: object not retained");
  c.expect(off.fell, "compensation off: object did not fall");
  const auto on2 = harness::experiment_slip_compensation(cfg, true);
  const auto off2 = harness::experiment_slip_compensation(cfg, false);
  c.expect(on.events == on2.events && off.events == off2.events, "event logs differ between reruns");
  c.expect(on.final_step == on2.final_step && off.slip_events == off2.slip_events, "results differ between reruns");
  summary = "on: " + std::to_string(on.slip_events) + " event, retained " + std::to_string(on.retained) +
            "; off: " + std::to_string(off.slip_events) + " events, fell " + std::to_string(off.fell);
  return c;
}

// 4. Minimal stable contact counts per class.
Check criterion4(std::string& summary) {
  Check c;
  const std::vector<ObjectClass> classes(kObjectClasses.begin(), kObjectClasses.end());
  const auto res = harness::experiment_contact_sweep(harness::ScenarioConfig{}, classes, {1, 2, 3, 4, 5});
  const std::vector<std::pair<ObjectClass, int>> expected = {
      {ObjectClass::cardboard, 3}, {ObjectClass::plastic, 3}, {ObjectClass::metal, 3}, {ObjectClass::glass, 4}};
  for (const auto& [cls, n] : expected) {
    const int got = res.minimal_stable_count(cls);
    c.expect(got == n, std::string(to_string(cls)) + " minimal count " + std::to_string(got));
    summary += std::string(to_string(cls)) + "=" + std::to_string(got) + " ";
  }
  return c;
}

// 5. AP against an independent brute-force evaluation, and the fixture.
double brute_force_ap(const std::vector<metrics::RankedDetection>& dets, const std::vector<metrics::GroundTruth>& gts,
                      double thr) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dets[a].confidence > dets[b].confidence; });
  auto box_iou = [](const metrics::Box& a, const metrics::Box& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    return ix * iy / (a.w * a.h + b.w * b.h - ix * iy);
  };
  std::vector<bool> used(gts.size(), false), tp;
  for (auto i : order) {
    const auto& d = std::get<metrics::Box>(dets[i].region);
    double best = -1.0;
    std::size_t arg = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].image_id != dets[i].image_id) continue;
      const double v = box_iou(d, std::get<metrics::Box>(gts[g].region));
      if (v > best) best = v, arg = g;
    }
    const bool hit = arg < gts.size() && best >= thr;
    if (hit) used[arg] = true;
    tp.push_back(hit);
  }
  return vt_test::ap_envelope_oracle(tp, gts.size());
}

Check criterion5(std::string& summary) {
  Check c;
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> ndet(0, 10), ngt(1, 6), img(0, 2);
  std::uniform_real_distribution<double> pos(0.0, 40.0), size(5.0, 20.0), jitter(-6.0, 6.0), conf(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<metrics::GroundTruth> gts;
    const int g = ngt(rng);
    for (int i = 0; i < g; ++i) {
      gts.push_back({std::to_string(img(rng)), "c", metrics::Box{pos(rng), pos(rng), size(rng), size(rng)}});
    }
    std::vector<metrics::RankedDetection> dets;
    const int n = ndet(rng);
    for (int i = 0; i < n; ++i) {
      metrics::Box b{pos(rng), pos(rng), size(rng), size(rng)};
      std::string id = std::to_string(img(rng));
      if (conf(rng) < 0.6) {  // perturbed copy of a ground truth
        const auto& src = gts[static_cast<std::size_t>(trial + i) % gts.size()];
        const auto& sb = std::get<metrics::Box>(src.region);
        b = {sb.x + jitter(rng), sb.y + jitter(rng), sb.w, sb.h};
        id = src.image_id;
      }
      // Coarse confidences force ties.
      dets.push_back({id, "c", std::round(conf(rng) * 5.0) / 5.0, b});
    }
    for (double thr : {0.5, 0.75}) {
      const double got = metrics::average_precision(dets, gts, thr);
      worst = std::max(worst, std::abs(got - brute_force_ap(dets, gts, thr)));
    }
  }
  c.expect(worst <= kApTol, "max |AP - oracle| = " + fmt("%.3g", worst));
  std::ifstream din(vt_test::data_path("metrics/ap_fixture_dets.csv")), gin(vt_test::data_path("metrics/ap_fixture_gt.csv"));
  const auto dets = metrics::read_detections_csv(din, metrics::RegionMode::box);
  const auto gts = metrics::to_ground_truth(metrics::read_detections_csv(gin, metrics::RegionMode::box));
  const double fixture = metrics::average_precision(dets, gts, 0.5);
  c.expect(std::abs(fixture - 5.0 / 6.0) <= kApTol, "fixture AP " + fmt("%.12f", fixture));
  summary = "1000 instances max diff " + fmt("%.1e", worst) + ", fixture AP " + fmt("%.10f", fixture);
  return c;
}

// 6. CSR tables from recorded field tallies.
Check criterion6(std::string& summary) {
  Check c;
  std::ifstream in(vt_test::data_path("metrics/field_episodes.csv"));
  const auto eps = metrics::read_episodes_csv(in);
  auto r2 = [](double v) { return std::round(v * 100.0) / 100.0; };
  auto check_rows = [&](metrics::GroupBy by, const std::vector<std::pair<std::string, double>>& expect) {
    const auto rows = metrics::csr(eps, by, 1);
    for (const auto& [name, value] : expect) {
      bool found = false;
      for (const auto& r : rows) {
        if (r.group != name) continue;
        found = true;
        c.expect(r2(r.rate) == value, name + " CSR " + fmt("%.4f", r.rate));
        summary += name + " " + fmt("%.2f", r2(r.rate)) + " ";
      }
      c.expect(found, "missing group " + name);
    }
  };
  check_rows(metrics::GroupBy::environment, {{"tiled", 0.80}, {"stone_soil", 0.75}, {"grass", 0.85}});
  check_rows(metrics::GroupBy::object_class, {{"cardboard", 0.93}, {"plastic", 0.80}, {"metal", 0.87}, {"glass", 0.60}});
  const double overall = metrics::first_attempt_rate(eps);
  c.expect(overall == 0.80, "first-attempt rate " + fmt("%.4f", overall));
  summary += "overall " + fmt("%.2f", overall);
  return c;
}

// 7. Geometry invariants.
Check criterion7(std::string& summary) {
  using namespace geometry;
  Check c;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ux(0.0, 639.999), uy(0.0, 479.999), ud(1.0, 10000.0);
  const CameraIntrinsics k{615.0, 615.0, 320.0, 240.0, 640, 480};
  double iso = 0.0, rt = 0.0;
  for (int i = 0; i < kPropertyCases; ++i) {
    auto rot = [&] { return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix(); };
    const auto ee = RigidTransform::from_rotation_translation(rot(), Vec3(u(rng), u(rng), u(rng)));
    const auto he = RigidTransform::from_rotation_translation(rot(), Vec3(u(rng), u(rng), u(rng)) * 0.1);
    const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    const double d0 = (a - b).norm();
    const double d1 = (camera_to_base({a}, ee, he).xyz - camera_to_base({b}, ee, he).xyz).norm();
    iso = std::max(iso, std::abs(d1 - d0));
    const PixelDepth p{ux(rng), uy(rng), ud(rng)};
    const auto q = project(deproject(p, k), k);
    rt = std::max({rt, std::abs(q.x - p.x), std::abs(q.y - p.y), std::abs(q.depth_mm - p.depth_mm)});
  }
  c.expect(iso <= kIsometryTol, "isometry error " + fmt("%.3g", iso));
  c.expect(rt <= kRoundTripTol, "round-trip error " + fmt("%.3g", rt));

  std::vector<Vec3> cyl;
  for (int i = 0; i <= 60; ++i)
    for (int j = 0; j <= 60; ++j) {
      const double th = std::numbers::pi * j / 60.0;
      cyl.push_back(Vec3(-0.075 + 0.150 * i / 60.0, 0.030 * std::cos(th), 0.030 * std::sin(th)));
    }
  const double cyl_mm = compute_grasp(cyl).opening_required_mm;
  c.expect(std::abs(cyl_mm - 60.0) <= kCylinderTolMm, "cylinder opening " + fmt("%.2f", cyl_mm));

  std::vector<Vec3> box;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j) {
      const double a = -0.5 + i / 40.0, b = -0.5 + j / 40.0;
      box.push_back(Vec3(a * 0.2, b * 0.118, 0.05));
      box.push_back(Vec3(a * 0.2, -0.059, (b + 0.5) * 0.05));
      box.push_back(Vec3(a * 0.2, 0.059, (b + 0.5) * 0.05));
    }
  double box_mm = -1.0;
  try {
    box_mm = compute_grasp(box).opening_required_mm;
  } catch (const Error& e) {
    c.expect(false, std::string("118 mm box rejected: ") + e.what());
  }

  std::vector<Vec3> sphere;
  for (int i = 0; i <= 60; ++i)
    for (int j = 0; j < 120; ++j) {
      const double el = std::numbers::pi / 2 * i / 60.0, az = 2 * std::numbers::pi * j / 120.0;
      sphere.push_back(0.075 * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)));
    }
  bool rejected = false;
  try {
    compute_grasp(sphere);
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::object_too_wide;
  }
  c.expect(rejected, "150 mm sphere not rejected as too wide");
  summary = "isometry " + fmt("%.1e", iso) + ", round trip " + fmt("%.1e", rt) + ", cylinder " + fmt("%.2f", cyl_mm) +
            " mm, box " + fmt("%.1f", box_mm) + " mm, sphere rejected " + std::to_string(rejected);
  return c;
}

// 8. Morphology properties and static sequences.
Check criterion8(std::string& summary) {
  Check c;
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> density(0.3, 0.95);
  std::uniform_int_distribution<int> dim(8, 64);
  const auto k = StructuringElement::square(5);
  int violations = 0;
  for (int i = 0; i < kMorphologyImages; ++i) {
    const auto img = vt_test::random_binary(rng, dim(rng), dim(rng), density(rng));
    const auto once = morphological_open(img, k);
    if (!(morphological_open(once, k) == once)) ++violations;
    for (std::size_t p = 0; p < img.size(); ++p) {
      if (once.pixels()[p] > img.pixels()[p]) {
        ++violations;
        break;
      }
    }
  }
  c.expect(violations == 0, std::to_string(violations) + " property violations");
  int lit = 0;
  for (int s = 0; s < 50; ++s) {
    const auto frame = vt_test::random_rgb(rng, kTactileWidth, kTactileHeight);
    const auto frames = vt_test::frames_from({frame, frame, frame, frame});
    lit += vt_test::count_white(filter_image(std::span<const TactileFrame>(frames)).image()) != 0;
  }
  c.expect(lit == 0, std::to_string(lit) + " static sequences produced white pixels");
  summary = std::to_string(kMorphologyImages) + " images, 50 static sequences";
  return c;
}

// 9. Fusion truth tables, loop termination, reproducible traces.
Check criterion9(std::string& summary) {
  Check c;
  for (bool a : {false, true})
    for (bool b : {false, true}) {
      c.expect(fuse_contact({a, Task::contact}, {b, Task::contact}).value == (a && b), "contact fusion table");
      c.expect(fuse_slip({a, Task::slip}, {b, Task::slip}).value == (a || b), "slip fusion table");
    }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int scripts = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int max_steps = 1 + static_cast<int>(u(rng) * 255);
    const double p = u(rng);
    std::vector<double> sa, sb;
    const std::size_t len = 1 + static_cast<std::size_t>(u(rng) * 600);
    for (std::size_t i = 0; i < len; ++i) {
      sa.push_back(u(rng) < p ? u(rng) * 0.5 + 0.5 : u(rng) * 0.5);
      sb.push_back(u(rng) < p ? u(rng) * 0.5 + 0.5 : u(rng) * 0.5);
    }
    const int count = 1 + trial % 6;
    auto run = [&] {
      GripperState g(max_steps);
      ScriptedFrameSource fa(SensorUnit::A, sa.size()), fb(SensorUnit::B, sb.size());
      const auto pa = scripted_provider(SensorUnit::A, sa), pb = scripted_provider(SensorUnit::B, sb);
      return grasp_contact_loop(fa, fb, pa, pb, g, {}, ControllerConfig::for_gripper(g, count));
    };
    const auto r1 = run(), r2 = run();
    c.expect(r1.iterations <= max_steps + 16, "loop exceeded max_loop_iterations");
    c.expect(r1 == r2, "controller trace not reproducible");
    ++scripts;
  }
  auto cfg = harness::ScenarioConfig{};
  cfg.seed = 1234;
  const auto e1 = harness::run_episode(cfg), e2 = harness::run_episode(cfg);
  bool same = e1.trace.size() == e2.trace.size() && e1.events == e2.events && e1.summary == e2.summary;
  for (std::size_t i = 0; same && i < e1.trace.size(); ++i) same = e1.trace[i].row == e2.trace[i].row;
  c.expect(same, "episode trace not reproducible");
  summary = "fusion tables exhaustive, " + std::to_string(scripts) + " scripted streams, episode reproducible";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check(std::string&)>>> criteria = {
      {"slip-detection accuracy", criterion1}, {"filter timing budget", criterion2},
      {"slip compensation", criterion3},       {"contact-count gate", criterion4},
      {"AP oracle equivalence", criterion5},   {"CSR arithmetic", criterion6},
      {"geometry invariants", criterion7},     {"morphology properties", criterion8},
      {"controller tables and termination", criterion9}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string summary;
    Check c;
    try {
      c = criteria[i].second(summary);
    } catch (const std::exception& e) {
      c.ok = false;
      c.note = std::string("exception: ") + e.what();
    }
    failed += !c.ok;
    std::printf("[%s] criterion %zu: %s: %s%s%s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, summary.c_str(),
                c.ok ? "" : " | ", c.note.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
