#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace vtgrasp;
using namespace vtgrasp::metrics;

namespace {

RankedDetection det(std::string img, double conf, Box b, std::string cls = "c") {
  return {std::move(img), std::move(cls), conf, b};
}

GroundTruth gt(std::string img, Box b, std::string cls = "c") { return {std::move(img), std::move(cls), b}; }

std::vector<EpisodeOutcome> field_episodes() {
  std::ifstream in(vt_test::data_path("metrics/field_episodes.csv"));
  return read_episodes_csv(in);
}

const CsrRow& row(const std::vector<CsrRow>& rows, std::string_view group) {
  for (const auto& r : rows) if (r.group == group) return r;
  throw std::runtime_error("missing group");
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

TEST(Iou, BoxesAndMasks) {
  EXPECT_DOUBLE_EQ(iou(Box{0, 0, 10, 10}, Box{0, 0, 10, 10}), 1.0);
  EXPECT_DOUBLE_EQ(iou(Box{0, 0, 10, 10}, Box{5, 0, 10, 10}), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou(Box{0, 0, 10, 10}, Box{20, 20, 5, 5}), 0.0);
  EXPECT_THROW(iou(Box{0, 0, 0, 10}, Box{0, 0, 1, 1}), Error);
  GrayImage a(4, 4), b(4, 4);
  a(0, 0) = a(1, 0) = 255;
  b(1, 0) = b(2, 0) = b(3, 0) = 1;
  EXPECT_DOUBLE_EQ(iou(Mask{a}, Mask{b}), 0.25);
  EXPECT_THROW(iou(Mask{GrayImage(4, 4)}, Mask{GrayImage(4, 4)}), Error);
  EXPECT_THROW(iou(Region{Box{0, 0, 1, 1}}, Region{Mask{a}}), Error);
}

TEST(Iou, SymmetricAndBounded) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 50.0), s(0.5, 30.0);
  for (int i = 0; i < 2000; ++i) {
    const Box a{u(rng), u(rng), s(rng), s(rng)}, b{u(rng), u(rng), s(rng), s(rng)};
    const double v = iou(a, b);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    ASSERT_DOUBLE_EQ(v, iou(b, a));
  }
}

TEST(Matching, GreedyOneToOneInRankOrder) {
  const std::vector<GroundTruth> gts = {gt("i", {0, 0, 10, 10}), gt("j", {0, 0, 10, 10})};
  const std::vector<RankedDetection> dets = {
      det("i", 0.5, {0, 0, 10, 10}),   // duplicate of a matched gt -> FP
      det("i", 0.9, {1, 0, 10, 10}),   // matched first
      det("j", 0.7, {0, 0, 10, 10}, "other"),  // class mismatch
      det("j", 0.6, {30, 30, 10, 10}),  // no overlap
  };
  EXPECT_EQ(match_detections(dets, gts, 0.5), (std::vector<bool>{true, false, false, false}));
}

TEST(Matching, TiesKeepInputOrder) {
  const std::vector<RankedDetection> dets = {det("i", 0.5, {0, 0, 1, 1}), det("i", 0.5, {0, 0, 2, 2}),
                                             det("i", 0.9, {0, 0, 3, 3})};
  EXPECT_EQ(rank_order(dets), (std::vector<std::size_t>{2, 0, 1}));
}

TEST(AveragePrecision, MatchesEnvelopeOracleOnRandomRankings) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> len(0, 40), extra(0, 10);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<bool> tp(static_cast<std::size_t>(len(rng)));
    std::size_t hits = 0;
    for (std::size_t k = 0; k < tp.size(); ++k) hits += (tp[k] = coin(rng));
    const std::size_t num_gt = std::max<std::size_t>(1, hits + static_cast<std::size_t>(extra(rng)));
    ASSERT_NEAR(interpolated_ap(tp, num_gt), vt_test::ap_envelope_oracle(tp, num_gt), 1e-12);
  }
}

TEST(AveragePrecision, EdgeCases) {
  EXPECT_DOUBLE_EQ(interpolated_ap({true, true}, 2), 1.0);
  EXPECT_DOUBLE_EQ(interpolated_ap({false, false}, 2), 0.0);
  EXPECT_DOUBLE_EQ(interpolated_ap({}, 3), 0.0);
  EXPECT_DOUBLE_EQ(interpolated_ap({true}, 4), 0.25);
  try {
    interpolated_ap({true}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::undefined_metric);
  }
}

TEST(AveragePrecision, FixtureIsFiveSixths) {
  std::ifstream dets_in(vt_test::data_path("metrics/ap_fixture_dets.csv"));
  std::ifstream gt_in(vt_test::data_path("metrics/ap_fixture_gt.csv"));
  const auto dets = read_detections_csv(dets_in, RegionMode::box);
  const auto gts = to_ground_truth(read_detections_csv(gt_in, RegionMode::box));
  EXPECT_NEAR(average_precision(dets, gts, 0.5), 5.0 / 6.0, 1e-12);
  const auto rows = evaluate_detections(dets, gts, {0.5, 0.95});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].cls, "overall");
  EXPECT_EQ(rows[1].metric, "AP50");
  EXPECT_EQ(rows[3].metric, "AP95");
  EXPECT_NEAR(rows[3].ap, 0.5, 1e-12);  // only the exact box survives 0.95
  std::ostringstream out;
  write_ap_report(out, rows);
  EXPECT_NE(out.str().find("AP50,overall,0.50,0.8333333333"), std::string::npos);
}

TEST(AveragePrecision, OverallIsTheMeanOverClasses) {
  const std::vector<GroundTruth> gts = {gt("i", {0, 0, 10, 10}, "a"), gt("i", {0, 0, 10, 10}, "b")};
  const std::vector<RankedDetection> dets = {det("i", 0.9, {0, 0, 10, 10}, "a")};
  const auto rows = evaluate_detections(dets, gts, {0.5});
  EXPECT_DOUBLE_EQ(rows.back().ap, 0.5);
}

TEST(Accuracy, BinaryCountsAndConfusion) {
  const auto c = count_binary({{true, true}, {true, false}, {false, false}, {false, true}, {true, true}});
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.tn, 1u);
  EXPECT_DOUBLE_EQ(accuracy(c), 0.6);
  EXPECT_THROW(accuracy(ConfusionCounts{}), Error);
  const auto m = confusion_matrix({{"glass", "glass"}, {"glass", "plastic"}, {"metal", "metal"}},
                                  {"plastic", "glass", "metal"});
  EXPECT_EQ(m.at("glass", "plastic"), 1u);
  EXPECT_EQ(m.row_sum(m.index("glass")), 2u);
  EXPECT_THROW(confusion_matrix({{"wood", "glass"}}, {"glass"}), Error);
  std::ostringstream out;
  write_confusion_csv(out, m);
  EXPECT_EQ(out.str(), "true\\predicted,plastic,glass,metal\nplastic,0,0,0\nglass,1,1,0\nmetal,0,0,1\n");
}

TEST(Csr, FieldTalliesPerEnvironment) {
  const auto rows = csr(field_episodes(), GroupBy::environment, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(round2(row(rows, "tiled").rate), 0.80);
  EXPECT_DOUBLE_EQ(round2(row(rows, "stone_soil").rate), 0.75);
  EXPECT_DOUBLE_EQ(round2(row(rows, "grass").rate), 0.85);
}

TEST(Csr, FieldTalliesPerClass) {
  const auto rows = csr(field_episodes(), GroupBy::object_class, 1);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(row(rows, "cardboard").successes, 14u);
  EXPECT_EQ(row(rows, "plastic").successes, 12u);
  EXPECT_EQ(row(rows, "metal").successes, 13u);
  EXPECT_EQ(row(rows, "glass").successes, 9u);
  EXPECT_DOUBLE_EQ(round2(row(rows, "cardboard").rate), 0.93);
  EXPECT_DOUBLE_EQ(round2(row(rows, "plastic").rate), 0.80);
  EXPECT_DOUBLE_EQ(round2(row(rows, "metal").rate), 0.87);
  EXPECT_DOUBLE_EQ(round2(row(rows, "glass").rate), 0.60);
  EXPECT_DOUBLE_EQ(first_attempt_rate(field_episodes()), 0.80);
}

TEST(Csr, ModuleRowsCountOnlyThatModulesFailures) {
  const auto eps = field_episodes();
  const auto rows = csr(eps, GroupBy::module, 1);
  ASSERT_EQ(rows.size(), 4u);
  std::size_t failures = 0;
  for (const auto& r : rows) {
    EXPECT_EQ(r.attempts, eps.size());
    EXPECT_GE(r.rate, first_attempt_rate(eps));
    failures += r.attempts - r.successes;
  }
  EXPECT_EQ(failures, 12u);
}

TEST(Csr, AttemptFilterAndValidation) {
  std::vector<EpisodeOutcome> eps = {{Environment::grass, ObjectClass::glass, 1, false, FailureStage::detection},
                                     {Environment::grass, ObjectClass::glass, 2, true, FailureStage::none}};
  EXPECT_DOUBLE_EQ(csr(eps, GroupBy::environment, 1)[0].rate, 0.0);
  EXPECT_DOUBLE_EQ(csr(eps, GroupBy::environment, 2)[0].rate, 1.0);
  EXPECT_DOUBLE_EQ(csr(eps, GroupBy::environment)[0].rate, 0.5);
  EXPECT_TRUE(csr(eps, GroupBy::environment, 3).empty());
  eps[0].failure_stage = FailureStage::none;
  EXPECT_THROW(csr(eps, GroupBy::environment), Error);
}

TEST(Csr, CsvRoundTrip) {
  const auto eps = field_episodes();
  std::stringstream ss;
  write_episodes_csv(ss, eps);
  const auto back = read_episodes_csv(ss);
  ASSERT_EQ(back.size(), eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    EXPECT_EQ(back[i].environment, eps[i].environment);
    EXPECT_EQ(back[i].failure_stage, eps[i].failure_stage);
  }
  std::stringstream bad("environment,class,attempt,success,failure_stage\ntiled,wood,1,1,none\n");
  EXPECT_THROW(read_episodes_csv(bad), Error);
}
