#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace vtgrasp;

namespace {

std::vector<RgbImage> blob_sequence(int shift) {
  std::vector<RgbImage> frames;
  for (int i = 0; i < 4; ++i) {
    RgbImage img(kTactileWidth, kTactileHeight, Rgb8{90, 100, 110});
    const int x0 = 100 + (i == 3 ? shift : 0);
    for (int y = 150; y < 170; ++y)
      for (int x = x0; x < x0 + 20; ++x) img(x, y) = {200, 210, 220};
    frames.push_back(std::move(img));
  }
  return frames;
}

}  // namespace

TEST(Grayscale, MatchesRoundHalfUpReference) {
  for (int r = 0; r < 256; r += 3)
    for (int g = 0; g < 256; g += 5)
      for (int b = 0; b < 256; b += 7) {
        ASSERT_EQ(luma({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)}),
                  vt_test::luma_reference(r, g, b));
      }
  EXPECT_EQ(luma({255, 255, 255}), 255);
  EXPECT_EQ(luma({2, 0, 0}), 1);  // 0.598 rounds up
  EXPECT_EQ(luma({1, 0, 0}), 0);
}

TEST(Binarize, ThresholdIsInclusive) {
  GrayImage img(3, 1);
  img(0, 0) = 24;
  img(1, 0) = 25;
  img(2, 0) = 26;
  const auto b = binarize(img, 25);
  EXPECT_EQ(b(0, 0), 0);
  EXPECT_EQ(b(1, 0), 255);
  EXPECT_EQ(b(2, 0), 255);
}

TEST(StructuringElement, Validation) {
  EXPECT_THROW(StructuringElement::rectangle(4, 5), Error);
  EXPECT_THROW(StructuringElement(GrayImage(3, 3, 1), 3, 0), Error);
  EXPECT_THROW(StructuringElement(GrayImage(3, 3, 0), 1, 1), Error);
  EXPECT_TRUE(StructuringElement::square(5).is_full_rectangle());
  EXPECT_FALSE(StructuringElement::ellipse(5, 5).is_full_rectangle());
}

TEST(Morphology, ErodeAndDilateMatchDefinitions) {
  std::mt19937_64 rng(11);
  const std::vector<StructuringElement> elements = {
      StructuringElement::square(5), StructuringElement::rectangle(3, 7), StructuringElement::ellipse(5, 5),
      StructuringElement(GrayImage(3, 3, 1), 0, 2)};
  for (int trial = 0; trial < 40; ++trial) {
    const auto img = vt_test::random_binary(rng, 23, 19, 0.55);
    for (const auto& k : elements) {
      ASSERT_EQ(erode(img, k), vt_test::erode_naive(img, k));
      ASSERT_EQ(dilate(img, k), vt_test::dilate_naive(img, k));
    }
  }
}

TEST(Morphology, OpeningMatchesUnionOfFittingPlacements) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const auto img = vt_test::random_binary(rng, 31, 27, trial % 2 ? 0.7 : 0.85);
    for (const auto& k : {StructuringElement::square(5), StructuringElement::ellipse(5, 3)}) {
      ASSERT_EQ(morphological_open(img, k), vt_test::opening_by_placements(img, k));
    }
  }
}

TEST(Morphology, OpeningIsIdempotentAndAntiExtensive) {
  std::mt19937_64 rng(13);
  const auto k = StructuringElement::square(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto img = vt_test::random_binary(rng, 40, 30, 0.5 + 0.4 * (trial % 5) / 4.0);
    const auto once = morphological_open(img, k);
    ASSERT_EQ(morphological_open(once, k), once);
    for (std::size_t i = 0; i < img.size(); ++i) ASSERT_LE(once.pixels()[i], img.pixels()[i]);
  }
}

TEST(Morphology, RemovesFeaturesSmallerThanTheElement) {
  GrayImage img(20, 20);
  for (int y = 5; y < 9; ++y)
    for (int x = 5; x < 9; ++x) img(x, y) = 255;  // 4x4 blob
  EXPECT_EQ(vt_test::count_white(morphological_open(img, StructuringElement::square(5))), 0u);
  for (int y = 5; y < 10; ++y)
    for (int x = 5; x < 10; ++x) img(x, y) = 255;  // 5x5 survives
  EXPECT_EQ(vt_test::count_white(morphological_open(img, StructuringElement::square(5))), 25u);
}

TEST(FilterImage, MatchesReferencePipelineOnRandomFrames) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<RgbImage> imgs;
    const auto base = vt_test::random_rgb(rng, 48, 40);
    for (int i = 0; i < 4; ++i) imgs.push_back(base);
    // Large block change in the last frame plus speckle.
    std::uniform_int_distribution<int> pos(0, 30);
    const int bx = pos(rng), by = pos(rng) / 2;
    for (int y = by; y < by + 12; ++y)
      for (int x = bx; x < bx + 14; ++x) imgs[3](x, y) = {static_cast<std::uint8_t>(255 - imgs[3](x, y).r), 0, 0};
    imgs[3](1, 1) = {255, 255, 255};
    const auto frames = vt_test::frames_from(imgs);
    const auto psi = filter_image(std::span<const TactileFrame>(frames));
    ASSERT_EQ(psi.image(), vt_test::filter_reference(imgs, 25, 5));
    // Grayscale-sequence entry point agrees.
    EXPECT_EQ(filter_image(to_sequence(frames)).image(), psi.image());
  }
}

TEST(FilterImage, StaticSequenceIsAllBlack) {
  std::mt19937_64 rng(15);
  const auto img = vt_test::random_rgb(rng, kTactileWidth, kTactileHeight);
  const auto frames = vt_test::frames_from({img, img, img, img});
  const auto psi = filter_image(std::span<const TactileFrame>(frames));
  EXPECT_EQ(vt_test::count_white(psi.image()), 0u);
  EXPECT_EQ(brightness(psi), 0.0);
}

TEST(FilterImage, TranslatedBlobLeavesWhiteRegion) {
  const auto frames = vt_test::frames_from(blob_sequence(10));
  const auto psi = filter_image(std::span<const TactileFrame>(frames));
  EXPECT_GE(vt_test::count_white(psi.image()), 100u);
  EXPECT_GT(brightness(psi), 0.0);
}

TEST(FilterImage, OnlyFirstAndLastFramesMatter) {
  auto imgs = blob_sequence(0);
  imgs[1](5, 5) = {255, 255, 255};
  imgs[2] = RgbImage(kTactileWidth, kTactileHeight, Rgb8{0, 0, 0});
  const auto frames = vt_test::frames_from(imgs);
  EXPECT_EQ(brightness(filter_image(std::span<const TactileFrame>(frames))), 0.0);
}

TEST(FilterImage, StructuralErrors) {
  const auto imgs = blob_sequence(0);
  auto frames = vt_test::frames_from(imgs);
  const std::span<const TactileFrame> three(frames.data(), 3);
  EXPECT_THROW(filter_image(three), Error);
  frames[2].timestamp_ms = frames[1].timestamp_ms;
  EXPECT_THROW(filter_image(std::span<const TactileFrame>(frames)), Error);
  frames = vt_test::frames_from(imgs);
  frames[3].pixels = RgbImage(10, 10);
  EXPECT_THROW(filter_image(std::span<const TactileFrame>(frames)), Error);
  frames = vt_test::frames_from(imgs);
  frames[3].unit = SensorUnit::B;
  EXPECT_THROW(filter_image(std::span<const TactileFrame>(frames)), Error);
}

TEST(FilterImage, ConfigurableSequenceLength) {
  FilterConfig cfg;
  cfg.sequence_length = 2;
  const auto imgs = blob_sequence(10);
  const auto frames = vt_test::frames_from({imgs[0], imgs[3]});
  EXPECT_GT(brightness(filter_image(std::span<const TactileFrame>(frames), cfg)), 0.0);
  cfg.sequence_length = 1;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(FilteredImage, RejectsNonBinaryContent) {
  GrayImage img(2, 2);
  img(0, 0) = 17;
  EXPECT_THROW(FilteredImage{img}, Error);
}

TEST(Brightness, MeanOfPixelValues) {
  GrayImage img(4, 1);
  img(0, 0) = 255;
  img(1, 0) = 255;
  EXPECT_DOUBLE_EQ(brightness(img), 127.5);
  EXPECT_THROW(brightness(GrayImage{}), Error);
}
