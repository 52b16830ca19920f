#include <gtest/gtest.h>

#include <random>

#include "moviz/heatmap.hpp"

using namespace moviz::heatmap;

namespace {
const std::vector<double> kSkewed{1, 1, 1, 97};
}

TEST(HeatmapFit, Mean) {
  auto s = ColorScale::fit(kSkewed, Method::Mean);
  EXPECT_DOUBLE_EQ(s.center(), 25.0);
  EXPECT_EQ(s.interval(), (std::pair<double, double>{0, 50}));
  EXPECT_DOUBLE_EQ(s.position(97), 1.0);
  EXPECT_DOUBLE_EQ(s.position(1), 0.02);
}

TEST(HeatmapFit, Median) {
  auto s = ColorScale::fit(kSkewed, Method::Median);
  EXPECT_DOUBLE_EQ(s.center(), 1.0);
  EXPECT_EQ(s.interval(), (std::pair<double, double>{0, 2}));
  EXPECT_DOUBLE_EQ(s.position(1), 0.5);
  EXPECT_DOUBLE_EQ(s.position(97), 1.0);
}

TEST(HeatmapFit, LowerMedianOnEvenCounts) {
  EXPECT_DOUBLE_EQ(ColorScale::fit({1, 3}, Method::Median).center(), 1.0);
  EXPECT_DOUBLE_EQ(ColorScale::fit({4, 1, 3, 2}, Method::Median).center(), 2.0);
}

TEST(HeatmapFit, Histogram) {
  auto s = ColorScale::fit(kSkewed, Method::Histogram);
  EXPECT_EQ(s.bucket_count(), 2u);
  EXPECT_EQ(s.buckets(), (std::vector<double>{1, 97}));
  EXPECT_DOUBLE_EQ(s.position(1), 0.25);
  EXPECT_DOUBLE_EQ(s.position(97), 0.75);
  EXPECT_THROW(s.position(50), moviz::Error);
}

TEST(HeatmapFit, Linear) {
  auto s = ColorScale::fit(kSkewed, Method::Linear);
  EXPECT_DOUBLE_EQ(s.position(1), 0.0);
  EXPECT_DOUBLE_EQ(s.position(97), 1.0);
  EXPECT_DOUBLE_EQ(s.position(49), 0.5);
  EXPECT_DOUBLE_EQ(ColorScale::fit({3, 3}, Method::Linear).position(3), 0.5);
}

TEST(HeatmapFit, DegenerateAndInvalid) {
  auto s = ColorScale::fit({0, 0, 0}, Method::Mean);
  EXPECT_DOUBLE_EQ(s.position(0), 0.0);
  EXPECT_THROW(ColorScale::fit(std::vector<double>{}, Method::Mean), moviz::Error);
  EXPECT_THROW(ColorScale::fit({1, -2}, Method::Mean), moviz::Error);
  EXPECT_THROW(ColorScale::fit({1, std::nan("")}, Method::Median), moviz::Error);
}

TEST(HeatmapFit, MeanIsOutlierSensitiveMedianIsNot) {
  std::vector<double> v{2, 3, 5, 8, 40};
  auto before_mean = ColorScale::fit(v, Method::Mean).center();
  auto before_median = ColorScale::fit(v, Method::Median).center();
  v.back() *= 10;
  EXPECT_NE(ColorScale::fit(v, Method::Mean).center(), before_mean);
  EXPECT_EQ(ColorScale::fit(v, Method::Median).center(), before_median);
}

TEST(HeatmapColor, Stops) {
  EXPECT_EQ(color(0.0).rounded(), (std::array<std::uint8_t, 3>{0, 128, 0}));
  EXPECT_EQ(color(0.5).rounded(), (std::array<std::uint8_t, 3>{255, 255, 0}));
  EXPECT_EQ(color(1.0).rounded(), (std::array<std::uint8_t, 3>{200, 0, 0}));
  Rgb q = color(0.25);
  EXPECT_DOUBLE_EQ(q.r, 127.5);
  EXPECT_DOUBLE_EQ(q.g, 191.5);
  EXPECT_EQ(q.rounded(), (std::array<std::uint8_t, 3>{128, 192, 0}));
  EXPECT_EQ(color(0.0).hex(), "#008000");
}

TEST(HeatmapColor, CustomPalette) {
  Palette p = colorblind_palette();
  EXPECT_EQ(color(0.0, p).rounded(), (std::array<std::uint8_t, 3>{33, 102, 172}));
  EXPECT_THROW(color(0.5, Palette{}), moviz::Error);
  EXPECT_THROW(color(0.5, Palette{{1.0, {}}, {0.0, {}}}), moviz::Error);
}

TEST(HeatmapProperty, MonotoneBoundedAndDistinct) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 1000; ++n) {
    std::size_t len = 1 + rng() % 40;
    std::vector<double> v;
    bool ints = rng() % 2;
    for (std::size_t i = 0; i < len; ++i) {
      double x = std::exponential_distribution<double>(0.01)(rng);
      v.push_back(ints ? std::floor(x) : x);
    }
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (Method m : {Method::Linear, Method::Mean, Method::Median, Method::Histogram}) {
      auto s = ColorScale::fit(v, m);
      double prev = -1;
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        double pos = s.position(sorted[i]);
        ASSERT_TRUE(std::isfinite(pos));
        ASSERT_GE(pos, 0.0);
        ASSERT_LE(pos, 1.0);
        ASSERT_GE(pos, prev);
        if (m == Method::Histogram && i > 0 && sorted[i] > sorted[i - 1]) {
          ASSERT_GT(pos, prev);
        }
        prev = pos;
      }
    }
  }
}
