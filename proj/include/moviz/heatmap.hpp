#pragma once

// Adaptive heat positions in [0,1] for metric values, and palette lookup.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moviz/error.hpp"

namespace moviz::heatmap {

enum class Method { Linear, Mean, Median, Histogram };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Linear: return "linear";
    case Method::Mean: return "mean";
    case Method::Median: return "median";
    case Method::Histogram: return "histogram";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "linear") return Method::Linear;
  if (s == "mean") return Method::Mean;
  if (s == "median") return Method::Median;
  if (s == "histogram") return Method::Histogram;
  return std::nullopt;
}

struct Rgb {
  double r = 0, g = 0, b = 0;

  /// Channels rounded half away from zero.
  std::array<std::uint8_t, 3> rounded() const {
    auto q = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    return {q(r), q(g), q(b)};
  }
  std::string hex() const {
    auto c = rounded();
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
  }
};

struct Stop {
  double position = 0;
  Rgb color;
};

using Palette = std::vector<Stop>;

/// Green -> yellow -> red.
inline Palette default_palette() {
  return {{0.0, {0, 128, 0}}, {0.5, {255, 255, 0}}, {1.0, {200, 0, 0}}};
}

/// Blue -> white -> orange, distinguishable under the common color-vision
/// deficiencies.
inline Palette colorblind_palette() {
  return {{0.0, {33, 102, 172}}, {0.5, {247, 247, 247}}, {1.0, {230, 97, 1}}};
}

/// Stops must be non-empty and sorted by position.
inline void check_palette(const Palette& p) {
  if (p.empty()) throw Error("palette needs at least one stop");
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].position < p[i - 1].position) throw Error("palette stops must be sorted by position");
  }
}

/// Piecewise-linear interpolation through the palette stops.
inline Rgb color(double position, const Palette& palette = default_palette()) {
  check_palette(palette);
  if (position <= palette.front().position) return palette.front().color;
  if (position >= palette.back().position) return palette.back().color;
  for (std::size_t i = 1; i < palette.size(); ++i) {
    const Stop& a = palette[i - 1];
    const Stop& b = palette[i];
    if (position <= b.position) {
      double span = b.position - a.position;
      double t = span > 0 ? (position - a.position) / span : 1.0;
      return {a.color.r + t * (b.color.r - a.color.r), a.color.g + t * (b.color.g - a.color.g),
              a.color.b + t * (b.color.b - a.color.b)};
    }
  }
  return palette.back().color;
}

class ColorScale {
 public:
  /// Fits a scale to non-negative observations.
  static ColorScale fit(std::span<const double> values, Method method) {
    if (values.empty()) throw Error("cannot fit a color scale to an empty value set");
    for (double v : values) {
      if (!std::isfinite(v) || v < 0) throw Error("color scale values must be finite and non-negative");
    }
    ColorScale s;
    s.method_ = method;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    s.min_ = sorted.front();
    s.max_ = sorted.back();
    switch (method) {
      case Method::Linear:
        break;
      case Method::Mean:
        s.center_ = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
        break;
      case Method::Median:
        s.center_ = sorted[(sorted.size() - 1) / 2];  // lower median
        break;
      case Method::Histogram:
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        s.buckets_ = std::move(sorted);
        break;
    }
    return s;
  }

  static ColorScale fit(const std::vector<double>& values, Method method) {
    return fit(std::span<const double>(values), method);
  }

  Method method() const { return method_; }
  double center() const { return center_; }
  const std::vector<double>& buckets() const { return buckets_; }
  std::size_t bucket_count() const { return buckets_.size(); }

  /// Scale interval: [0, 2c] for mean/median, [0, n] for histogram,
  /// [min, max] for linear.
  std::pair<double, double> interval() const {
    switch (method_) {
      case Method::Mean:
      case Method::Median: return {0.0, 2 * center_};
      case Method::Histogram: return {0.0, static_cast<double>(buckets_.size())};
      case Method::Linear: return {min_, max_};
    }
    return {0, 0};
  }

  double position(double v) const {
    switch (method_) {
      case Method::Mean:
      case Method::Median:
        if (center_ <= 0) return 0.0;
        return std::clamp(v, 0.0, 2 * center_) / (2 * center_);
      case Method::Histogram: {
        auto it = std::lower_bound(buckets_.begin(), buckets_.end(), v);
        if (it == buckets_.end() || *it != v) {
          throw Error("value " + std::to_string(v) + " was not observed when the histogram scale was fitted");
        }
        double i = static_cast<double>(it - buckets_.begin());
        return (i + 0.5) / static_cast<double>(buckets_.size());
      }
      case Method::Linear:
        if (max_ == min_) return 0.5;
        return std::clamp((v - min_) / (max_ - min_), 0.0, 1.0);
    }
    return 0.0;
  }

  /// Legend anchors: scale minimum, center, and maximum in value units.
  std::array<double, 3> legend() const {
    switch (method_) {
      case Method::Mean:
      case Method::Median: return {0.0, center_, 2 * center_};
      case Method::Histogram: return {buckets_.front(), buckets_[(buckets_.size() - 1) / 2], buckets_.back()};
      case Method::Linear: return {min_, (min_ + max_) / 2, max_};
    }
    return {0, 0, 0};
  }

 private:
  Method method_ = Method::Linear;
  double center_ = 0;
  double min_ = 0;
  double max_ = 0;
  std::vector<double> buckets_;
};

}  // namespace moviz::heatmap
