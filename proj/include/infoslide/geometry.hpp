#pragma once

// Pixel-to-point mapping and typography calibration.

#include <algorithm>
#include <span>
#include <stdexcept>

#include "infoslide/region_schema.hpp"

namespace infoslide {

struct SlidePageSize {
  double width_pt = 720.0;
  double height_pt = 405.0;
};

struct FitTransform {
  double scale = 1.0;  // points per pixel
  double dx = 0.0;
  double dy = 0.0;
};

struct PointRect {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
};

/// Aspect-preserving fit of a W_I x H_I image into the page, centered on the
/// non-binding axis.
inline FitTransform compute_fit(double image_width, double image_height, const SlidePageSize& page) {
  if (!(image_width > 0) || !(image_height > 0) || !(page.width_pt > 0) || !(page.height_pt > 0))
    throw std::invalid_argument("compute_fit: image and page dimensions must be positive");
  FitTransform fit;
  fit.scale = std::min(page.width_pt / image_width, page.height_pt / image_height);
  fit.dx = (page.width_pt - fit.scale * image_width) / 2.0;
  fit.dy = (page.height_pt - fit.scale * image_height) / 2.0;
  return fit;
}

inline PointRect bbox_px_to_pt(const PixelBox& box, const FitTransform& fit) {
  return {fit.dx + fit.scale * box.x, fit.dy + fit.scale * box.y, fit.scale * box.w, fit.scale * box.h};
}

inline PixelBox bbox_pt_to_px(const PointRect& rect, const FitTransform& fit) {
  return {(rect.x - fit.dx) / fit.scale, (rect.y - fit.dy) / fit.scale, rect.w / fit.scale, rect.h / fit.scale};
}

/// Converts a backend font estimate (in image pixels' frame) to slide points.
inline double base_font_pt(double f_vlm, const FitTransform& fit) {
  if (!(f_vlm > 0)) throw std::invalid_argument("base_font_pt: font size must be positive");
  return f_vlm * fit.scale;
}

// Small text gets a linear boost that vanishes at 14 pt; 5.5 pt lands on 8 pt.
inline constexpr double kCalibrationKnee = 14.0;
inline constexpr double kCalibrationSlope = 0.294;

inline double calibrate_font(double f) { return f + std::max(0.0, (kCalibrationKnee - f) * kCalibrationSlope); }

/// Widens a text box by `ratio` without moving its left edge, stopping short
/// of the page margin and of any vertically overlapping region to its right.
/// Returns the adjusted width; never less than rect.w.
inline double expand_width(const PointRect& rect, double ratio, std::span<const PointRect> neighbors,
                           const SlidePageSize& page, double margin, double gap) {
  double right = rect.x + rect.w * ratio;
  right = std::min(right, page.width_pt - margin);
  for (const auto& n : neighbors) {
    bool overlaps_vertically = std::min(rect.bottom(), n.bottom()) - std::max(rect.y, n.y) > 0;
    if (overlaps_vertically && n.x > rect.x) right = std::min(right, n.x - gap);
  }
  return std::max(rect.w, right - rect.x);
}

}  // namespace infoslide
