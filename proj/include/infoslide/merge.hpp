#pragma once

// Optional repair for text over-segmentation: joins vertically stacked text
// regions that share a style, are left-aligned and sit close together.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "infoslide/region_schema.hpp"

namespace infoslide {

namespace detail {

inline bool styles_compatible(const std::optional<StyleHints>& a, const std::optional<StyleHints>& b) {
  const StyleHints sa = a.value_or(StyleHints{});
  const StyleHints sb = b.value_or(StyleHints{});
  if (sa.font_family != sb.font_family) return false;
  if (sa.bold.value_or(false) != sb.bold.value_or(false)) return false;
  if (sa.font_size_pt.has_value() != sb.font_size_pt.has_value()) return false;
  if (sa.font_size_pt && std::abs(*sa.font_size_pt - *sb.font_size_pt) > 0.1 * std::max(*sa.font_size_pt, *sb.font_size_pt))
    return false;
  return true;
}

inline double line_height(const Region& r) {
  const auto lines = 1 + std::count(r.text->begin(), r.text->end(), '\n');
  return r.bbox.h / static_cast<double>(lines);
}

}  // namespace detail

/// Merges text region B into A when B sits directly below A with matching
/// style, left edges within 0.5x the median line height, and a vertical gap
/// under 0.5x that height. The merged region keeps A's id and order and the
/// union box; texts join with a line break. Repeats until nothing merges.
inline Layout merge_adjacent_text(Layout layout) {
  std::vector<double> heights;
  for (const auto& r : layout.regions)
    if (r.kind == RegionKind::text && r.text) heights.push_back(detail::line_height(r));
  if (heights.size() < 2) return layout;
  std::sort(heights.begin(), heights.end());
  const std::size_t n = heights.size();
  const double median = n % 2 ? heights[n / 2] : (heights[n / 2 - 1] + heights[n / 2]) / 2.0;
  const double tolerance = 0.5 * median;

  bool merged = true;
  while (merged) {
    merged = false;
    auto& regions = layout.regions;
    for (std::size_t i = 0; i < regions.size() && !merged; ++i) {
      for (std::size_t j = 0; j < regions.size() && !merged; ++j) {
        if (i == j) continue;
        Region& a = regions[i];
        const Region& b = regions[j];
        if (a.kind != RegionKind::text || b.kind != RegionKind::text || !a.text || !b.text) continue;
        const double gap = b.bbox.y - a.bbox.bottom();
        if (gap < 0 || gap >= tolerance) continue;
        if (std::abs(a.bbox.x - b.bbox.x) > tolerance) continue;
        if (!detail::styles_compatible(a.style, b.style)) continue;

        const double x0 = std::min(a.bbox.x, b.bbox.x);
        const double x1 = std::max(a.bbox.right(), b.bbox.right());
        a.bbox = {x0, a.bbox.y, x1 - x0, b.bbox.bottom() - a.bbox.y};
        a.text = *a.text + "\n" + *b.text;
        if (a.order && b.order) a.order = std::min(*a.order, *b.order);
        if (a.confidence && b.confidence) a.confidence = std::min(*a.confidence, *b.confidence);
        else a.confidence.reset();
        if (b.notes) a.notes = a.notes ? *a.notes + "; " + *b.notes : *b.notes;
        regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
    }
  }
  return layout;
}

}  // namespace infoslide
