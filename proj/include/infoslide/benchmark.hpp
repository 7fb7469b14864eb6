#pragma once

// Seeded ground-truth layouts from grid/panel templates, and a perturbation
// harness that derives synthetic predictions with known deviations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "infoslide/region_schema.hpp"

namespace infoslide {

namespace detail {

// Plain modulo keeps the sequence identical across standard libraries
// (std::uniform_int_distribution is implementation-defined).
inline int pick(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0); }

inline std::string words(std::mt19937_64& rng, int count) {
  static const char* kVocab[] = {"growth",  "customer", "retention", "social", "proof",   "urgency", "value",
                                 "trust",   "reviews",  "mobile",    "checkout", "conversion", "average", "order",
                                 "returns", "shipping", "loyalty",   "program", "insight", "data",    "trend",
                                 "market",  "share",    "increase",  "percent", "buyers",  "impulse", "scarcity",
                                 "offer",   "limited",  "time",      "brand",   "signals", "engagement", "rate",
                                 "cart",    "abandon",  "recover",   "email",   "campaign"};
  constexpr int n = static_cast<int>(sizeof kVocab / sizeof kVocab[0]);
  std::string out;
  for (int i = 0; i < count; ++i) {
    if (i) out.push_back(' ');
    out += kVocab[pick(rng, 0, n - 1)];
  }
  return out;
}

inline Region text_region(std::string id, PixelBox box, std::string text, double font, bool bold) {
  Region r;
  r.id = std::move(id);
  r.kind = RegionKind::text;
  r.bbox = box;
  r.text = std::move(text);
  r.style = StyleHints{std::string("Arial"), font, bold};
  r.confidence = 1.0;
  return r;
}

inline Region image_region(std::string id, PixelBox box) {
  Region r;
  r.id = std::move(id);
  r.kind = RegionKind::image;
  r.bbox = box;
  r.crop_from_infographic = true;
  r.confidence = 1.0;
  return r;
}

}  // namespace detail

struct TemplateOptions {
  int width = 1600;
  int height = 900;
  // Minimum spacing between any two elements.
  int gap_px = 40;
};

/// A 1600x900 title-plus-panels layout. Panels sit on a rows x cols grid;
/// each holds an image, a heading and a body paragraph. Every pair of
/// elements is separated by at least `gap_px` horizontally or 12 px
/// vertically, and no element touches the image border.
inline Layout generate_template_layout(std::uint64_t seed, const TemplateOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  Layout layout;
  layout.image_width = opt.width;
  layout.image_height = opt.height;

  const double margin = 60;
  const double content_w = opt.width - 2 * margin;
  layout.regions.push_back(detail::text_region("title", {margin, 40, content_w, 70},
                                               detail::words(rng, detail::pick(rng, 4, 8)), 44, true));

  const int rows = detail::pick(rng, 1, 2);
  const int cols = detail::pick(rng, 2, 4);
  const double top = 150;
  const double content_h = opt.height - top - 40;
  const double gap = opt.gap_px;
  const double pw = (content_w - (cols - 1) * gap) / cols;
  const double ph = (content_h - (rows - 1) * gap) / rows;

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::string tag = std::to_string(r + 1) + "_" + std::to_string(c + 1);
      const double px = margin + c * (pw + gap);
      const double py = top + r * (ph + gap);
      const double image_h = std::floor(ph * (0.40 + 0.15 * detail::unit(rng)));
      const double image_w = std::floor(pw * (0.6 + 0.4 * detail::unit(rng)));
      layout.regions.push_back(detail::image_region("image_" + tag, {px, py, image_w, image_h}));
      const double heading_y = py + image_h + 12;
      layout.regions.push_back(detail::text_region("heading_" + tag, {px, heading_y, pw, 36},
                                                   detail::words(rng, detail::pick(rng, 2, 4)), 22, true));
      const double body_y = heading_y + 36 + 12;
      const double body_h = py + ph - body_y;
      if (body_h >= 20)
        layout.regions.push_back(detail::text_region("body_" + tag, {px, body_y, pw, body_h},
                                                     detail::words(rng, detail::pick(rng, 8, 20)), 14, false));
    }
  }
  for (std::size_t i = 0; i < layout.regions.size(); ++i) layout.regions[i].order = static_cast<int>(i + 1);
  return layout;
}

struct PerturbOptions {
  double shift_x = 0;
  double shift_y = 0;
  double jitter_px = 0;       // uniform in [-jitter, +jitter] per coordinate
  double typo_rate = 0;       // per-character substitution probability
  double drop_rate = 0;       // per-region probability of omission
  std::uint64_t seed = 0;
};

/// Derives a synthetic prediction from a ground-truth layout. Boxes are not
/// clamped, so shifts show up exactly in the metrics.
inline Layout perturb_layout(const Layout& gt, const PerturbOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  Layout out;
  out.image_width = gt.image_width;
  out.image_height = gt.image_height;
  for (const auto& r : gt.regions) {
    if (opt.drop_rate > 0 && detail::unit(rng) < opt.drop_rate) continue;
    Region p = r;
    auto jitter = [&] { return opt.jitter_px > 0 ? (2 * detail::unit(rng) - 1) * opt.jitter_px : 0.0; };
    p.bbox.x += opt.shift_x + jitter();
    p.bbox.y += opt.shift_y + jitter();
    p.bbox.w = std::max(1.0, p.bbox.w + jitter());
    p.bbox.h = std::max(1.0, p.bbox.h + jitter());
    if (p.text && opt.typo_rate > 0) {
      for (auto& ch : *p.text)
        if (ch != ' ' && ch != '\n' && detail::unit(rng) < opt.typo_rate) ch = static_cast<char>('a' + detail::pick(rng, 0, 25));
    }
    out.regions.push_back(std::move(p));
  }
  return out;
}

}  // namespace infoslide
