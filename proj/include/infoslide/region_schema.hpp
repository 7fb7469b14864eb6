#pragma once

// Region files: the typed JSON description of an infographic's elements.
//
// parse_layout() is strict and reports every violation it finds.
// postprocess_layout() is repairing: it clamps, drops and reorders, and never
// fails. The extractor retry loop feeds parse errors back to the backend; the
// build path consumes postprocessed output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace infoslide {

using json = nlohmann::json;

struct PixelBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct StyleHints {
  std::optional<std::string> font_family;
  std::optional<double> font_size_pt;
  std::optional<bool> bold;

  friend bool operator==(const StyleHints&, const StyleHints&) = default;
};

enum class RegionKind { text, image };

inline std::string_view to_string(RegionKind kind) {
  return kind == RegionKind::text ? "text" : "image";
}

struct Region {
  std::string id;
  std::optional<int> order;
  RegionKind kind = RegionKind::text;
  PixelBox bbox;
  std::optional<std::string> text;
  std::optional<StyleHints> style;
  bool crop_from_infographic = false;
  std::optional<double> confidence;
  std::optional<std::string> notes;

  friend bool operator==(const Region&, const Region&) = default;
};

struct Layout {
  int image_width = 0;
  int image_height = 0;
  std::vector<Region> regions;

  friend bool operator==(const Layout&, const Layout&) = default;
};

struct ValidationError {
  std::optional<std::string> region_id;
  std::string field;
  std::string message;
};

struct ParseResult {
  std::optional<Layout> layout;
  std::vector<ValidationError> errors;
  std::vector<std::string> warnings;

  bool ok() const { return layout.has_value(); }
};

struct PostprocessResult {
  Layout layout;
  std::vector<std::string> warnings;
};

struct PostprocessOptions {
  double min_size_px = 1.0;
  double row_band_px = 10.0;
};

/// Thrown where a caller needs a valid layout and parsing failed.
class LayoutError : public std::runtime_error {
 public:
  explicit LayoutError(std::vector<ValidationError> errors)
      : std::runtime_error(summarize(errors)), errors_(std::move(errors)) {}

  const std::vector<ValidationError>& errors() const { return errors_; }

 private:
  static std::string summarize(const std::vector<ValidationError>& errors) {
    std::string out = "invalid layout";
    for (const auto& e : errors) {
      out += "; ";
      if (e.region_id) out += "region '" + *e.region_id + "' ";
      out += e.field + ": " + e.message;
    }
    return out;
  }

  std::vector<ValidationError> errors_;
};

namespace detail {

inline bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

inline std::string collapse_line(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool pending_space = false;
  for (char c : line) {
    if (is_blank(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// Echoes a JSON value in an error message; invalid UTF-8 is replaced.
inline std::string show(const json& v) { return v.dump(-1, ' ', false, json::error_handler_t::replace); }

// Keys the parser understands; anything else draws a warning.
inline const std::set<std::string>& known_top_level_keys() {
  static const std::set<std::string> keys{"image_px", "regions", "background_sample"};
  return keys;
}

inline const std::set<std::string>& known_region_keys() {
  static const std::set<std::string> keys{"id",    "order", "type", "bbox_px", "text",
                                          "style", "crop_from_infographic", "confidence", "notes"};
  return keys;
}

inline const std::set<std::string>& known_style_keys() {
  static const std::set<std::string> keys{"font_family", "font_size_pt", "bold"};
  return keys;
}

}  // namespace detail

/// Strips the ends, collapses runs of spaces/tabs to one space and trims each
/// line. Newlines survive as line breaks.
inline std::string normalize_text(std::string_view raw) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    auto nl = raw.find('\n', start);
    auto line = raw.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    lines.push_back(detail::collapse_line(line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  std::size_t first = 0;
  std::size_t last = lines.size();
  while (first < last && lines[first].empty()) ++first;
  while (last > first && lines[last - 1].empty()) --last;
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i != first) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

namespace detail {

class LayoutParser {
 public:
  ParseResult run(std::string_view text) {
    json doc;
    try {
      doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
      fail(std::nullopt, "json", std::string("malformed JSON: ") + e.what());
      return finish(std::nullopt);
    }
    if (!doc.is_object()) {
      fail(std::nullopt, "json", "top-level value must be an object with image_px and regions");
      return finish(std::nullopt);
    }
    for (const auto& [key, _] : doc.items()) {
      if (!known_top_level_keys().count(key)) result_.warnings.push_back("ignoring unknown top-level field '" + key + "'");
    }

    Layout layout;
    parse_image_px(doc, layout);

    auto regions = doc.find("regions");
    if (regions == doc.end()) {
      fail(std::nullopt, "regions", "required field is missing; expected an array of region objects");
    } else if (!regions->is_array()) {
      fail(std::nullopt, "regions", "must be an array of region objects");
    } else {
      std::set<std::string> seen;
      std::size_t index = 0;
      for (const auto& node : *regions) {
        if (auto region = parse_region(node, index++)) {
          if (!seen.insert(region->id).second) {
            fail(region->id, "id", "duplicate region id; ids must be unique within a layout");
            continue;
          }
          layout.regions.push_back(std::move(*region));
        }
      }
    }
    return finish(std::move(layout));
  }

 private:
  void fail(std::optional<std::string> region, std::string field, std::string message) {
    result_.errors.push_back({std::move(region), std::move(field), std::move(message)});
  }

  ParseResult finish(std::optional<Layout> layout) {
    if (result_.errors.empty()) result_.layout = std::move(layout);
    return std::move(result_);
  }

  void parse_image_px(const json& doc, Layout& layout) {
    auto it = doc.find("image_px");
    if (it == doc.end() || !it->is_object()) {
      fail(std::nullopt, "image_px", "required object {width, height} with positive integer pixel sizes");
      return;
    }
    auto dim = [&](const char* name, int& out) {
      auto d = it->find(name);
      if (d == it->end() || !d->is_number()) {
        fail(std::nullopt, std::string("image_px.") + name, "required positive integer");
        return;
      }
      double v = d->get<double>();
      if (!(v > 0) || v != std::floor(v) || v > 1e9) {
        fail(std::nullopt, std::string("image_px.") + name, "must be a positive integer, got " + show(*d));
        return;
      }
      out = static_cast<int>(v);
    };
    dim("width", layout.image_width);
    dim("height", layout.image_height);
  }

  std::optional<Region> parse_region(const json& node, std::size_t index) {
    const std::size_t errors_before = result_.errors.size();
    if (!node.is_object()) {
      fail(std::nullopt, "regions[" + std::to_string(index) + "]", "each region must be an object");
      return std::nullopt;
    }
    Region region;
    std::optional<std::string> label;

    auto id = node.find("id");
    if (id == node.end() || !id->is_string() || id->get<std::string>().empty()) {
      fail(std::nullopt, "id", "regions[" + std::to_string(index) + "] requires a non-empty string id");
    } else {
      region.id = id->get<std::string>();
      label = region.id;
    }
    if (!label) label = "regions[" + std::to_string(index) + "]";

    for (const auto& [key, _] : node.items()) {
      if (!known_region_keys().count(key)) result_.warnings.push_back("region '" + *label + "': ignoring unknown field '" + key + "'");
    }

    auto order = node.find("order");
    if (order == node.end() || order->is_null()) {
      fail(label, "order", "required integer reading-order hint is missing");
    } else if (!order->is_number_integer()) {
      fail(label, "order", "must be an integer, got " + show(*order));
    } else {
      region.order = order->get<int>();
    }

    auto type = node.find("type");
    if (type == node.end() || !type->is_string()) {
      fail(label, "type", "required; must be one of \"text\" or \"image\"");
    } else if (*type == "text") {
      region.kind = RegionKind::text;
    } else if (*type == "image") {
      region.kind = RegionKind::image;
    } else {
      fail(label, "type", "unknown type " + show(*type) + "; must be one of \"text\" or \"image\"");
    }

    parse_bbox(node, label, region);

    auto text = node.find("text");
    bool has_text = text != node.end() && !text->is_null();
    if (has_text && !text->is_string()) {
      fail(label, "text", "must be a string or null");
    } else if (has_text) {
      region.text = text->get<std::string>();
    }
    if (type != node.end() && *type == "text") {
      if (!has_text) {
        fail(label, "text", "required for type=text; must be non-empty after whitespace normalization");
      } else if (region.text && normalize_text(*region.text).empty()) {
        fail(label, "text", "must be non-empty after whitespace normalization");
      }
    } else if (type != node.end() && *type == "image" && region.text) {
      fail(label, "text", "must be null for type=image; image regions carry no text");
    }

    parse_style(node, label, region);

    auto crop = node.find("crop_from_infographic");
    if (crop != node.end() && !crop->is_null()) {
      if (!crop->is_boolean()) fail(label, "crop_from_infographic", "must be a boolean");
      else region.crop_from_infographic = crop->get<bool>();
    }

    auto confidence = node.find("confidence");
    if (confidence != node.end() && !confidence->is_null()) {
      if (!confidence->is_number()) {
        fail(label, "confidence", "must be a number in [0, 1]");
      } else {
        double c = confidence->get<double>();
        if (!(c >= 0.0 && c <= 1.0)) fail(label, "confidence", "must lie in [0, 1], got " + show(*confidence));
        else region.confidence = c;
      }
    }

    auto notes = node.find("notes");
    if (notes != node.end() && !notes->is_null()) {
      if (!notes->is_string()) fail(label, "notes", "must be a string or null");
      else region.notes = notes->get<std::string>();
    }

    if (result_.errors.size() != errors_before) return std::nullopt;
    return region;
  }

  void parse_bbox(const json& node, const std::optional<std::string>& label, Region& region) {
    auto bbox = node.find("bbox_px");
    if (bbox == node.end() || !bbox->is_object()) {
      fail(label, "bbox_px", "required object {x, y, w, h} in image pixel coordinates");
      return;
    }
    auto coord = [&](const char* name, double& out) {
      auto c = bbox->find(name);
      if (c == bbox->end() || !c->is_number()) {
        fail(label, std::string("bbox_px.") + name, "required number");
        return false;
      }
      out = c->get<double>();
      if (!std::isfinite(out)) {
        fail(label, std::string("bbox_px.") + name, "must be finite");
        return false;
      }
      return true;
    };
    coord("x", region.bbox.x);
    coord("y", region.bbox.y);
    if (coord("w", region.bbox.w) && !(region.bbox.w > 0)) fail(label, "bbox_px.w", "requires w > 0");
    if (coord("h", region.bbox.h) && !(region.bbox.h > 0)) fail(label, "bbox_px.h", "requires h > 0");
  }

  void parse_style(const json& node, const std::optional<std::string>& label, Region& region) {
    auto style = node.find("style");
    if (style == node.end() || style->is_null()) return;
    if (!style->is_object()) {
      fail(label, "style", "must be an object {font_family, font_size_pt, bold} or null");
      return;
    }
    for (const auto& [key, _] : style->items()) {
      if (!known_style_keys().count(key)) result_.warnings.push_back("region '" + *label + "': ignoring unknown style field '" + key + "'");
    }
    StyleHints hints;
    if (auto f = style->find("font_family"); f != style->end() && !f->is_null()) {
      if (!f->is_string()) fail(label, "style.font_family", "must be a string");
      else hints.font_family = f->get<std::string>();
    }
    if (auto f = style->find("font_size_pt"); f != style->end() && !f->is_null()) {
      if (!f->is_number() || !(f->get<double>() > 0)) fail(label, "style.font_size_pt", "must be a number > 0");
      else hints.font_size_pt = f->get<double>();
    }
    if (auto f = style->find("bold"); f != style->end() && !f->is_null()) {
      if (!f->is_boolean()) fail(label, "style.bold", "must be a boolean");
      else hints.bold = f->get<bool>();
    }
    region.style = hints;
  }

  ParseResult result_;
};

}  // namespace detail

/// Parses and validates a region file. On failure every detected violation is
/// returned, not just the first.
inline ParseResult parse_layout(std::string_view json_text) { return detail::LayoutParser{}.run(json_text); }

/// Like parse_layout() but throws LayoutError on failure.
inline Layout parse_layout_or_throw(std::string_view json_text) {
  auto result = parse_layout(json_text);
  if (!result.ok()) throw LayoutError(std::move(result.errors));
  return std::move(*result.layout);
}

inline json style_to_json(const StyleHints& s) {
  json out = json::object();
  out["font_family"] = s.font_family ? json(*s.font_family) : json(nullptr);
  out["font_size_pt"] = s.font_size_pt ? json(*s.font_size_pt) : json(nullptr);
  out["bold"] = s.bold ? json(*s.bold) : json(nullptr);
  return out;
}

inline json region_to_json(const Region& r) {
  json out = json::object();
  out["id"] = r.id;
  out["order"] = r.order ? json(*r.order) : json(nullptr);
  out["type"] = to_string(r.kind);
  out["bbox_px"] = {{"x", r.bbox.x}, {"y", r.bbox.y}, {"w", r.bbox.w}, {"h", r.bbox.h}};
  out["text"] = r.text ? json(*r.text) : json(nullptr);
  out["style"] = r.style ? style_to_json(*r.style) : json(nullptr);
  out["crop_from_infographic"] = r.crop_from_infographic;
  out["confidence"] = r.confidence ? json(*r.confidence) : json(nullptr);
  out["notes"] = r.notes ? json(*r.notes) : json(nullptr);
  return out;
}

inline json layout_to_json(const Layout& layout) {
  json out = json::object();
  out["image_px"] = {{"width", layout.image_width}, {"height", layout.image_height}};
  out["regions"] = json::array();
  for (const auto& r : layout.regions) out["regions"].push_back(region_to_json(r));
  return out;
}

inline std::string serialize_layout(const Layout& layout, int indent = 2) {
  return layout_to_json(layout).dump(indent, ' ', false, json::error_handler_t::replace);
}

namespace detail {

// Top-to-bottom by row band, then left-to-right; id breaks exact ties.
inline void assign_fallback_order(std::vector<Region>& regions, double row_band_px) {
  std::vector<std::size_t> by_y(regions.size());
  for (std::size_t i = 0; i < by_y.size(); ++i) by_y[i] = i;
  std::stable_sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = regions[a];
    const auto& rb = regions[b];
    if (ra.bbox.y != rb.bbox.y) return ra.bbox.y < rb.bbox.y;
    if (ra.bbox.x != rb.bbox.x) return ra.bbox.x < rb.bbox.x;
    return ra.id < rb.id;
  });
  std::vector<std::size_t> band(regions.size());
  std::size_t current = 0;
  double band_top = 0;
  for (std::size_t k = 0; k < by_y.size(); ++k) {
    double y = regions[by_y[k]].bbox.y;
    if (k == 0) {
      band_top = y;
    } else if (y - band_top >= row_band_px) {
      ++current;
      band_top = y;
    }
    band[by_y[k]] = current;
  }
  std::vector<std::size_t> sorted = by_y;
  std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
    if (band[a] != band[b]) return band[a] < band[b];
    const auto& ra = regions[a];
    const auto& rb = regions[b];
    if (ra.bbox.x != rb.bbox.x) return ra.bbox.x < rb.bbox.x;
    if (ra.bbox.y != rb.bbox.y) return ra.bbox.y < rb.bbox.y;
    return ra.id < rb.id;
  });
  for (std::size_t rank = 0; rank < sorted.size(); ++rank) regions[sorted[rank]].order = static_cast<int>(rank + 1);
}

}  // namespace detail

/// Normalizes text, clamps boxes to the image, drops regions below the
/// minimum size, and makes reading order total. Deterministic and idempotent.
inline PostprocessResult postprocess_layout(Layout layout, const PostprocessOptions& opts = {}) {
  PostprocessResult out;
  const double width = layout.image_width;
  const double height = layout.image_height;

  std::vector<Region> kept;
  kept.reserve(layout.regions.size());
  for (auto& r : layout.regions) {
    if (r.text) r.text = normalize_text(*r.text);
    auto& b = r.bbox;
    b.x = std::max(0.0, b.x);
    b.y = std::max(0.0, b.y);
    b.w = std::min(b.w, width - b.x);
    b.h = std::min(b.h, height - b.y);
    if (!(b.w >= opts.min_size_px) || !(b.h >= opts.min_size_px)) {
      out.warnings.push_back("dropping region '" + r.id + "': clamped box is below the minimum size");
      continue;
    }
    kept.push_back(std::move(r));
  }

  std::set<int> orders;
  bool needs_fallback = false;
  for (const auto& r : kept) {
    if (!r.order || !orders.insert(*r.order).second) {
      needs_fallback = true;
      break;
    }
  }
  if (needs_fallback) {
    out.warnings.push_back("region orders missing or duplicated; reassigning top-to-bottom, left-to-right");
    detail::assign_fallback_order(kept, opts.row_band_px);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Region& a, const Region& b) { return *a.order < *b.order; });

  layout.regions = std::move(kept);
  out.layout = std::move(layout);
  return out;
}

/// Formats validation errors as a numbered list to append to a retry prompt.
inline std::string error_feedback(const std::vector<ValidationError>& errors) {
  std::ostringstream out;
  out << "Your previous response did not satisfy the required JSON schema. Fix these problems:\n";
  int n = 1;
  for (const auto& e : errors) {
    out << n++ << ". ";
    if (e.region_id) out << "region \"" << *e.region_id << "\", ";
    out << "field \"" << e.field << "\": " << e.message << "\n";
  }
  out << "Expected schema: a single JSON object {\"image_px\": {\"width\": int, \"height\": int}, \"regions\": [...]}. "
         "Each region requires \"id\" (unique non-empty string), \"order\" (integer), \"type\" (\"text\" or \"image\"), "
         "\"bbox_px\" {\"x\", \"y\", \"w\", \"h\"} with w > 0 and h > 0 inside the image, "
         "\"text\" (non-empty string for text regions, null for image regions); optional \"style\" "
         "{\"font_family\", \"font_size_pt\", \"bold\"}, \"crop_from_infographic\" (boolean), "
         "\"confidence\" (0 to 1), \"notes\". Respond with JSON only.";
  return out.str();
}

}  // namespace infoslide
