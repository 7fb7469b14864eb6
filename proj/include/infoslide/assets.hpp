#pragma once

// Raster assets: padded crops, content-addressed storage with upload dedup,
// synthesized backgrounds and debug overlays.

#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "infoslide/raster.hpp"
#include "infoslide/region_schema.hpp"
#include "infoslide/util.hpp"

namespace infoslide {

inline constexpr int kDefaultCropPadPx = 10;

/// Integer pixel span of a crop: [x0, x1) x [y0, y1).
struct CropSpan {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  friend bool operator==(const CropSpan&, const CropSpan&) = default;
};

/// Pads right and bottom by `pad_px`, clamped to the image; the top-left
/// corner stays put. Fractional coordinates round outward.
inline CropSpan crop_span(const PixelBox& box, int image_width, int image_height, int pad_px = kDefaultCropPadPx) {
  CropSpan span;
  span.x0 = std::clamp(static_cast<int>(std::floor(box.x)), 0, image_width);
  span.y0 = std::clamp(static_cast<int>(std::floor(box.y)), 0, image_height);
  span.x1 = static_cast<int>(std::ceil(std::min(box.x + box.w + pad_px, static_cast<double>(image_width))));
  span.y1 = static_cast<int>(std::ceil(std::min(box.y + box.h + pad_px, static_cast<double>(image_height))));
  if (span.x1 <= span.x0 || span.y1 <= span.y0) throw std::invalid_argument("crop_region: degenerate crop");
  return span;
}

inline Raster crop_raster(const Raster& image, const CropSpan& span) {
  Raster out(span.width(), span.height());
  for (int y = 0; y < span.height(); ++y)
    for (int x = 0; x < span.width(); ++x) out.set(x, y, image.at(span.x0 + x, span.y0 + y));
  return out;
}

inline Raster crop_region(const Raster& image, const PixelBox& box, int pad_px = kDefaultCropPadPx) {
  return crop_raster(image, crop_span(box, image.width(), image.height(), pad_px));
}

inline Bytes crop_region_png(const Raster& image, const PixelBox& box, int pad_px = kDefaultCropPadPx) {
  return encode_png(crop_region(image, box, pad_px));
}

inline constexpr std::size_t kContentNameStemChars = 32;

/// First 32 hex chars of SHA-256 plus ".png".
inline std::string content_name(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw std::invalid_argument("content_name: empty input");
  return sha256_hex(bytes).substr(0, kContentNameStemChars) + ".png";
}

struct AssetRef {
  std::string content_name;
  std::optional<std::string> url;
  std::size_t byte_length = 0;
};

class UploadError : public std::runtime_error {
 public:
  UploadError(const std::string& what, bool retryable) : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

/// Publishes an asset and returns its public https URL.
class Uploader {
 public:
  virtual ~Uploader() = default;
  virtual std::string upload(const std::string& content_name, std::span<const std::uint8_t> bytes) = 0;
};

/// Copies assets into a directory served at `public_base_url`.
class FilesystemUploader : public Uploader {
 public:
  FilesystemUploader(std::filesystem::path serve_dir, std::string public_base_url)
      : serve_dir_(std::move(serve_dir)), base_url_(std::move(public_base_url)) {
    if (!base_url_.empty() && base_url_.back() != '/') base_url_.push_back('/');
  }

  std::string upload(const std::string& content_name, std::span<const std::uint8_t> bytes) override {
    try {
      atomic_write_file(serve_dir_ / content_name, bytes);
    } catch (const IoError& e) {
      throw UploadError(std::string("filesystem upload failed: ") + e.what(), false);
    }
    return base_url_ + content_name;
  }

 private:
  std::filesystem::path serve_dir_;
  std::string base_url_;
};

inline bool is_https_url(std::string_view url) { return url.rfind("https://", 0) == 0 && url.size() > 8; }

/// Content-addressed local store under `<cache_dir>/assets/` with a
/// manifest of uploaded URLs. An asset is uploaded at most once per cache.
class AssetStore {
 public:
  explicit AssetStore(std::filesystem::path cache_dir) : dir_(std::move(cache_dir) / "assets") { load_manifest(); }

  const std::filesystem::path& directory() const { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }

  std::optional<std::string> recorded_url(const std::string& name) const {
    std::lock_guard lock(mutex_);
    auto it = manifest_.find(name);
    if (it == manifest_.end()) return std::nullopt;
    return it->second;
  }

  AssetRef store(std::span<const std::uint8_t> bytes) {
    AssetRef ref{content_name(bytes), std::nullopt, bytes.size()};
    auto path = dir_ / ref.content_name;
    if (!std::filesystem::exists(path)) atomic_write_file(path, bytes);
    ref.url = recorded_url(ref.content_name);
    return ref;
  }

  AssetRef store_and_upload(std::span<const std::uint8_t> bytes, Uploader& uploader) {
    AssetRef ref = store(bytes);
    if (ref.url) return ref;
    std::string url = uploader.upload(ref.content_name, bytes);
    if (!is_https_url(url)) throw UploadError("uploader returned a non-https URL: " + url, false);
    ref.url = url;
    std::lock_guard lock(mutex_);
    manifest_[ref.content_name] = url;
    save_manifest_locked();
    return ref;
  }

 private:
  void load_manifest() {
    auto path = manifest_path();
    if (!std::filesystem::exists(path)) return;
    auto doc = json::parse(read_file_text(path), nullptr, false);
    if (!doc.is_object()) throw IoError("corrupt asset manifest '" + path.string() + "'");
    for (const auto& [name, url] : doc.items())
      if (url.is_string()) manifest_[name] = url.get<std::string>();
  }

  void save_manifest_locked() {
    json doc = json::object();
    for (const auto& [name, url] : manifest_) doc[name] = url;
    atomic_write_file(manifest_path(), doc.dump(2));
  }

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> manifest_;
};

enum class BackgroundMode { solid, tile };

struct BackgroundSample {
  PixelBox bbox;
  BackgroundMode mode = BackgroundMode::solid;
};

inline json background_sample_to_json(const BackgroundSample& s) {
  return {{"bbox_px", {{"x", s.bbox.x}, {"y", s.bbox.y}, {"w", s.bbox.w}, {"h", s.bbox.h}}},
          {"mode", s.mode == BackgroundMode::solid ? "solid" : "tile"}};
}

/// Reads `{"bbox_px": {...}, "mode": "solid"|"tile"}`. Returns nullopt and
/// sets `error` when the object is malformed.
inline std::optional<BackgroundSample> parse_background_sample(const json& node, std::string& error) {
  if (!node.is_object()) {
    error = "background_sample must be an object";
    return std::nullopt;
  }
  auto box = node.find("bbox_px");
  auto mode = node.find("mode");
  if (box == node.end() || !box->is_object()) {
    error = "background_sample.bbox_px is required";
    return std::nullopt;
  }
  BackgroundSample out;
  for (auto [key, field] : {std::pair{"x", &out.bbox.x}, {"y", &out.bbox.y}, {"w", &out.bbox.w}, {"h", &out.bbox.h}}) {
    auto v = box->find(key);
    if (v == box->end() || !v->is_number()) {
      error = std::string("background_sample.bbox_px.") + key + " must be a number";
      return std::nullopt;
    }
    *field = v->get<double>();
  }
  if (mode == node.end() || !mode->is_string() || (*mode != "solid" && *mode != "tile")) {
    error = "background_sample.mode must be \"solid\" or \"tile\"";
    return std::nullopt;
  }
  out.mode = *mode == "solid" ? BackgroundMode::solid : BackgroundMode::tile;
  return out;
}

/// Builds a full-size background from a sampled patch: its mean color
/// (solid) or the patch repeated from the origin (tile).
inline Raster synthesize_background_raster(const Raster& image, const BackgroundSample& sample, int out_width,
                                           int out_height) {
  if (out_width <= 0 || out_height <= 0) throw std::invalid_argument("synthesize_background: output size must be positive");
  CropSpan span;
  span.x0 = std::clamp(static_cast<int>(std::floor(sample.bbox.x)), 0, image.width());
  span.y0 = std::clamp(static_cast<int>(std::floor(sample.bbox.y)), 0, image.height());
  span.x1 = std::clamp(static_cast<int>(std::ceil(sample.bbox.x + sample.bbox.w)), 0, image.width());
  span.y1 = std::clamp(static_cast<int>(std::ceil(sample.bbox.y + sample.bbox.h)), 0, image.height());
  if (span.width() <= 0 || span.height() <= 0) throw std::invalid_argument("synthesize_background: degenerate patch");
  Raster patch = crop_raster(image, span);

  if (sample.mode == BackgroundMode::solid) {
    std::array<std::uint64_t, 4> sums{};
    auto px = patch.data();
    for (std::size_t i = 0; i < px.size(); i += 4)
      for (int c = 0; c < 4; ++c) sums[c] += px[i + c];
    const std::uint64_t n = px.size() / 4;
    Rgba mean{};
    for (int c = 0; c < 4; ++c) mean[c] = static_cast<std::uint8_t>((sums[c] + n / 2) / n);
    return Raster(out_width, out_height, mean);
  }

  Raster out(out_width, out_height);
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x) out.set(x, y, patch.at(x % patch.width(), y % patch.height()));
  return out;
}

inline Bytes synthesize_background(const Raster& image, const BackgroundSample& sample, int out_width, int out_height) {
  return encode_png(synthesize_background_raster(image, sample, out_width, out_height));
}

namespace detail {

// 5x7 glyphs, one byte per column, bit 0 at the top.
inline const std::uint8_t* glyph(char c) {
  static const std::map<char, std::array<std::uint8_t, 5>> font{
      {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}}, {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
      {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
      {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
      {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
      {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
      {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}}, {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
      {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
      {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
      {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}}, {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
      {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
      {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
      {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}}, {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
      {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}}, {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
      {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}}, {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
      {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
      {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}}, {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
      {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
      {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
      {'_', {0x40, 0x40, 0x40, 0x40, 0x40}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
      {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {'?', {0x02, 0x01, 0x51, 0x09, 0x06}},
  };
  char key = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
  auto it = font.find(key);
  return it == font.end() ? font.at('?').data() : it->second.data();
}

inline void fill_rect(Raster& img, int x0, int y0, int x1, int y1, Rgba c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width());
  y1 = std::min(y1, img.height());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set(x, y, c);
}

inline void draw_label(Raster& img, int x, int y, std::string_view text, Rgba fg) {
  constexpr Rgba kLabelBg{255, 255, 255, 255};
  const int width = static_cast<int>(text.size()) * 6 + 1;
  fill_rect(img, x, y, x + width, y + 9, kLabelBg);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto* cols = glyph(text[i]);
    for (int col = 0; col < 5; ++col)
      for (int row = 0; row < 7; ++row)
        if (cols[col] & (1u << row)) {
          int px = x + 1 + static_cast<int>(i) * 6 + col;
          int py = y + 1 + row;
          if (px >= 0 && py >= 0 && px < img.width() && py < img.height()) img.set(px, py, fg);
        }
  }
}

}  // namespace detail

inline constexpr Rgba kOverlayTextColor{0, 200, 0, 255};
inline constexpr Rgba kOverlayImageColor{220, 0, 220, 255};
inline constexpr int kOverlayStroke = 2;

/// Outlines each region's box (green for text, magenta for images) with a
/// 2 px inward stroke and labels it with its id just inside the top-left corner.
inline Raster render_overlay_raster(const Raster& image, const Layout& layout) {
  Raster out = image;
  for (const auto& r : layout.regions) {
    const Rgba color = r.kind == RegionKind::text ? kOverlayTextColor : kOverlayImageColor;
    int x0 = static_cast<int>(std::lround(r.bbox.x));
    int y0 = static_cast<int>(std::lround(r.bbox.y));
    int x1 = static_cast<int>(std::lround(r.bbox.x + r.bbox.w));
    int y1 = static_cast<int>(std::lround(r.bbox.y + r.bbox.h));
    if (x1 <= x0 || y1 <= y0) continue;
    const int s = kOverlayStroke;
    detail::fill_rect(out, x0, y0, x1, y0 + s, color);
    detail::fill_rect(out, x0, y1 - s, x1, y1, color);
    detail::fill_rect(out, x0, y0, x0 + s, y1, color);
    detail::fill_rect(out, x1 - s, y0, x1, y1, color);
    detail::draw_label(out, x0 + s + 1, y0 + s + 1, r.id, color);
  }
  return out;
}

inline Bytes render_overlay(const Raster& image, const Layout& layout) {
  return encode_png(render_overlay_raster(image, layout));
}

}  // namespace infoslide
