#pragma once

// Layout extraction from a vision-language backend: strict-JSON prompting,
// schema-violation retries with error feedback, and an on-disk artifact cache.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "infoslide/assets.hpp"
#include "infoslide/raster.hpp"
#include "infoslide/region_schema.hpp"
#include "infoslide/util.hpp"

namespace infoslide {

inline constexpr int kDefaultMaxRetries = 2;

struct BackendRequest {
  Bytes image_bytes;
  int image_width = 0;
  int image_height = 0;
  std::string prompt;
  std::string model_id;
  int max_retries = kDefaultMaxRetries;
  bool want_background = false;
};

/// One request to the backend: an image plus the prompt text to send with it.
struct BackendCall {
  std::span<const std::uint8_t> image;
  std::string mime_type;
  std::string prompt;
  std::string model_id;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TruncatedResponseError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Image + prompt in, response text out.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const BackendCall& call) = 0;
};

/// Replays numbered reply files from a directory in filename order; once
/// exhausted, keeps returning the last one.
class FixtureBackend : public Backend {
 public:
  explicit FixtureBackend(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw BackendError("fixture directory '" + dir.string() + "' does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) replies_.push_back(read_file_text(f));
    if (replies_.empty()) throw BackendError("fixture directory '" + dir.string() + "' has no reply files");
  }

  explicit FixtureBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {
    if (replies_.empty()) throw BackendError("fixture backend needs at least one reply");
  }

  std::string complete(const BackendCall& call) override {
    prompts_.push_back(call.prompt);
    auto index = std::min(calls_++, replies_.size() - 1);
    return replies_[index];
  }

  std::size_t calls() const { return calls_; }
  const std::vector<std::string>& prompts() const { return prompts_; }

 private:
  std::vector<std::string> replies_;
  std::vector<std::string> prompts_;
  std::size_t calls_ = 0;
};

inline std::string build_prompt(int width, int height, bool want_background) {
  const std::string w = std::to_string(width);
  const std::string h = std::to_string(height);
  std::string p;
  p += "You are given an infographic image that is exactly " + w + " pixels wide and " + h + " pixels tall.\n";
  p += "Describe it as a region file. Output JSON only: a single JSON object, no Markdown, no code fences, no commentary.\n\n";
  p += "Top-level shape:\n";
  p += "{\"image_px\": {\"width\": " + w + ", \"height\": " + h + "}, \"regions\": [ ... ]";
  if (want_background) p += ", \"background_sample\": { ... }";
  p += "}\n\n";
  p += "Each region object has exactly these keys:\n";
  p += "- \"id\": short stable identifier, unique within the file (letters, digits, underscores), e.g. \"title\"\n";
  p += "- \"order\": integer reading order, starting at 1\n";
  p += "- \"type\": \"text\" or \"image\"\n";
  p += "- \"bbox_px\": {\"x\", \"y\", \"w\", \"h\"} in image pixels with the origin at the top-left; w > 0, h > 0\n";
  p += "- \"text\": the exact visible text for text regions (use \\n for line breaks); null for image regions\n";
  p += "- \"style\": {\"font_family\", \"font_size_pt\", \"bold\"} for text regions, or null\n";
  p += "- \"crop_from_infographic\": true for image regions that should be cropped from the source, else false\n";
  p += "- \"confidence\": number between 0 and 1\n";
  p += "- \"notes\": free-form notes or tags, or null\n\n";
  p += "Rules:\n";
  p += "- Use the exact image dimensions " + w + "x" + h + " in image_px.\n";
  p += "- Keep every box within bounds: 0 <= x, 0 <= y, x + w <= " + w + ", y + h <= " + h + ".\n";
  p += "- Make each region well-scoped: one logical text block or one visual element.\n";
  p += "- Transcribe only text that is visible. Avoid inferring or fabricating text that is not visible in the image.\n";
  p += "- Give regions in reading order and include tags in notes when available.\n";
  if (want_background) {
    p += "\nAlso include \"background_sample\": {\"bbox_px\": {\"x\", \"y\", \"w\", \"h\"}, \"mode\": \"solid\" | \"tile\"}.\n";
    p += "Choose a box that contains only background (no text, icons or containers). Use \"solid\" when the background "
         "is near-uniform and \"tile\" when it is textured or patterned.\n";
  }
  return p;
}

/// Removes a surrounding ``` / ```json fence if the model added one.
inline std::string strip_code_fences(std::string_view text) {
  auto trim = [](std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return std::string_view{};
    auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
  };
  std::string_view s = trim(text);
  if (s.rfind("```", 0) == 0) {
    auto nl = s.find('\n');
    s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
    s = trim(s);
    if (s.size() >= 3 && s.substr(s.size() - 3) == "```") s = trim(s.substr(0, s.size() - 3));
  }
  return std::string(s);
}

inline std::string detect_mime_type(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) return "image/jpeg";
  return "image/png";
}

struct ExtractionResult {
  std::string raw_json;
  Layout layout;
  std::optional<BackgroundSample> background;
  int attempts = 0;       // backend attempts in this call; 0 on a cache hit
  bool from_cache = false;
  double elapsed_s = 0;
  std::vector<std::string> warnings;
};

class ExtractionError : public std::runtime_error {
 public:
  ExtractionError(const std::string& what, std::vector<ValidationError> errors, int attempts)
      : std::runtime_error(what), errors_(std::move(errors)), attempts_(attempts) {}
  const std::vector<ValidationError>& errors() const { return errors_; }
  int attempts() const { return attempts_; }

 private:
  std::vector<ValidationError> errors_;
  int attempts_;
};

/// Artifacts live at `<cache_dir>/extract/<image_digest>/<model_id>/`.
class ExtractionCache {
 public:
  ExtractionCache(const std::filesystem::path& cache_dir, std::span<const std::uint8_t> image, const std::string& model_id)
      : dir_(cache_dir / "extract" / sha256_hex(image).substr(0, kContentNameStemChars) / sanitize(model_id)) {}

  const std::filesystem::path& directory() const { return dir_; }
  std::filesystem::path raw_path() const { return dir_ / "raw.json"; }
  std::filesystem::path validated_path() const { return dir_ / "validated.json"; }
  std::filesystem::path overlay_path() const { return dir_ / "overlay.png"; }

  bool complete() const {
    return std::filesystem::exists(raw_path()) && std::filesystem::exists(validated_path()) &&
           std::filesystem::exists(overlay_path());
  }

  static std::string sanitize(const std::string& model_id) {
    std::string out;
    for (char c : model_id) {
      bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
      out.push_back(ok ? c : '_');
    }
    if (out.empty() || out == "." || out == "..") out = "default";
    return out;
  }

 private:
  std::filesystem::path dir_;
};

struct ExtractOptions {
  std::optional<std::filesystem::path> cache_dir;
  PostprocessOptions postprocess;
};

namespace detail {

struct Attempt {
  std::optional<Layout> layout;
  std::optional<BackgroundSample> background;
  std::vector<ValidationError> errors;
  std::vector<std::string> warnings;
};

inline Attempt validate_response(const std::string& cleaned, const BackendRequest& req, const PostprocessOptions& pp) {
  Attempt out;
  auto parsed = parse_layout(cleaned);
  out.warnings = std::move(parsed.warnings);
  if (!parsed.ok()) {
    out.errors = std::move(parsed.errors);
    return out;
  }
  if (parsed.layout->image_width != req.image_width || parsed.layout->image_height != req.image_height) {
    out.errors.push_back({std::nullopt, "image_px",
                          "must equal the exact image dimensions " + std::to_string(req.image_width) + "x" +
                              std::to_string(req.image_height) + ", got " + std::to_string(parsed.layout->image_width) +
                              "x" + std::to_string(parsed.layout->image_height)});
    return out;
  }
  auto post = postprocess_layout(std::move(*parsed.layout), pp);
  out.warnings.insert(out.warnings.end(), post.warnings.begin(), post.warnings.end());
  out.layout = std::move(post.layout);

  if (req.want_background) {
    auto doc = json::parse(cleaned);
    auto node = doc.find("background_sample");
    if (node == doc.end() || node->is_null()) {
      out.warnings.push_back("background_sample requested but missing; continuing without a background");
    } else {
      std::string error;
      auto sample = parse_background_sample(*node, error);
      if (!sample) {
        out.warnings.push_back("ignoring malformed background_sample: " + error);
      } else {
        auto& b = sample->bbox;
        b.x = std::max(0.0, b.x);
        b.y = std::max(0.0, b.y);
        b.w = std::min(b.w, req.image_width - b.x);
        b.h = std::min(b.h, req.image_height - b.y);
        if (b.w >= 1 && b.h >= 1) out.background = sample;
        else out.warnings.push_back("ignoring background_sample: box lies outside the image");
      }
    }
  }
  return out;
}

/// Layout JSON plus the background sample, when there is one.
inline std::string validated_document(const Layout& layout, const std::optional<BackgroundSample>& background) {
  json doc = layout_to_json(layout);
  if (background) doc["background_sample"] = background_sample_to_json(*background);
  return doc.dump(2, ' ', false, json::error_handler_t::replace);
}

}  // namespace detail

/// Runs the backend until it returns a schema-valid layout or retries run out.
/// Each retry re-sends the original prompt with the previous attempt's
/// validation errors appended.
inline ExtractionResult extract_layout_from_image(const BackendRequest& req, Backend& backend,
                                                  const ExtractOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  const std::string base_prompt = req.prompt.empty() ? build_prompt(req.image_width, req.image_height, req.want_background) : req.prompt;

  std::optional<ExtractionCache> cache;
  if (options.cache_dir) cache.emplace(*options.cache_dir, req.image_bytes, req.model_id);

  if (cache && cache->complete()) {
    auto raw = read_file_text(cache->raw_path());
    auto attempt = detail::validate_response(strip_code_fences(raw), req, options.postprocess);
    bool usable = attempt.layout && (!req.want_background || attempt.background);
    if (usable) {
      ExtractionResult hit;
      hit.raw_json = std::move(raw);
      hit.layout = std::move(*attempt.layout);
      hit.background = attempt.background;
      hit.from_cache = true;
      hit.warnings = std::move(attempt.warnings);
      hit.elapsed_s = elapsed();
      return hit;
    }
  }

  const int max_attempts = std::max(0, req.max_retries) + 1;
  const std::string mime = detect_mime_type(req.image_bytes);
  std::vector<ValidationError> last_errors;
  std::string prompt = base_prompt;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::string raw = backend.complete({req.image_bytes, mime, prompt, req.model_id});
    auto checked = detail::validate_response(strip_code_fences(raw), req, options.postprocess);
    if (checked.layout) {
      ExtractionResult result;
      result.raw_json = std::move(raw);
      result.layout = std::move(*checked.layout);
      result.background = checked.background;
      result.attempts = attempt;
      result.warnings = std::move(checked.warnings);
      if (cache) {
        atomic_write_file(cache->raw_path(), result.raw_json);
        atomic_write_file(cache->validated_path(), detail::validated_document(result.layout, result.background));
        atomic_write_file(cache->overlay_path(), render_overlay(decode_image(req.image_bytes), result.layout));
      }
      result.elapsed_s = elapsed();
      return result;
    }
    last_errors = std::move(checked.errors);
    prompt = base_prompt + "\n\n" + error_feedback(last_errors);
  }
  throw ExtractionError("layout extraction failed after " + std::to_string(max_attempts) + " attempts: " +
                            LayoutError(last_errors).what(),
                        last_errors, max_attempts);
}

}  // namespace infoslide
