#pragma once

// Pipeline configuration. Sources apply in increasing precedence: built-in
// defaults, a flat JSON config file, command-line flags, environment.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "infoslide/geometry.hpp"
#include "infoslide/region_schema.hpp"
#include "infoslide/util.hpp"

namespace infoslide {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  std::filesystem::path cache_dir = ".infoslide-cache";
  SlidePageSize page_size;
  bool synthesize_background = false;
  bool expand_widths = false;
  bool merge_adjacent_text = false;
  int pad_px = 10;
  double margin_pt = 6.0;
  double gap_pt = 4.0;

  std::string backend = "http";  // "http" | "fixture"
  std::string backend_url;
  std::string backend_api_key;
  std::string model_id = "default";
  int max_retries = 2;
  std::filesystem::path fixture_dir;

  std::string uploader = "filesystem";  // "filesystem" | "http"
  std::filesystem::path upload_dir;     // defaults to <cache_dir>/public
  std::string public_base_url = "https://localhost/assets/";
  std::string upload_endpoint;
  std::string upload_token;

  std::string presentation_id;
  std::string page_id = "SLIDE_main";
  std::string slides_endpoint = "https://slides.googleapis.com";
  std::string slides_token;
  bool replace = false;

  double match_iou_threshold = 0.0;
};

inline SlidePageSize parse_page_size(const std::string& text) {
  auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw ConfigError("page size must look like WxH, got '" + text + "'");
  try {
    std::size_t used = 0;
    SlidePageSize size{std::stod(text.substr(0, x), &used), 0};
    if (used != x) throw std::invalid_argument(text);
    auto rest = text.substr(x + 1);
    size.height_pt = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    if (!(size.width_pt > 0) || !(size.height_pt > 0)) throw std::invalid_argument(text);
    return size;
  } catch (const std::invalid_argument&) {
    throw ConfigError("page size must look like WxH with positive numbers, got '" + text + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("page size out of range: '" + text + "'");
  }
}

inline void validate(const PipelineConfig& c) {
  if (c.pad_px < 0) throw ConfigError("pad_px must be >= 0");
  if (c.margin_pt < 0 || c.gap_pt < 0) throw ConfigError("margin_pt and gap_pt must be >= 0");
  if (c.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (!(c.match_iou_threshold >= 0.0 && c.match_iou_threshold < 1.0)) throw ConfigError("match_iou_threshold must lie in [0, 1)");
  if (c.backend != "http" && c.backend != "fixture") throw ConfigError("backend must be \"http\" or \"fixture\"");
  if (c.uploader != "filesystem" && c.uploader != "http") throw ConfigError("uploader must be \"filesystem\" or \"http\"");
}

/// Applies a flat JSON document whose keys mirror PipelineConfig fields.
/// Unknown keys are reported through `warnings`.
inline void apply_config_json(PipelineConfig& c, const json& doc, std::vector<std::string>* warnings = nullptr) {
  if (!doc.is_object()) throw ConfigError("config file must contain a JSON object");
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "cache_dir") c.cache_dir = value.get<std::string>();
      else if (key == "page_size") c.page_size = parse_page_size(value.get<std::string>());
      else if (key == "synthesize_background") c.synthesize_background = value.get<bool>();
      else if (key == "expand_widths") c.expand_widths = value.get<bool>();
      else if (key == "merge_adjacent_text") c.merge_adjacent_text = value.get<bool>();
      else if (key == "pad_px") c.pad_px = value.get<int>();
      else if (key == "margin_pt") c.margin_pt = value.get<double>();
      else if (key == "gap_pt") c.gap_pt = value.get<double>();
      else if (key == "backend") c.backend = value.get<std::string>();
      else if (key == "backend_url") c.backend_url = value.get<std::string>();
      else if (key == "backend_api_key") c.backend_api_key = value.get<std::string>();
      else if (key == "model_id") c.model_id = value.get<std::string>();
      else if (key == "max_retries") c.max_retries = value.get<int>();
      else if (key == "fixture_dir") c.fixture_dir = value.get<std::string>();
      else if (key == "uploader") c.uploader = value.get<std::string>();
      else if (key == "upload_dir") c.upload_dir = value.get<std::string>();
      else if (key == "public_base_url") c.public_base_url = value.get<std::string>();
      else if (key == "upload_endpoint") c.upload_endpoint = value.get<std::string>();
      else if (key == "upload_token") c.upload_token = value.get<std::string>();
      else if (key == "presentation_id") c.presentation_id = value.get<std::string>();
      else if (key == "page_id") c.page_id = value.get<std::string>();
      else if (key == "slides_endpoint") c.slides_endpoint = value.get<std::string>();
      else if (key == "slides_token") c.slides_token = value.get<std::string>();
      else if (key == "replace") c.replace = value.get<bool>();
      else if (key == "match_iou_threshold") c.match_iou_threshold = value.get<double>();
      else if (warnings) warnings->push_back("ignoring unknown config key '" + key + "'");
    } catch (const json::type_error&) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + value.dump());
    }
  }
}

inline void load_config_file(PipelineConfig& c, const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  auto doc = json::parse(read_file_text(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file '" + path.string() + "' is not valid JSON");
  apply_config_json(c, doc, warnings);
}

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

inline void apply_env(PipelineConfig& c, const EnvLookup& env = process_env) {
  if (auto v = env("I2S_BACKEND_URL")) c.backend_url = *v;
  if (auto v = env("I2S_BACKEND_API_KEY")) c.backend_api_key = *v;
  if (auto v = env("I2S_MODEL_ID")) c.model_id = *v;
  if (auto v = env("I2S_SLIDES_TOKEN")) c.slides_token = *v;
}

}  // namespace infoslide
