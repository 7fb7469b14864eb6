#pragma once

// Command-line front end: extract, build, eval and overlay.
//
// Exit codes: 0 success, 1 generic/usage, 2 input I/O, 3 validation or
// consistency, 4 backend or service failure.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "infoslide/assets.hpp"
#include "infoslide/config.hpp"
#include "infoslide/evaluation.hpp"
#include "infoslide/extractor.hpp"
#include "infoslide/geometry.hpp"
#include "infoslide/http.hpp"
#include "infoslide/merge.hpp"
#include "infoslide/raster.hpp"
#include "infoslide/region_schema.hpp"
#include "infoslide/report.hpp"
#include "infoslide/slide_builder.hpp"

namespace infoslide {

enum ExitCode : int { kExitOk = 0, kExitGeneric = 1, kExitInput = 2, kExitValidation = 3, kExitService = 4 };

class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Injection points for tests; unset members fall back to the real
/// implementations chosen by the configuration.
struct CliHooks {
  std::function<std::unique_ptr<Backend>(const PipelineConfig&)> make_backend;
  std::function<std::unique_ptr<Uploader>(const PipelineConfig&)> make_uploader;
  std::function<std::unique_ptr<PresentationService>(const PipelineConfig&)> make_service;
  EnvLookup env = process_env;
};

namespace detail {

inline std::unique_ptr<Backend> make_backend(const PipelineConfig& c, const CliHooks& hooks) {
  if (hooks.make_backend) return hooks.make_backend(c);
  if (c.backend == "fixture") {
    if (c.fixture_dir.empty()) throw ConfigError("fixture backend needs --fixture-dir");
    return std::make_unique<FixtureBackend>(c.fixture_dir);
  }
  if (c.backend_url.empty()) throw ConfigError("no backend URL configured (set I2S_BACKEND_URL or backend_url)");
  return std::make_unique<HttpBackend>(c.backend_url, c.backend_api_key);
}

inline std::filesystem::path upload_dir(const PipelineConfig& c) {
  return c.upload_dir.empty() ? c.cache_dir / "public" : c.upload_dir;
}

inline std::unique_ptr<Uploader> make_uploader(const PipelineConfig& c, const CliHooks& hooks, bool dry_run) {
  if (dry_run || c.uploader == "filesystem") return std::make_unique<FilesystemUploader>(upload_dir(c), c.public_base_url);
  if (hooks.make_uploader) return hooks.make_uploader(c);
  if (c.upload_endpoint.empty()) throw ConfigError("http uploader needs upload_endpoint");
  return std::make_unique<HttpUploader>(c.upload_endpoint, c.public_base_url, c.upload_token);
}

inline std::unique_ptr<PresentationService> make_service(const PipelineConfig& c, const CliHooks& hooks) {
  if (hooks.make_service) return hooks.make_service(c);
  if (c.slides_token.empty()) throw ConfigError("no slides token configured (set I2S_SLIDES_TOKEN)");
  return std::make_unique<HttpSlidesService>(c.slides_token, c.slides_endpoint);
}

inline Raster load_image(const std::filesystem::path& path, Bytes* bytes_out = nullptr) {
  Bytes bytes = read_file_bytes(path);
  try {
    Raster r = decode_image(bytes);
    if (bytes_out) *bytes_out = std::move(bytes);
    return r;
  } catch (const ImageCodecError& e) {
    throw IoError("cannot decode image '" + path.string() + "': " + e.what());
  }
}

struct LoadedLayout {
  Layout layout;
  std::optional<BackgroundSample> background;
};

inline LoadedLayout load_layout(const std::filesystem::path& path, std::ostream& err) {
  const std::string text = read_file_text(path);
  auto parsed = parse_layout(text);
  for (const auto& w : parsed.warnings) err << "warning: " << path.string() << ": " << w << "\n";
  if (!parsed.ok()) throw LayoutError(parsed.errors);
  auto post = postprocess_layout(std::move(*parsed.layout));
  for (const auto& w : post.warnings) err << "warning: " << path.string() << ": " << w << "\n";
  LoadedLayout out{std::move(post.layout), std::nullopt};
  auto doc = json::parse(text);
  if (auto it = doc.find("background_sample"); it != doc.end() && !it->is_null()) {
    std::string error;
    out.background = parse_background_sample(*it, error);
    if (!out.background) err << "warning: " << path.string() << ": ignoring background_sample: " << error << "\n";
  }
  return out;
}

inline std::string seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", s);
  return buf;
}

}  // namespace detail

/// Runs extraction for one image; returns the validated layout path.
inline std::filesystem::path cmd_extract(const std::filesystem::path& image_path, const PipelineConfig& config,
                                         const CliHooks& hooks, std::ostream& out, std::ostream& err) {
  Bytes bytes;
  Raster image = detail::load_image(image_path, &bytes);
  auto backend = detail::make_backend(config, hooks);

  BackendRequest req;
  req.image_bytes = std::move(bytes);
  req.image_width = image.width();
  req.image_height = image.height();
  req.model_id = config.model_id;
  req.max_retries = config.max_retries;
  req.want_background = config.synthesize_background;
  req.prompt = build_prompt(req.image_width, req.image_height, req.want_background);

  ExtractOptions options;
  options.cache_dir = config.cache_dir;
  auto result = extract_layout_from_image(req, *backend, options);
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";

  ExtractionCache cache(config.cache_dir, req.image_bytes, req.model_id);
  out << "raw: " << cache.raw_path().string() << "\n";
  out << "validated: " << cache.validated_path().string() << "\n";
  out << "overlay: " << cache.overlay_path().string() << "\n";
  out << "regions: " << result.layout.regions.size() << "\n";
  out << (result.from_cache ? "cache: hit\n" : "attempts: " + std::to_string(result.attempts) + "\n");
  out << "timing: VLM extraction " << detail::seconds(result.elapsed_s) << " s\n";
  return cache.validated_path();
}

struct BuildCommandOptions {
  bool dry_run = false;
  std::optional<std::filesystem::path> out_path;
};

/// Crops and uploads assets, builds the batch, and either writes it
/// (dry run) or executes it against the presentation service.
inline std::filesystem::path cmd_build(const std::filesystem::path& image_path, const std::filesystem::path& layout_path,
                                       const PipelineConfig& config, const BuildCommandOptions& options,
                                       const CliHooks& hooks, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  Raster image = detail::load_image(image_path);
  auto loaded = detail::load_layout(layout_path, err);
  Layout layout = std::move(loaded.layout);
  if (config.merge_adjacent_text) layout = postprocess_layout(merge_adjacent_text(std::move(layout))).layout;
  if (layout.image_width != image.width() || layout.image_height != image.height())
    throw ConsistencyError("layout image_px " + std::to_string(layout.image_width) + "x" + std::to_string(layout.image_height) +
                           " does not match image " + std::to_string(image.width()) + "x" + std::to_string(image.height()));

  auto uploader = detail::make_uploader(config, hooks, options.dry_run);
  AssetStore store(config.cache_dir);
  std::map<std::string, std::string> urls;
  for (const auto& r : layout.regions) {
    if (r.kind != RegionKind::image) continue;
    auto ref = store.store_and_upload(crop_region_png(image, r.bbox, config.pad_px), *uploader);
    urls[r.id] = *ref.url;
  }
  std::optional<std::string> background_url;
  if (config.synthesize_background) {
    if (loaded.background) {
      auto bytes = synthesize_background(image, *loaded.background, image.width(), image.height());
      background_url = *store.store_and_upload(bytes, *uploader).url;
    } else {
      err << "warning: --synthesize-background set but the layout has no background_sample; skipping background\n";
    }
  }

  BuildOptions build;
  build.page = config.page_size;
  build.expand_widths = config.expand_widths;
  build.margin_pt = config.margin_pt;
  build.gap_pt = config.gap_pt;
  build.page_id = config.page_id;
  build.presentation_id = config.presentation_id;
  const FitTransform fit = compute_fit(layout.image_width, layout.image_height, config.page_size);
  RequestBatch batch = build_requests_for_infographic(layout, fit, urls, background_url, build);
  const double local_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (options.dry_run) {
    auto path = options.out_path.value_or(config.cache_dir / "batch.json");
    FileSinkService sink(path);
    execute_batch(batch, sink);
    out << "batch: " << path.string() << "\n";
    out << "requests: " << batch.requests.size() << "\n";
    out << "timing: local processing " << detail::seconds(local_s) << " s\n";
    return path;
  }

  if (config.presentation_id.empty()) throw ConfigError("--presentation-id is required unless --dry-run is given");
  auto service = detail::make_service(config, hooks);
  ExecuteOptions exec;
  exec.replace = config.replace;
  auto report = execute_batch(batch, *service, exec);
  out << "presentation: " << config.presentation_id << "\n";
  out << "objects:";
  for (const auto& id : report.object_ids) out << " " << id;
  out << "\n";
  out << "timing: local processing " << detail::seconds(local_s) << " s\n";
  out << "timing: Slides API " << detail::seconds(report.elapsed_s) << " s\n";
  return {};
}

struct EvalCommandOptions {
  std::optional<std::filesystem::path> gt_path;
  std::optional<std::filesystem::path> pred_path;
  std::optional<std::filesystem::path> run_dir;
  std::optional<std::filesystem::path> out_path;
};

inline RunTimings read_timings(const std::filesystem::path& path) {
  RunTimings t;
  if (!std::filesystem::exists(path)) return t;
  auto doc = json::parse(read_file_text(path), nullptr, false);
  if (!doc.is_object()) throw IoError("timings file '" + path.string() + "' is not a JSON object");
  if (doc.contains("vlm_extraction_s") && doc["vlm_extraction_s"].is_number()) t.extraction_s = doc["vlm_extraction_s"].get<double>();
  if (doc.contains("slides_api_s") && doc["slides_api_s"].is_number()) t.slides_api_s = doc["slides_api_s"].get<double>();
  return t;
}

/// Evaluates one gt/pred pair, or every run subdirectory of a run directory
/// (each holding gt_region.json, pred_region.json and optional timings.json).
inline std::filesystem::path cmd_eval(const EvalCommandOptions& options, const PipelineConfig& config, std::ostream& out,
                                      std::ostream& err) {
  MatchOptions match;
  match.min_iou = config.match_iou_threshold;
  std::vector<RunMetrics> runs;
  std::filesystem::path default_out;

  auto evaluate = [&](const std::string& name, const std::filesystem::path& gt, const std::filesystem::path& pred,
                      const RunTimings& timings) {
    if (!std::filesystem::exists(gt)) throw IoError("run '" + name + "': missing ground truth " + gt.string());
    if (!std::filesystem::exists(pred)) throw IoError("run '" + name + "': missing prediction " + pred.string());
    auto g = detail::load_layout(gt, err).layout;
    auto p = detail::load_layout(pred, err).layout;
    auto metrics = evaluate_run(g, p, timings, match);
    metrics.name = name;
    runs.push_back(std::move(metrics));
  };

  if (options.run_dir) {
    if (!std::filesystem::is_directory(*options.run_dir)) throw IoError("run directory '" + options.run_dir->string() + "' not found");
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(*options.run_dir))
      if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw IoError("run directory '" + options.run_dir->string() + "' has no runs");
    for (const auto& d : dirs)
      evaluate(d.filename().string(), d / "gt_region.json", d / "pred_region.json", read_timings(d / "timings.json"));
    default_out = *options.run_dir / "eval_report.json";
  } else {
    if (!options.gt_path || !options.pred_path) throw ConfigError("eval needs <gt> <pred> or --run-dir");
    evaluate(options.pred_path->parent_path().filename().string(), *options.gt_path, *options.pred_path,
             read_timings(options.pred_path->parent_path() / "timings.json"));
    default_out = options.pred_path->parent_path() / "eval_report.json";
  }

  auto report = aggregate(runs);
  auto path = options.out_path.value_or(default_out);
  atomic_write_file(path, report_to_json(report).dump(2) + "\n");
  out << report_table(report);
  out << "report: " << path.string() << "\n";
  return path;
}

inline std::filesystem::path cmd_overlay(const std::filesystem::path& image_path, const std::filesystem::path& layout_path,
                                         const std::optional<std::filesystem::path>& out_path, std::ostream& out,
                                         std::ostream& err) {
  Raster image = detail::load_image(image_path);
  auto layout = detail::load_layout(layout_path, err).layout;
  auto path = out_path.value_or(layout_path.parent_path() / (layout_path.stem().string() + ".overlay.png"));
  atomic_write_file(path, render_overlay(image, layout));
  out << "overlay: " << path.string() << "\n";
  return path;
}

namespace detail {

struct CommonFlags {
  std::string config_path;
  std::string cache_dir;
  std::string page_size;
  bool synthesize_background = false;
  bool expand_widths = false;
  bool merge_adjacent_text = false;
  int pad_px = 10;
  double margin_pt = 6;
  double gap_pt = 4;
  std::string presentation_id;
  std::string backend;
  std::string fixture_dir;
  std::string model_id;
  int max_retries = 2;
  std::string uploader;
  std::string public_base_url;
  std::string upload_endpoint;
  double match_iou_threshold = 0;
  bool replace = false;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> setters;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "Flat JSON config file");
    bind(cmd.add_option("--cache-dir", cache_dir, "Cache directory"), [this](auto& c) { c.cache_dir = cache_dir; });
    bind(cmd.add_option("--page-size", page_size, "Slide page size WxH in points (default 720x405)"),
         [this](auto& c) { c.page_size = parse_page_size(page_size); });
    bind(cmd.add_flag("--synthesize-background", synthesize_background, "Synthesize a background image"),
         [this](auto& c) { c.synthesize_background = synthesize_background; });
    bind(cmd.add_flag("--expand-widths", expand_widths, "Widen text boxes after font calibration"),
         [this](auto& c) { c.expand_widths = expand_widths; });
    bind(cmd.add_flag("--merge-adjacent-text", merge_adjacent_text, "Merge over-segmented text regions"),
         [this](auto& c) { c.merge_adjacent_text = merge_adjacent_text; });
    bind(cmd.add_option("--pad-px", pad_px, "Right/bottom crop padding in pixels"), [this](auto& c) { c.pad_px = pad_px; });
    bind(cmd.add_option("--margin-pt", margin_pt, "Page margin for width expansion"), [this](auto& c) { c.margin_pt = margin_pt; });
    bind(cmd.add_option("--gap-pt", gap_pt, "Neighbor gap for width expansion"), [this](auto& c) { c.gap_pt = gap_pt; });
    bind(cmd.add_option("--presentation-id", presentation_id, "Target presentation"),
         [this](auto& c) { c.presentation_id = presentation_id; });
    bind(cmd.add_option("--backend", backend, "http or fixture"), [this](auto& c) { c.backend = backend; });
    bind(cmd.add_option("--fixture-dir", fixture_dir, "Directory of numbered reply files for the fixture backend"),
         [this](auto& c) {
           c.fixture_dir = fixture_dir;
           c.backend = "fixture";
         });
    bind(cmd.add_option("--model", model_id, "Backend model id"), [this](auto& c) { c.model_id = model_id; });
    bind(cmd.add_option("--max-retries", max_retries, "Retries after a schema violation"),
         [this](auto& c) { c.max_retries = max_retries; });
    bind(cmd.add_option("--uploader", uploader, "filesystem or http"), [this](auto& c) { c.uploader = uploader; });
    bind(cmd.add_option("--public-base-url", public_base_url, "https base URL assets are served from"),
         [this](auto& c) { c.public_base_url = public_base_url; });
    bind(cmd.add_option("--upload-endpoint", upload_endpoint, "Endpoint assets are PUT to"),
         [this](auto& c) { c.upload_endpoint = upload_endpoint; });
    bind(cmd.add_option("--match-iou-threshold", match_iou_threshold, "Minimum IoU (exclusive) for a match"),
         [this](auto& c) { c.match_iou_threshold = match_iou_threshold; });
    bind(cmd.add_flag("--replace", replace, "Delete objects from an earlier run before recreating them"),
         [this](auto& c) { c.replace = replace; });
  }

  void bind(CLI::Option* opt, std::function<void(PipelineConfig&)> apply) { setters.emplace_back(opt, std::move(apply)); }

  PipelineConfig resolve(const EnvLookup& env, std::ostream& err) const {
    PipelineConfig c;
    if (!config_path.empty()) {
      std::vector<std::string> warnings;
      load_config_file(c, config_path, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << "\n";
    }
    for (const auto& [opt, apply] : setters)
      if (opt->count() > 0) apply(c);
    apply_env(c, env);
    validate(c);
    return c;
  }
};

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliHooks& hooks = {}) {
  CLI::App app{"Rebuild infographic images as editable slides and evaluate reconstructions", "infoslide"};
  app.require_subcommand(1);

  detail::CommonFlags extract_flags, build_flags, eval_flags, overlay_flags;

  auto* extract = app.add_subcommand("extract", "Extract a validated region layout from an image");
  std::string extract_image;
  extract->add_option("image", extract_image, "Infographic image (PNG or JPEG)")->required();
  extract_flags.add_to(*extract);

  auto* build = app.add_subcommand("build", "Build (and optionally execute) the slide request batch");
  std::string build_image, build_layout, build_out;
  bool dry_run = false;
  build->add_option("image", build_image, "Infographic image")->required();
  build->add_option("layout", build_layout, "Region layout JSON")->required();
  build->add_flag("--dry-run", dry_run, "Write the batch to a file instead of calling the service");
  build->add_option("--out", build_out, "Batch output path for --dry-run");
  build_flags.add_to(*build);

  auto* eval = app.add_subcommand("eval", "Evaluate predicted layouts against ground truth");
  std::string eval_gt, eval_pred, eval_run_dir, eval_out;
  eval->add_option("gt", eval_gt, "Ground-truth layout (gt_region.json)");
  eval->add_option("pred", eval_pred, "Predicted layout (pred_region.json)");
  eval->add_option("--run-dir", eval_run_dir, "Directory of run subdirectories");
  eval->add_option("--out", eval_out, "Report path (default eval_report.json beside the inputs)");
  eval_flags.add_to(*eval);

  auto* overlay = app.add_subcommand("overlay", "Render region boxes over the image");
  std::string overlay_image, overlay_layout, overlay_out;
  overlay->add_option("image", overlay_image, "Infographic image")->required();
  overlay->add_option("layout", overlay_layout, "Region layout JSON")->required();
  overlay->add_option("--out", overlay_out, "Output PNG path");
  overlay_flags.add_to(*overlay);

  std::vector<const char*> argv;
  argv.push_back("infoslide");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitGeneric;
  }

  try {
    if (*extract) {
      cmd_extract(extract_image, extract_flags.resolve(hooks.env, err), hooks, out, err);
    } else if (*build) {
      BuildCommandOptions opts;
      opts.dry_run = dry_run;
      if (!build_out.empty()) opts.out_path = build_out;
      cmd_build(build_image, build_layout, build_flags.resolve(hooks.env, err), opts, hooks, out, err);
    } else if (*eval) {
      EvalCommandOptions opts;
      if (!eval_gt.empty()) opts.gt_path = eval_gt;
      if (!eval_pred.empty()) opts.pred_path = eval_pred;
      if (!eval_run_dir.empty()) opts.run_dir = eval_run_dir;
      if (!eval_out.empty()) opts.out_path = eval_out;
      cmd_eval(opts, eval_flags.resolve(hooks.env, err), out, err);
    } else if (*overlay) {
      std::optional<std::filesystem::path> path;
      if (!overlay_out.empty()) path = overlay_out;
      overlay_flags.resolve(hooks.env, err);
      cmd_overlay(overlay_image, overlay_layout, path, out, err);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const LayoutError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ExtractionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConsistencyError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const EvaluationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const BackendError& e) {
    err << "error: " << e.what() << "\n";
    return kExitService;
  } catch (const UploadError& e) {
    err << "error: " << e.what() << "\n";
    return kExitService;
  } catch (const ServiceError& e) {
    err << "error: " << e.what();
    if (e.request_index()) err << " (request index " << *e.request_index() << ")";
    err << "\n";
    return kExitService;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitGeneric;
  }
  return kExitOk;
}

}  // namespace infoslide
