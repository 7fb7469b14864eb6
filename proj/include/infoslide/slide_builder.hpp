#pragma once

// Slide request batches: deterministic object ids, batch construction in
// points, batchUpdate serialization, and execution against a presentation
// service.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "infoslide/geometry.hpp"
#include "infoslide/region_schema.hpp"
#include "infoslide/util.hpp"

namespace infoslide {

inline constexpr std::size_t kObjectIdMinLength = 5;
inline constexpr std::size_t kObjectIdMaxLength = 50;

inline bool is_valid_object_id(std::string_view id) {
  auto word = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'; };
  if (id.size() < kObjectIdMinLength || id.size() > kObjectIdMaxLength || !word(id.front())) return false;
  for (char c : id.substr(1))
    if (!word(c) && c != '-') return false;
  return true;
}

/// Prefix + region id with disallowed characters replaced by '_'. Ids that
/// would exceed 50 chars keep 40 and gain 10 hex chars of the id's digest.
inline std::string make_object_id(std::string_view prefix, std::string_view source_id) {
  std::string out(prefix);
  for (char c : source_id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    out.push_back(ok ? c : '_');
  }
  while (out.size() < kObjectIdMinLength) out.push_back('_');
  if (out.size() > kObjectIdMaxLength) out = out.substr(0, 40) + sha256_hex(source_id).substr(0, 10);
  return out;
}

inline std::string object_id_for(const Region& region) {
  return make_object_id(region.kind == RegionKind::text ? "TXT_" : "IMG_", region.id);
}

inline std::string background_object_id(std::string_view page_id) { return make_object_id("BG_", page_id); }

enum class RequestKind { create_slide, create_text_box, insert_text, update_text_style, create_image, delete_object };

struct TextStyle {
  std::string font_family;
  double font_size_pt = 0;
  bool bold = false;
};

struct SlideRequest {
  RequestKind kind = RequestKind::create_slide;
  std::string object_id;
  std::string page_id;
  std::optional<PointRect> geometry;
  std::string text;
  std::optional<TextStyle> style;
  std::string url;
};

struct RequestBatch {
  std::vector<SlideRequest> requests;
  std::string presentation_id;
  std::string page_id;
};

struct BuildOptions {
  SlidePageSize page;
  bool expand_widths = false;
  double margin_pt = 6.0;
  double gap_pt = 4.0;
  std::string page_id = "SLIDE_main";
  std::string presentation_id;
  std::string default_font_family = "Arial";
  double default_font_size_pt = 12.0;  // before scaling to the page
  // Snap emitted font sizes to this step (0 disables; 0.5 mimics slide engines).
  double font_size_step = 0.0;
};

class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline TextStyle text_style_for(const Region& region, const FitTransform& fit, const BuildOptions& options,
                                double* base_out = nullptr) {
  const StyleHints hints = region.style.value_or(StyleHints{});
  const double base = base_font_pt(hints.font_size_pt.value_or(options.default_font_size_pt), fit);
  if (base_out) *base_out = base;
  return {hints.font_family.value_or(options.default_font_family), calibrate_font(base), hints.bold.value_or(false)};
}

/// Assembles the single batch that recreates the infographic on one slide:
/// create_slide, then the optional full-page background image, then every
/// region in layout order (text: create box, insert text, style it).
inline RequestBatch build_requests_for_infographic(const Layout& layout, const FitTransform& fit,
                                                   const std::map<std::string, std::string>& asset_urls,
                                                   const std::optional<std::string>& background_url,
                                                   const BuildOptions& options = {}) {
  if (!is_valid_object_id(options.page_id)) throw BuildError("invalid page id '" + options.page_id + "'");
  RequestBatch batch;
  batch.presentation_id = options.presentation_id;
  batch.page_id = options.page_id;

  std::set<std::string> ids{options.page_id};
  auto claim = [&](const std::string& id) {
    if (!ids.insert(id).second) throw BuildError("duplicate object id '" + id + "' in batch");
  };

  SlideRequest slide;
  slide.kind = RequestKind::create_slide;
  slide.object_id = options.page_id;
  batch.requests.push_back(slide);

  if (background_url) {
    SlideRequest bg;
    bg.kind = RequestKind::create_image;
    bg.object_id = background_object_id(options.page_id);
    claim(bg.object_id);
    bg.page_id = options.page_id;
    bg.geometry = PointRect{0, 0, options.page.width_pt, options.page.height_pt};
    bg.url = *background_url;
    batch.requests.push_back(bg);
  }

  std::vector<PointRect> mapped;
  mapped.reserve(layout.regions.size());
  for (const auto& r : layout.regions) mapped.push_back(bbox_px_to_pt(r.bbox, fit));

  for (std::size_t i = 0; i < layout.regions.size(); ++i) {
    const Region& region = layout.regions[i];
    const std::string id = object_id_for(region);
    claim(id);
    PointRect rect = mapped[i];

    if (region.kind == RegionKind::image) {
      auto url = asset_urls.find(region.id);
      if (url == asset_urls.end()) throw BuildError("no asset URL for image region '" + region.id + "'");
      SlideRequest img;
      img.kind = RequestKind::create_image;
      img.object_id = id;
      img.page_id = options.page_id;
      img.geometry = rect;
      img.url = url->second;
      batch.requests.push_back(img);
      continue;
    }

    double base = 0;
    TextStyle style = text_style_for(region, fit, options, &base);
    if (options.expand_widths) {
      std::vector<PointRect> neighbors;
      neighbors.reserve(mapped.size());
      for (std::size_t j = 0; j < mapped.size(); ++j)
        if (j != i) neighbors.push_back(mapped[j]);
      rect.w = expand_width(rect, style.font_size_pt / base, neighbors, options.page, options.margin_pt, options.gap_pt);
    }
    if (options.font_size_step > 0)
      style.font_size_pt = std::round(style.font_size_pt / options.font_size_step) * options.font_size_step;

    SlideRequest box;
    box.kind = RequestKind::create_text_box;
    box.object_id = id;
    box.page_id = options.page_id;
    box.geometry = rect;
    batch.requests.push_back(box);

    SlideRequest insert;
    insert.kind = RequestKind::insert_text;
    insert.object_id = id;
    insert.text = region.text.value_or("");
    batch.requests.push_back(insert);

    SlideRequest styled;
    styled.kind = RequestKind::update_text_style;
    styled.object_id = id;
    styled.style = style;
    batch.requests.push_back(styled);
  }
  return batch;
}

namespace detail {

// Two decimals; never emits negative zero.
inline double round2(double v) {
  double r = std::round(v * 100.0) / 100.0;
  return r == 0.0 ? 0.0 : r;
}

inline json dimension(double pt) { return {{"magnitude", round2(pt)}, {"unit", "PT"}}; }

inline json element_properties(const std::string& page_id, const PointRect& rect) {
  return {{"pageObjectId", page_id},
          {"size", {{"width", dimension(rect.w)}, {"height", dimension(rect.h)}}},
          {"transform",
           {{"scaleX", 1}, {"scaleY", 1}, {"translateX", round2(rect.x)}, {"translateY", round2(rect.y)}, {"unit", "PT"}}}};
}

}  // namespace detail

inline json request_to_json(const SlideRequest& r) {
  switch (r.kind) {
    case RequestKind::create_slide:
      return {{"createSlide", {{"objectId", r.object_id}, {"slideLayoutReference", {{"predefinedLayout", "BLANK"}}}}}};
    case RequestKind::create_text_box:
      return {{"createShape",
               {{"objectId", r.object_id},
                {"shapeType", "TEXT_BOX"},
                {"elementProperties", detail::element_properties(r.page_id, *r.geometry)}}}};
    case RequestKind::insert_text:
      return {{"insertText", {{"objectId", r.object_id}, {"insertionIndex", 0}, {"text", r.text}}}};
    case RequestKind::update_text_style:
      return {{"updateTextStyle",
               {{"objectId", r.object_id},
                {"textRange", {{"type", "ALL"}}},
                {"style",
                 {{"fontFamily", r.style->font_family},
                  {"fontSize", detail::dimension(r.style->font_size_pt)},
                  {"bold", r.style->bold}}},
                {"fields", "fontFamily,fontSize,bold"}}}};
    case RequestKind::create_image:
      return {{"createImage",
               {{"objectId", r.object_id},
                {"url", r.url},
                {"elementProperties", detail::element_properties(r.page_id, *r.geometry)}}}};
    case RequestKind::delete_object:
      return {{"deleteObject", {{"objectId", r.object_id}}}};
  }
  throw std::logic_error("unknown request kind");
}

/// The batchUpdate body: {"requests": [...]}.
inline json batch_to_json(const RequestBatch& batch) {
  json body = {{"requests", json::array()}};
  for (const auto& r : batch.requests) body["requests"].push_back(request_to_json(r));
  return body;
}

inline std::string serialize_batch(const RequestBatch& batch) { return batch_to_json(batch).dump(2) + "\n"; }

/// Ids of the objects a batch creates, in request order.
inline std::vector<std::string> created_object_ids(const RequestBatch& batch) {
  std::vector<std::string> ids;
  for (const auto& r : batch.requests)
    if (r.kind == RequestKind::create_slide || r.kind == RequestKind::create_text_box || r.kind == RequestKind::create_image)
      ids.push_back(r.object_id);
  return ids;
}

class ServiceError : public std::runtime_error {
 public:
  ServiceError(const std::string& what, std::optional<std::size_t> request_index = std::nullopt, bool transport = false)
      : std::runtime_error(what), request_index_(request_index), transport_(transport) {}

  std::optional<std::size_t> request_index() const { return request_index_; }
  bool transport() const { return transport_; }

 private:
  std::optional<std::size_t> request_index_;
  bool transport_;
};

class PresentationService {
 public:
  virtual ~PresentationService() = default;
  /// Applies a batchUpdate body in one round trip; all-or-nothing.
  virtual json batch_update(const std::string& presentation_id, const json& body) = 0;
  /// Object ids (pages and page elements) already present in the presentation.
  virtual std::set<std::string> existing_object_ids(const std::string& presentation_id) = 0;
};

struct ExecutionReport {
  double elapsed_s = 0;
  std::vector<std::string> object_ids;
  json response;
};

struct ExecuteOptions {
  // Delete objects left by an earlier run before recreating them.
  bool replace = false;
};

inline ExecutionReport execute_batch(const RequestBatch& batch, PresentationService& service,
                                     const ExecuteOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  RequestBatch to_send = batch;
  if (options.replace) {
    auto existing = service.existing_object_ids(batch.presentation_id);
    std::vector<SlideRequest> deletes;
    auto remove = [&](const std::string& id) {
      SlideRequest del;
      del.kind = RequestKind::delete_object;
      del.object_id = id;
      deletes.push_back(del);
    };
    if (existing.count(batch.page_id)) {
      // Deleting the page takes every element created on it along.
      remove(batch.page_id);
    } else {
      for (const auto& id : created_object_ids(batch))
        if (existing.count(id)) remove(id);
    }
    to_send.requests.insert(to_send.requests.begin(), deletes.begin(), deletes.end());
  }
  ExecutionReport report;
  report.response = service.batch_update(batch.presentation_id, batch_to_json(to_send));
  report.object_ids = created_object_ids(batch);
  report.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Writes each batch body to a file instead of a live service.
class FileSinkService : public PresentationService {
 public:
  explicit FileSinkService(std::filesystem::path path) : path_(std::move(path)) {}

  json batch_update(const std::string&, const json& body) override {
    atomic_write_file(path_, body.dump(2) + "\n");
    return json::object();
  }

  std::set<std::string> existing_object_ids(const std::string&) override { return {}; }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// In-memory service that tracks object ids per presentation and can be
/// scripted to reject a request index or a whole call.
class MockPresentationService : public PresentationService {
 public:
  std::optional<std::size_t> reject_index;
  bool fail_transport = false;

  json batch_update(const std::string& presentation_id, const json& body) override {
    ++calls_;
    if (fail_transport) throw ServiceError("mock transport failure", std::nullopt, true);
    auto objects = objects_[presentation_id];
    const auto& requests = body.at("requests");
    for (std::size_t i = 0; i < requests.size(); ++i) {
      if (reject_index && *reject_index == i) throw ServiceError("requests[" + std::to_string(i) + "] rejected by mock", i);
      const auto& [name, args] = *requests[i].items().begin();
      const std::string id = args.at("objectId");
      const std::string where = "requests[" + std::to_string(i) + "]: ";
      if (name == "deleteObject") {
        if (!objects.erase(id)) throw ServiceError(where + "object '" + id + "' not found", i);
        std::erase_if(objects, [&](const auto& entry) { return entry.second == id; });
      } else if (name == "createSlide" || name == "createShape" || name == "createImage") {
        std::string parent;
        if (args.contains("elementProperties")) parent = args["elementProperties"].value("pageObjectId", "");
        if (!objects.emplace(id, parent).second) throw ServiceError(where + "object id '" + id + "' already exists", i);
      } else if (!objects.count(id)) {
        throw ServiceError(where + "object '" + id + "' not found", i);
      }
    }
    objects_[presentation_id] = std::move(objects);
    last_body_ = body;
    return {{"presentationId", presentation_id}, {"replies", json::array()}};
  }

  std::set<std::string> existing_object_ids(const std::string& presentation_id) override {
    std::set<std::string> ids;
    if (auto it = objects_.find(presentation_id); it != objects_.end())
      for (const auto& [id, _] : it->second) ids.insert(id);
    return ids;
  }

  std::size_t calls() const { return calls_; }
  const json& last_body() const { return last_body_; }

 private:
  // presentation -> (object id -> parent page id)
  std::map<std::string, std::map<std::string, std::string>> objects_;
  std::size_t calls_ = 0;
  json last_body_;
};

}  // namespace infoslide
