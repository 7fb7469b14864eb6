#pragma once

// HTTP(S) implementations of the backend, uploader and presentation service
// interfaces. Kept apart from the other headers because cpp-httplib is heavy.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <optional>
#include <regex>
#include <string>

#include "infoslide/assets.hpp"
#include "infoslide/extractor.hpp"
#include "infoslide/slide_builder.hpp"

namespace infoslide {

/// Splits "scheme://host[:port]/path" into origin and path ("/" if none).
struct UrlParts {
  std::string origin;
  std::string path;
};

inline UrlParts split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw std::invalid_argument("not an http(s) URL: '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

namespace detail {

inline httplib::Client make_client(const std::string& origin, int timeout_s) {
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  client.set_write_timeout(timeout_s, 0);
  return client;
}

inline std::string snippet(const std::string& body) { return body.size() > 300 ? body.substr(0, 300) + "..." : body; }

}  // namespace detail

/// OpenAI-style chat-completions endpoint taking a text part and an inline
/// image part. Gemini, OpenAI, Claude and OpenRouter all expose one, so a
/// provider is just an endpoint URL, model id and key.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string url, std::string api_key, int timeout_s = 300)
      : url_(std::move(url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

  std::string complete(const BackendCall& call) override {
    auto parts = split_url(url_);
    json body = {{"model", call.model_id},
                 {"temperature", 0},
                 {"messages",
                  {{{"role", "user"},
                    {"content",
                     {{{"type", "text"}, {"text", call.prompt}},
                      {{"type", "image_url"},
                       {"image_url", {{"url", "data:" + call.mime_type + ";base64," + base64_encode(call.image)}}}}}}}}}};
    auto client = detail::make_client(parts.origin, timeout_s_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(parts.path, headers, body.dump(), "application/json");
    if (!res) throw BackendError("backend request to " + url_ + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + detail::snippet(res->body));
    auto doc = json::parse(res->body, nullptr, false);
    if (!doc.is_object() || !doc.contains("choices") || doc["choices"].empty())
      throw BackendError("backend response has no choices: " + detail::snippet(res->body));
    const auto& choice = doc["choices"][0];
    if (choice.value("finish_reason", "") == "length") throw TruncatedResponseError("backend response was truncated");
    const auto& content = choice["message"]["content"];
    if (content.is_string()) return content.get<std::string>();
    // Some providers return content as a list of parts.
    std::string text;
    if (content.is_array())
      for (const auto& part : content)
        if (part.value("type", "") == "text") text += part.value("text", "");
    return text;
  }

 private:
  std::string url_;
  std::string api_key_;
  int timeout_s_;
};

/// PUTs each asset to `<upload_endpoint>/<content_name>`. The public URL is
/// taken from a JSON `url` field in the response, else `public_base_url`.
class HttpUploader : public Uploader {
 public:
  HttpUploader(std::string upload_endpoint, std::string public_base_url, std::string token = {}, int timeout_s = 60)
      : endpoint_(std::move(upload_endpoint)),
        base_url_(std::move(public_base_url)),
        token_(std::move(token)),
        timeout_s_(timeout_s) {
    if (!endpoint_.empty() && endpoint_.back() != '/') endpoint_.push_back('/');
    if (!base_url_.empty() && base_url_.back() != '/') base_url_.push_back('/');
  }

  std::string upload(const std::string& content_name, std::span<const std::uint8_t> bytes) override {
    auto parts = split_url(endpoint_ + content_name);
    auto client = detail::make_client(parts.origin, timeout_s_);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client.Put(parts.path, headers, reinterpret_cast<const char*>(bytes.data()), bytes.size(), "image/png");
    if (!res) throw UploadError("upload of " + content_name + " failed: " + httplib::to_string(res.error()), true);
    if (res->status < 200 || res->status >= 300)
      throw UploadError("upload of " + content_name + " returned HTTP " + std::to_string(res->status) + ": " +
                            detail::snippet(res->body),
                        res->status >= 500 || res->status == 429);
    auto doc = json::parse(res->body, nullptr, false);
    if (doc.is_object() && doc.contains("url") && doc["url"].is_string()) return doc["url"].get<std::string>();
    return base_url_ + content_name;
  }

 private:
  std::string endpoint_;
  std::string base_url_;
  std::string token_;
  int timeout_s_;
};

/// Live presentation service speaking the batchUpdate REST API.
class HttpSlidesService : public PresentationService {
 public:
  explicit HttpSlidesService(std::string token, std::string endpoint = "https://slides.googleapis.com", int timeout_s = 120)
      : token_(std::move(token)), endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
  }

  json batch_update(const std::string& presentation_id, const json& body) override {
    auto parts = split_url(endpoint_ + "/v1/presentations/" + presentation_id + ":batchUpdate");
    auto client = detail::make_client(parts.origin, timeout_s_);
    auto res = client.Post(parts.path, headers(), body.dump(), "application/json");
    if (!res) throw ServiceError("batchUpdate failed: " + httplib::to_string(res.error()), std::nullopt, true);
    if (res->status < 200 || res->status >= 300) throw rejection(res->status, res->body);
    return json::parse(res->body, nullptr, false);
  }

  std::set<std::string> existing_object_ids(const std::string& presentation_id) override {
    auto parts = split_url(endpoint_ + "/v1/presentations/" + presentation_id);
    auto client = detail::make_client(parts.origin, timeout_s_);
    auto res = client.Get(parts.path + "?fields=slides(objectId,pageElements(objectId))", headers());
    if (!res) throw ServiceError("presentation lookup failed: " + httplib::to_string(res.error()), std::nullopt, true);
    if (res->status < 200 || res->status >= 300) throw rejection(res->status, res->body);
    std::set<std::string> ids;
    auto doc = json::parse(res->body, nullptr, false);
    if (doc.is_object() && doc.contains("slides"))
      for (const auto& slide : doc["slides"]) {
        if (slide.contains("objectId")) ids.insert(slide["objectId"].get<std::string>());
        if (slide.contains("pageElements"))
          for (const auto& el : slide["pageElements"])
            if (el.contains("objectId")) ids.insert(el["objectId"].get<std::string>());
      }
    return ids;
  }

  /// Pulls the offending request index out of an error body such as
  /// "Invalid requests[3].createImage: ...".
  static std::optional<std::size_t> request_index_from(const std::string& body) {
    static const std::regex re(R"(requests\[(\d+)\])");
    std::smatch m;
    if (std::regex_search(body, m, re)) return static_cast<std::size_t>(std::stoul(m[1].str()));
    return std::nullopt;
  }

 private:
  httplib::Headers headers() const { return {{"Authorization", "Bearer " + token_}}; }

  static ServiceError rejection(int status, const std::string& body) {
    auto doc = json::parse(body, nullptr, false);
    std::string message = body;
    if (doc.is_object() && doc.contains("error") && doc["error"].is_object())
      message = doc["error"].value("message", body);
    auto index = request_index_from(message);
    std::string what = "service rejected the batch (HTTP " + std::to_string(status) + ")";
    if (index) what += " at request " + std::to_string(*index);
    return ServiceError(what + ": " + detail::snippet(message), index, false);
  }

  std::string token_;
  std::string endpoint_;
  int timeout_s_;
};

}  // namespace infoslide
