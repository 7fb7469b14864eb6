#pragma once

// Shared helpers for the unit and acceptance suites: fixture paths, scratch
// directories, synthetic images and independent reference implementations.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "infoslide/raster.hpp"
#include "infoslide/region_schema.hpp"
#include "infoslide/util.hpp"

#ifndef INFOSLIDE_TEST_DATA
#error "INFOSLIDE_TEST_DATA must point at tests/"
#endif

namespace testing_support {

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(INFOSLIDE_TEST_DATA) / rel;
}

inline std::string sample_layout_text() { return infoslide::read_file_text(data_path("data/sample_layout.json")); }

inline infoslide::Layout sample_layout() { return infoslide::parse_layout_or_throw(sample_layout_text()); }

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("infoslide-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Deterministic image where every pixel differs from its neighbors.
inline infoslide::Raster gradient_image(int w, int h, std::uint32_t salt = 0) {
  infoslide::Raster img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.set(x, y,
              {static_cast<std::uint8_t>((x * 7 + salt) & 0xFF), static_cast<std::uint8_t>((y * 13 + salt * 3) & 0xFF),
               static_cast<std::uint8_t>((x * y + salt) & 0xFF), 255});
  return img;
}

inline infoslide::Raster random_image(std::mt19937& rng, int w, int h) {
  infoslide::Raster img(w, h);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.set(x, y, {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                     static_cast<std::uint8_t>(byte(rng)), 255});
  return img;
}

inline infoslide::Region text_region(std::string id, int order, infoslide::PixelBox box, std::string text) {
  infoslide::Region r;
  r.id = std::move(id);
  r.order = order;
  r.kind = infoslide::RegionKind::text;
  r.bbox = box;
  r.text = std::move(text);
  return r;
}

inline infoslide::Region image_region(std::string id, int order, infoslide::PixelBox box) {
  infoslide::Region r;
  r.id = std::move(id);
  r.order = order;
  r.kind = infoslide::RegionKind::image;
  r.bbox = box;
  r.crop_from_infographic = true;
  return r;
}

// ---- Reference implementations ----

/// Levenshtein distance by explicit full-table recurrence.
template <class T>
std::size_t oracle_edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
  return d[a.size()][b.size()];
}

/// Maximum total weight over all one-to-one partial assignments, by trying
/// every permutation of the larger side (entries <= 0 never pair).
inline double oracle_best_assignment(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size();
  const std::size_t cols = rows ? w[0].size() : 0;
  if (rows == 0 || cols == 0) return 0.0;
  const std::size_t n = std::max(rows, cols);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      if (perm[i] < cols && w[i][perm[i]] > 0) total += w[i][perm[i]];
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Intersection over union by counting unit cells (integer boxes only).
inline double oracle_iou_cells(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh) {
  long inter = 0;
  for (int y = std::min(ay, by); y < std::max(ay + ah, by + bh); ++y)
    for (int x = std::min(ax, bx); x < std::max(ax + aw, bx + bw); ++x) {
      bool in_a = x >= ax && x < ax + aw && y >= ay && y < ay + ah;
      bool in_b = x >= bx && x < bx + bw && y >= by && y < by + bh;
      inter += in_a && in_b;
    }
  const long uni = static_cast<long>(aw) * ah + static_cast<long>(bw) * bh - inter;
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline std::string random_word_string(std::mt19937& rng, std::size_t max_len) {
  static const std::string alphabet = "abcde fgh  \n";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[pick(rng)]);
  return s;
}

}  // namespace testing_support
