#pragma once

// Reconstruction fidelity: matches predicted regions to ground truth and
// computes recovery, layout and transcription metrics per run and across runs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "infoslide/region_schema.hpp"

namespace infoslide {

inline double iou(const PixelBox& a, const PixelBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct CenterOffset {
  double px = 0;
  double normalized = 0;
};

inline CenterOffset center_offset(const PixelBox& a, const PixelBox& b, int image_width, int image_height) {
  const double dx = (a.x + a.w / 2) - (b.x + b.w / 2);
  const double dy = (a.y + a.h / 2) - (b.y + b.h / 2);
  const double px = std::hypot(dx, dy);
  return {px, px / std::hypot(static_cast<double>(image_width), static_cast<double>(image_height))};
}

/// Levenshtein distance with unit costs.
template <typename T>
std::size_t edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Code points of a UTF-8 string; stray bytes count as one unit each.
inline std::vector<char32_t> utf8_chars(std::string_view s) {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    bool valid = len > 0 && i + len <= s.size();
    for (int k = 1; valid && k < len; ++k) valid = (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    if (!valid) {
      out.push_back(0xDC00 + c);  // lone surrogate range: cannot collide with decoded text
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? c : c & (0x7F >> len);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::string current;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

struct TextErrorRates {
  double cer = 0;
  double wer = 0;
  std::size_t char_distance = 0;
  std::size_t gt_chars = 0;
};

/// CER and WER of `pred` against `gt`, both whitespace-normalized first.
inline TextErrorRates cer_wer(std::string_view gt, std::string_view pred) {
  const std::string g = normalize_text(gt);
  const std::string p = normalize_text(pred);
  if (g.empty()) throw std::invalid_argument("cer_wer: ground truth text is empty");
  const auto gc = utf8_chars(g);
  const auto pc = utf8_chars(p);
  const auto gw = split_words(g);
  const auto pw = split_words(p);
  TextErrorRates out;
  out.char_distance = edit_distance(gc, pc);
  out.gt_chars = gc.size();
  out.cer = static_cast<double>(out.char_distance) / static_cast<double>(gc.size());
  out.wer = static_cast<double>(edit_distance(gw, pw)) / static_cast<double>(gw.size());
  return out;
}

/// Maximum-weight assignment of rows to columns (Hungarian method with
/// potentials, O(n^2 m)). Returns, for each row, its column or -1.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows > cols) {
    std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t[j][i] = weight[i][j];
    auto col_to_row = max_weight_assignment(t);
    std::vector<int> out(rows, -1);
    for (std::size_t j = 0; j < cols; ++j)
      if (col_to_row[j] >= 0) out[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
    return out;
  }
  // 1-based arrays; cost = -weight, minimized.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0), v(cols + 1, 0);
  std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = -weight[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= cols; ++j)
    if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
  return out;
}

struct MatchedPair {
  std::string gt_id;
  std::string pred_id;
  RegionKind kind = RegionKind::text;
  double iou = 0;
};

struct Matching {
  std::vector<MatchedPair> pairs;
  std::vector<std::string> false_positives;
  std::vector<std::string> false_negatives;

  double total_iou() const {
    double sum = 0;
    for (const auto& p : pairs) sum += p.iou;
    return sum;
  }
};

struct MatchOptions {
  // Pairs need IoU strictly above this to count as a match.
  double min_iou = 0.0;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One-to-one matching within each region kind that maximizes total IoU.
inline Matching match_regions(const Layout& gt, const Layout& pred, const MatchOptions& options = {}) {
  if (gt.image_width != pred.image_width || gt.image_height != pred.image_height)
    throw EvaluationError("image dimensions differ: ground truth " + std::to_string(gt.image_width) + "x" +
                          std::to_string(gt.image_height) + ", prediction " + std::to_string(pred.image_width) + "x" +
                          std::to_string(pred.image_height));
  Matching out;
  for (RegionKind kind : {RegionKind::text, RegionKind::image}) {
    std::vector<const Region*> g;
    std::vector<const Region*> p;
    for (const auto& r : gt.regions)
      if (r.kind == kind) g.push_back(&r);
    for (const auto& r : pred.regions)
      if (r.kind == kind) p.push_back(&r);

    std::vector<std::vector<double>> weight(g.size(), std::vector<double>(p.size(), 0.0));
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j) {
        double v = iou(g[i]->bbox, p[j]->bbox);
        weight[i][j] = v > options.min_iou ? v : 0.0;
      }
    auto assignment = max_weight_assignment(weight);

    std::vector<char> pred_used(p.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      int j = assignment[i];
      if (j >= 0 && weight[i][static_cast<std::size_t>(j)] > 0) {
        out.pairs.push_back({g[i]->id, p[static_cast<std::size_t>(j)]->id, kind, weight[i][static_cast<std::size_t>(j)]});
        pred_used[static_cast<std::size_t>(j)] = 1;
      } else {
        out.false_negatives.push_back(g[i]->id);
      }
    }
    for (std::size_t j = 0; j < p.size(); ++j)
      if (!pred_used[j]) out.false_positives.push_back(p[j]->id);
  }
  return out;
}

struct RunTimings {
  std::optional<double> extraction_s;
  std::optional<double> slides_api_s;
};

/// Metrics for one region kind in one run. Pair statistics are absent when
/// nothing of the kind was matched; the whole struct is absent when the
/// ground truth has no regions of the kind.
struct KindMetrics {
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::size_t matched = 0;
  std::size_t iou_ge_50 = 0;
  std::size_t iou_ge_75 = 0;
  double element_recovery = 0;
  std::optional<double> iou_mean;
  std::optional<double> iou_median;
  std::optional<double> center_offset_mean_px;
  std::optional<double> center_offset_norm;
  std::optional<double> frac_iou_50;
  std::optional<double> frac_iou_75;
};

struct RunMetrics {
  std::string name;
  std::optional<KindMetrics> text;
  std::optional<KindMetrics> image;
  std::optional<double> element_recovery;  // over all kinds
  std::optional<double> frac_iou_50;
  std::optional<double> frac_iou_75;
  std::optional<double> char_recovery;
  std::optional<double> cer_mean;
  std::optional<double> wer_mean;
  RunTimings timings;
  Matching matching;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace detail

inline RunMetrics evaluate_run(const Layout& gt, const Layout& pred, const RunTimings& timings = {},
                               const MatchOptions& options = {}) {
  RunMetrics out;
  out.timings = timings;
  out.matching = match_regions(gt, pred, options);

  auto find = [](const Layout& l, const std::string& id) -> const Region& {
    for (const auto& r : l.regions)
      if (r.id == id) return r;
    throw std::logic_error("matched id not in layout: " + id);
  };

  std::size_t total_gt = 0;
  std::size_t total_matched = 0;
  std::size_t total_50 = 0;
  std::size_t total_75 = 0;
  for (RegionKind kind : {RegionKind::text, RegionKind::image}) {
    KindMetrics m;
    for (const auto& r : gt.regions) m.gt_count += r.kind == kind;
    for (const auto& r : pred.regions) m.pred_count += r.kind == kind;
    if (m.gt_count == 0) continue;
    std::vector<double> ious;
    std::vector<double> offsets;
    std::vector<double> offsets_norm;
    for (const auto& pair : out.matching.pairs) {
      if (pair.kind != kind) continue;
      ious.push_back(pair.iou);
      auto off = center_offset(find(gt, pair.gt_id).bbox, find(pred, pair.pred_id).bbox, gt.image_width, gt.image_height);
      offsets.push_back(off.px);
      offsets_norm.push_back(off.normalized);
      m.iou_ge_50 += pair.iou >= 0.5;
      m.iou_ge_75 += pair.iou >= 0.75;
    }
    m.matched = ious.size();
    m.element_recovery = static_cast<double>(m.matched) / static_cast<double>(m.gt_count);
    if (m.matched) {
      m.iou_mean = detail::mean(ious);
      m.iou_median = detail::median(ious);
      m.center_offset_mean_px = detail::mean(offsets);
      m.center_offset_norm = detail::mean(offsets_norm);
      m.frac_iou_50 = static_cast<double>(m.iou_ge_50) / static_cast<double>(m.matched);
      m.frac_iou_75 = static_cast<double>(m.iou_ge_75) / static_cast<double>(m.matched);
    }
    total_gt += m.gt_count;
    total_matched += m.matched;
    total_50 += m.iou_ge_50;
    total_75 += m.iou_ge_75;
    (kind == RegionKind::text ? out.text : out.image) = m;
  }
  if (total_gt) out.element_recovery = static_cast<double>(total_matched) / static_cast<double>(total_gt);
  if (total_matched) {
    out.frac_iou_50 = static_cast<double>(total_50) / static_cast<double>(total_matched);
    out.frac_iou_75 = static_cast<double>(total_75) / static_cast<double>(total_matched);
  }

  // Recovered characters: gt length minus edit distance, floored at zero;
  // unmatched gt text recovers nothing.
  std::size_t gt_chars = 0;
  for (const auto& r : gt.regions)
    if (r.kind == RegionKind::text) gt_chars += utf8_chars(normalize_text(r.text.value_or(""))).size();
  double recovered = 0;
  std::vector<double> cers;
  std::vector<double> wers;
  for (const auto& pair : out.matching.pairs) {
    if (pair.kind != RegionKind::text) continue;
    auto rates = cer_wer(find(gt, pair.gt_id).text.value_or(""), find(pred, pair.pred_id).text.value_or(""));
    recovered += static_cast<double>(rates.gt_chars > rates.char_distance ? rates.gt_chars - rates.char_distance : 0);
    cers.push_back(rates.cer);
    wers.push_back(rates.wer);
  }
  if (gt_chars) out.char_recovery = recovered / static_cast<double>(gt_chars);
  if (!cers.empty()) {
    out.cer_mean = detail::mean(cers);
    out.wer_mean = detail::mean(wers);
  }
  return out;
}

struct Stat {
  double mean = 0;
  double std = 0;  // population
  std::size_t n = 0;
};

/// Mean and population standard deviation of the present values.
inline std::optional<Stat> summarize(const std::vector<std::optional<double>>& values) {
  std::vector<double> v;
  for (const auto& x : values)
    if (x) v.push_back(*x);
  if (v.empty()) return std::nullopt;
  Stat s;
  s.n = v.size();
  s.mean = detail::mean(v);
  double acc = 0;
  for (double x : v) acc += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(acc / static_cast<double>(v.size()));
  return s;
}

}  // namespace infoslide
