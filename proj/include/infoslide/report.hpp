#pragma once

// Aggregate evaluation report: mean +- population std across runs, laid out
// with the standard row and column names, plus globally pooled IoU fractions.

#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "infoslide/evaluation.hpp"

namespace infoslide {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kColumnText = "Text";
inline constexpr const char* kColumnImage = "Image";
inline constexpr const char* kColumnOverall = "Overall / global";

inline const std::vector<std::string>& report_row_names() {
  static const std::vector<std::string> names{
      "Element recovery rate",   "Character recovery rate", "Mean IoU",         "Median IoU",
      "Mean center offset (px)", "Mean CER / WER",          "Frac. IoU ≥ 0.5",  "Frac. IoU ≥ 0.75",
      "VLM extraction time (s)", "Slides API time (s)"};
  return names;
}

struct ReportRow {
  std::string metric;
  std::optional<Stat> text;
  std::optional<Stat> image;
  std::optional<Stat> overall;
  std::optional<Stat> text_wer;  // second value of the CER / WER row
  bool spans_columns = false;    // timing rows cover the whole run
  int decimals = 3;
};

struct PooledFractions {
  std::optional<double> text;
  std::optional<double> image;
  std::optional<double> overall;
};

struct AggregateReport {
  std::size_t runs = 0;
  std::vector<ReportRow> rows;
  PooledFractions pooled_iou_50;
  PooledFractions pooled_iou_75;
  std::optional<Stat> center_offset_norm_text;
  std::optional<Stat> center_offset_norm_image;
  std::vector<RunMetrics> per_run;
};

namespace detail {

using Getter = std::function<std::optional<double>(const RunMetrics&)>;

inline std::optional<Stat> across(const std::vector<RunMetrics>& runs, const Getter& get) {
  std::vector<std::optional<double>> v;
  v.reserve(runs.size());
  for (const auto& r : runs) v.push_back(get(r));
  return summarize(v);
}

inline Getter kind_field(bool text, std::optional<double> KindMetrics::*field) {
  return [=](const RunMetrics& r) -> std::optional<double> {
    const auto& k = text ? r.text : r.image;
    return k ? (*k).*field : std::nullopt;
  };
}

inline Getter kind_recovery(bool text) {
  return [=](const RunMetrics& r) -> std::optional<double> {
    const auto& k = text ? r.text : r.image;
    return k ? std::optional<double>(k->element_recovery) : std::nullopt;
  };
}

inline PooledFractions pool(const std::vector<RunMetrics>& runs, std::size_t KindMetrics::*count) {
  std::size_t hits[2] = {0, 0};
  std::size_t matched[2] = {0, 0};
  for (const auto& r : runs) {
    if (r.text) {
      hits[0] += (*r.text).*count;
      matched[0] += r.text->matched;
    }
    if (r.image) {
      hits[1] += (*r.image).*count;
      matched[1] += r.image->matched;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b ? std::optional<double>(double(a) / double(b)) : std::nullopt; };
  return {ratio(hits[0], matched[0]), ratio(hits[1], matched[1]), ratio(hits[0] + hits[1], matched[0] + matched[1])};
}

}  // namespace detail

inline AggregateReport aggregate(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw EvaluationError("aggregate: no runs to aggregate");
  using detail::across;
  using detail::kind_field;
  AggregateReport rep;
  rep.runs = runs.size();
  rep.per_run = runs;
  const auto& names = report_row_names();

  rep.rows.push_back({names[0], across(runs, detail::kind_recovery(true)), across(runs, detail::kind_recovery(false)),
                      across(runs, [](const RunMetrics& r) { return r.element_recovery; })});
  rep.rows.push_back({names[1], across(runs, [](const RunMetrics& r) { return r.char_recovery; }), {}, {}});
  rep.rows.push_back({names[2], across(runs, kind_field(true, &KindMetrics::iou_mean)),
                      across(runs, kind_field(false, &KindMetrics::iou_mean)), {}});
  rep.rows.push_back({names[3], across(runs, kind_field(true, &KindMetrics::iou_median)),
                      across(runs, kind_field(false, &KindMetrics::iou_median)), {}});
  ReportRow offset{names[4], across(runs, kind_field(true, &KindMetrics::center_offset_mean_px)),
                   across(runs, kind_field(false, &KindMetrics::center_offset_mean_px)), {}};
  offset.decimals = 1;
  rep.rows.push_back(offset);
  ReportRow text_err{names[5], across(runs, [](const RunMetrics& r) { return r.cer_mean; }), {}, {}};
  text_err.text_wer = across(runs, [](const RunMetrics& r) { return r.wer_mean; });
  rep.rows.push_back(text_err);
  rep.rows.push_back({names[6], across(runs, kind_field(true, &KindMetrics::frac_iou_50)),
                      across(runs, kind_field(false, &KindMetrics::frac_iou_50)),
                      across(runs, [](const RunMetrics& r) { return r.frac_iou_50; })});
  rep.rows.push_back({names[7], across(runs, kind_field(true, &KindMetrics::frac_iou_75)),
                      across(runs, kind_field(false, &KindMetrics::frac_iou_75)),
                      across(runs, [](const RunMetrics& r) { return r.frac_iou_75; })});
  for (int i = 0; i < 2; ++i) {
    ReportRow timing{names[8 + i], {}, {}, across(runs, [i](const RunMetrics& r) {
                       return i == 0 ? r.timings.extraction_s : r.timings.slides_api_s;
                     })};
    timing.spans_columns = true;
    rep.rows.push_back(timing);
  }

  rep.pooled_iou_50 = detail::pool(runs, &KindMetrics::iou_ge_50);
  rep.pooled_iou_75 = detail::pool(runs, &KindMetrics::iou_ge_75);
  rep.center_offset_norm_text = across(runs, kind_field(true, &KindMetrics::center_offset_norm));
  rep.center_offset_norm_image = across(runs, kind_field(false, &KindMetrics::center_offset_norm));
  return rep;
}

namespace detail {

inline ordered_json stat_json(const std::optional<Stat>& s) {
  if (!s) return nullptr;
  ordered_json j;
  j["mean"] = s->mean;
  j["std"] = s->std;
  j["n"] = s->n;
  return j;
}

inline ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

inline ordered_json kind_json(const std::optional<KindMetrics>& k) {
  if (!k) return nullptr;
  ordered_json j;
  j["gt_count"] = k->gt_count;
  j["pred_count"] = k->pred_count;
  j["matched"] = k->matched;
  j["element_recovery"] = k->element_recovery;
  j["iou_mean"] = opt_json(k->iou_mean);
  j["iou_median"] = opt_json(k->iou_median);
  j["center_offset_mean_px"] = opt_json(k->center_offset_mean_px);
  j["center_offset_norm"] = opt_json(k->center_offset_norm);
  j["frac_iou_50"] = opt_json(k->frac_iou_50);
  j["frac_iou_75"] = opt_json(k->frac_iou_75);
  return j;
}

inline ordered_json pooled_json(const PooledFractions& p) {
  ordered_json j;
  j[kColumnText] = opt_json(p.text);
  j[kColumnImage] = opt_json(p.image);
  j[kColumnOverall] = opt_json(p.overall);
  return j;
}

}  // namespace detail

inline ordered_json run_metrics_to_json(const RunMetrics& r) {
  using detail::opt_json;
  ordered_json j;
  j["name"] = r.name;
  j["text"] = detail::kind_json(r.text);
  j["image"] = detail::kind_json(r.image);
  j["element_recovery"] = opt_json(r.element_recovery);
  j["frac_iou_50"] = opt_json(r.frac_iou_50);
  j["frac_iou_75"] = opt_json(r.frac_iou_75);
  j["char_recovery"] = opt_json(r.char_recovery);
  j["cer_mean"] = opt_json(r.cer_mean);
  j["wer_mean"] = opt_json(r.wer_mean);
  j["vlm_extraction_s"] = opt_json(r.timings.extraction_s);
  j["slides_api_s"] = opt_json(r.timings.slides_api_s);
  ordered_json pairs = ordered_json::array();
  for (const auto& p : r.matching.pairs)
    pairs.push_back({{"gt", p.gt_id}, {"pred", p.pred_id}, {"type", std::string(to_string(p.kind))}, {"iou", p.iou}});
  j["pairs"] = pairs;
  j["false_positives"] = r.matching.false_positives;
  j["false_negatives"] = r.matching.false_negatives;
  return j;
}

/// Machine-readable report. `table` keeps row order; every row carries all
/// three column keys, null where the cell does not apply or has no data.
inline ordered_json report_to_json(const AggregateReport& rep) {
  ordered_json j;
  j["runs"] = rep.runs;
  j["columns"] = {kColumnText, kColumnImage, kColumnOverall};
  ordered_json table = ordered_json::array();
  for (const auto& row : rep.rows) {
    ordered_json r;
    r["metric"] = row.metric;
    if (row.text_wer) {
      r[kColumnText] = {{"cer", detail::stat_json(row.text)}, {"wer", detail::stat_json(row.text_wer)}};
    } else {
      r[kColumnText] = detail::stat_json(row.text);
    }
    r[kColumnImage] = detail::stat_json(row.image);
    r[kColumnOverall] = detail::stat_json(row.overall);
    if (row.spans_columns) r["spans_columns"] = true;
    table.push_back(r);
  }
  j["table"] = table;
  j["global_pooled"] = {{"Frac. IoU ≥ 0.5", detail::pooled_json(rep.pooled_iou_50)},
                        {"Frac. IoU ≥ 0.75", detail::pooled_json(rep.pooled_iou_75)}};
  j["supplementary"] = {{"Mean center offset (normalized by image diagonal)",
                         {{kColumnText, detail::stat_json(rep.center_offset_norm_text)},
                          {kColumnImage, detail::stat_json(rep.center_offset_norm_image)}}}};
  ordered_json runs = ordered_json::array();
  for (const auto& r : rep.per_run) runs.push_back(run_metrics_to_json(r));
  j["per_run"] = runs;
  return j;
}

namespace detail {

inline std::string fmt_stat(const std::optional<Stat>& s, int decimals) {
  if (!s) return "--";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, s->mean, decimals, s->std);
  return buf;
}

inline std::string fmt_fraction(const std::optional<double>& v) {
  if (!v) return "--";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", *v * 100.0);
  return buf;
}

// Display width, counting each UTF-8 code point once.
inline std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

inline std::string pad(const std::string& s, std::size_t width) {
  auto w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

}  // namespace detail

/// Aligned plain-text rendering of the report.
inline std::string report_table(const AggregateReport& rep) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Metric", kColumnText, kColumnImage, kColumnOverall});
  for (const auto& row : rep.rows) {
    std::string text = detail::fmt_stat(row.text, row.decimals);
    if (row.text_wer) text += " / " + detail::fmt_stat(row.text_wer, row.decimals);
    if (row.spans_columns) {
      cells.push_back({row.metric, "", "", detail::fmt_stat(row.overall, row.decimals)});
    } else {
      cells.push_back({row.metric, text, detail::fmt_stat(row.image, row.decimals), detail::fmt_stat(row.overall, row.decimals)});
    }
  }
  std::size_t widths[4] = {0, 0, 0, 0};
  for (const auto& r : cells)
    for (std::size_t c = 0; c < 4; ++c) widths[c] = std::max(widths[c], detail::display_width(r[c]));
  std::ostringstream out;
  out << "Runs: " << rep.runs << "\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < 4; ++c) out << (c ? " | " : "") << detail::pad(cells[i][c], widths[c]);
    out << "\n";
    if (i == 0) {
      for (std::size_t c = 0; c < 4; ++c) out << (c ? "-+-" : "") << std::string(widths[c], '-');
      out << "\n";
    }
  }
  out << "Globally pooled over matched elements: IoU ≥ 0.5: text " << detail::fmt_fraction(rep.pooled_iou_50.text)
      << ", image " << detail::fmt_fraction(rep.pooled_iou_50.image) << ", all "
      << detail::fmt_fraction(rep.pooled_iou_50.overall) << "; IoU ≥ 0.75: text "
      << detail::fmt_fraction(rep.pooled_iou_75.text) << ", image " << detail::fmt_fraction(rep.pooled_iou_75.image)
      << ", all " << detail::fmt_fraction(rep.pooled_iou_75.overall) << "\n";
  return out.str();
}

}  // namespace infoslide
