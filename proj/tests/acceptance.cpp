// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "infoslide/benchmark.hpp"
#include "infoslide/cli.hpp"
#include "support.hpp"

using namespace infoslide;
using testing_support::ScratchDir;

namespace {

/// Collects failure messages for one criterion; stops recording after a few.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_.size() < 5) failures_.push_back(what);
    ++count_;
  }
  bool ok() const { return count_ == 0; }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    if (count_ > failures_.size()) s += "; ... " + std::to_string(count_ - failures_.size()) + " more";
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t count_ = 0;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)}); }

void typography(Check& c) {
  c.expect(std::abs(calibrate_font(5.5) - 8.0) <= 0.01, "calibrate_font(5.5) = " + num(calibrate_font(5.5)));
  for (double f = 14.0; f <= 200.0; f += 0.25) c.expect(calibrate_font(f) == f, "calibrate_font(" + num(f) + ") changed");
  c.expect(std::abs(calibrate_font(10) - 11.176) < 1e-12, "calibrate_font(10) = " + num(calibrate_font(10)));
  double prev = 0.0;
  for (int i = 1; i <= 100000; ++i) {
    const double f = i * 0.001;
    const double out = calibrate_font(f);
    c.expect(out >= f, "calibrate_font(" + num(f) + ") < input");
    c.expect(out >= prev, "not monotone at " + num(f));
    prev = out;
  }
}

void geometry(Check& c) {
  auto fit = compute_fit(1600, 900, {720, 405});
  c.expect(fit.scale == 0.45 && fit.dx == 0.0 && fit.dy == 0.0,
           "fit = (" + num(fit.scale) + ", " + num(fit.dx) + ", " + num(fit.dy) + ")");
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> dim(1, 4000);
  for (int i = 0; i < 1000; ++i) {
    const int wi = dim(rng), hi = dim(rng);
    auto f = compute_fit(wi, hi, {720, 405});
    std::uniform_real_distribution<double> ux(0, wi), uy(0, hi);
    const double x = ux(rng), y = uy(rng);
    std::uniform_real_distribution<double> uw(1e-3, wi - x + 1e-3), uh(1e-3, hi - y + 1e-3);
    PixelBox box{x, y, uw(rng), uh(rng)};
    auto pt = bbox_px_to_pt(box, f);
    c.expect(rel_close(pt.w / pt.h, box.w / box.h, 1e-9), "aspect ratio changed for box " + std::to_string(i));
    auto back = bbox_pt_to_px(pt, f);
    c.expect(rel_close(back.x, box.x, 1e-9) && rel_close(back.y, box.y, 1e-9) && rel_close(back.w, box.w, 1e-9) &&
                 rel_close(back.h, box.h, 1e-9),
             "round trip drifted for box " + std::to_string(i));
  }
}

void crop_padding(Check& c) {
  std::mt19937 rng(77);
  for (int i = 0; i < 500; ++i) {
    const int wi = 20 + static_cast<int>(rng() % 180), hi = 20 + static_cast<int>(rng() % 180);
    auto img = testing_support::random_image(rng, wi, hi);
    const int x = static_cast<int>(rng() % wi), y = static_cast<int>(rng() % hi);
    const int w = 1 + static_cast<int>(rng() % (wi - x)), h = 1 + static_cast<int>(rng() % (hi - y));
    auto crop = crop_region(img, {double(x), double(y), double(w), double(h)});
    const int x1 = std::min(x + w + 10, wi), y1 = std::min(y + h + 10, hi);
    auto span = crop_span({double(x), double(y), double(w), double(h)}, wi, hi);
    c.expect(span.x0 == x && span.y0 == y && span.x1 == x1 && span.y1 == y1, "span mismatch on box " + std::to_string(i));
    c.expect(crop.width() == x1 - x && crop.height() == y1 - y, "crop size mismatch on box " + std::to_string(i));
    if (crop.width() > 0 && crop.height() > 0)
      c.expect(crop.at(0, 0) == img.at(x, y), "top-left pixel mismatch on box " + std::to_string(i));
  }
}

void width_expansion(Check& c) {
  const SlidePageSize page{720, 405};
  std::vector<PointRect> one{{230, 55, 60, 20}};
  c.expect(expand_width({100, 50, 100, 20}, 1.0, one, page, 6, 4) == 100, "ratio 1 changed width");
  c.expect(std::abs(expand_width({100, 50, 100, 20}, 1.45, one, page, 6, 4) - 126) < 1e-9, "neighbor cap example");
  c.expect(std::abs(expand_width({600, 50, 100, 20}, 1.5, {}, page, 6, 4) - 114) < 1e-9, "boundary cap example");

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> ux(0, 700), uy(0, 400), uw(1, 200), uh(1, 80), ur(1, 4);
  for (int i = 0; i < 5000; ++i) {
    PointRect rect{ux(rng), uy(rng), uw(rng), uh(rng)};
    std::vector<PointRect> neighbors;
    for (int k = static_cast<int>(rng() % 10); k > 0; --k) neighbors.push_back({ux(rng), uy(rng), uw(rng), uh(rng)});
    const double w = expand_width(rect, ur(rng), neighbors, page, 6, 4);
    c.expect(w >= rect.w, "shrank width");
    if (w == rect.w) continue;
    c.expect(rect.x + w <= 720 - 6 + 1e-9, "crossed the boundary margin");
    for (const auto& n : neighbors) {
      const bool overlaps = std::min(rect.bottom(), n.bottom()) - std::max(rect.y, n.y) > 0;
      if (overlaps && n.x > rect.x) c.expect(rect.x + w <= n.x - 4 + 1e-9, "violated a neighbor gap");
    }
  }
}

void deterministic_batches(Check& c) {
  const std::map<std::string, std::string> urls{{"image_social_proof", "https://assets.example.test/social_proof.png"}};
  auto layout = testing_support::sample_layout();
  auto build = [&] { return serialize_batch(build_requests_for_infographic(layout, compute_fit(1600, 900, {}), urls, std::nullopt)); };
  const auto first = build();
  c.expect(first == build(), "two builds differ");
  c.expect(first == read_file_text(testing_support::data_path("golden/sample_layout.batch.json")), "golden file mismatch");
  auto doc = json::parse(first);
  c.expect(doc["requests"].size() == 5, "expected 5 requests");
  const auto& shape = doc["requests"][1]["createShape"]["elementProperties"];
  c.expect(shape["transform"]["translateX"] == 15.75 && shape["transform"]["translateY"] == 20.25 &&
               shape["size"]["width"]["magnitude"] == 675.0 && shape["size"]["height"]["magnitude"] == 27.0,
           "title geometry");
  c.expect(doc["requests"][3]["updateTextStyle"]["style"]["fontSize"]["magnitude"] == 18.9, "title font size");
}

void assignment_optimality(Check& c) {
  std::mt19937 rng(606);
  std::uniform_real_distribution<double> pos(0, 300), size(10, 150);
  auto box = [&] { return PixelBox{pos(rng), pos(rng), size(rng), size(rng)}; };
  for (int inst = 0; inst < 200; ++inst) {
    Layout gt{500, 500, {}}, pred{500, 500, {}};
    for (RegionKind kind : {RegionKind::text, RegionKind::image}) {
      const char* tag = kind == RegionKind::text ? "t" : "i";
      for (int i = 0, n = static_cast<int>(rng() % 7); i < n; ++i)
        gt.regions.push_back(kind == RegionKind::text ? testing_support::text_region(std::string("g") + tag + std::to_string(i), i, box(), "x")
                                                      : testing_support::image_region(std::string("g") + tag + std::to_string(i), i, box()));
      for (int i = 0, n = static_cast<int>(rng() % 7); i < n; ++i)
        pred.regions.push_back(kind == RegionKind::text ? testing_support::text_region(std::string("p") + tag + std::to_string(i), i, box(), "x")
                                                        : testing_support::image_region(std::string("p") + tag + std::to_string(i), i, box()));
    }
    double best = 0;
    for (RegionKind kind : {RegionKind::text, RegionKind::image}) {
      std::vector<PixelBox> g, p;
      for (const auto& r : gt.regions)
        if (r.kind == kind) g.push_back(r.bbox);
      for (const auto& r : pred.regions)
        if (r.kind == kind) p.push_back(r.bbox);
      std::vector<std::vector<double>> w(g.size(), std::vector<double>(p.size()));
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) w[i][j] = iou(g[i], p[j]);
      best += testing_support::oracle_best_assignment(w);
    }
    const double got = match_regions(gt, pred).total_iou();
    c.expect(std::abs(got - best) <= 1e-9, "instance " + std::to_string(inst) + ": " + num(got) + " vs " + num(best));
  }
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

/// Trims and collapses blanks within each line, keeps interior line breaks,
/// drops leading and trailing empty lines.
std::string reference_normalize(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) {
    std::string joined;
    for (const auto& w : split_ws(line)) joined += (joined.empty() ? "" : " ") + w;
    lines.push_back(joined);
  }
  if (!s.empty() && s.back() == '\n') lines.emplace_back();
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t first = 0;
  while (first < lines.size() && lines[first].empty()) ++first;
  std::string out;
  for (std::size_t i = first; i < lines.size(); ++i) out += (i == first ? "" : "\n") + lines[i];
  return out;
}

void metric_oracles(Check& c) {
  std::mt19937 rng(707);
  for (int i = 0; i < 1000; ++i) {
    std::string gt;
    do gt = testing_support::random_word_string(rng, 40);
    while (reference_normalize(gt).empty());
    const std::string pred = testing_support::random_word_string(rng, 40);
    const std::string gn = reference_normalize(gt), pn = reference_normalize(pred);
    auto gw = split_ws(gn), pw = split_ws(pn);
    std::vector<char> gc(gn.begin(), gn.end()), pc(pn.begin(), pn.end());
    const double cer = double(testing_support::oracle_edit_distance(gc, pc)) / double(gc.size());
    const double wer = double(testing_support::oracle_edit_distance(gw, pw)) / double(gw.size());
    auto got = cer_wer(gt, pred);
    c.expect(std::abs(got.cer - cer) < 1e-12 && std::abs(got.wer - wer) < 1e-12, "pair " + std::to_string(i));
  }
  c.expect(std::abs(iou({0, 0, 10, 10}, {5, 0, 10, 10}) - 1.0 / 3.0) < 1e-12, "iou 1/3 case");
  auto off = center_offset({0, 0, 2, 2}, {3, 4, 2, 2}, 1600, 900);
  c.expect(std::abs(off.px - 5.0) < 1e-12, "3-4-5 center offset = " + num(off.px));
  c.expect(std::abs(off.normalized - 5.0 / std::hypot(1600.0, 900.0)) < 1e-12, "normalized offset");
}

void round_trip(Check& c) {
  Layout gt = generate_template_layout(8);
  std::map<std::string, std::string> urls;
  for (const auto& r : gt.regions)
    if (r.kind == RegionKind::image) urls[r.id] = "https://assets.example.test/" + r.id + ".png";
  auto batch = build_requests_for_infographic(gt, compute_fit(gt.image_width, gt.image_height, {}), urls, std::nullopt);
  c.expect(!batch.requests.empty(), "empty batch");
  auto m = evaluate_run(gt, gt);
  c.expect(m.element_recovery == 1.0, "element recovery");
  c.expect(m.char_recovery == 1.0, "char recovery");
  c.expect(m.text && m.text->iou_mean == 1.0 && m.image && m.image->iou_mean == 1.0, "mean IoU");
  c.expect(m.cer_mean == 0.0 && m.wer_mean == 0.0, "CER/WER");

  auto shifted = evaluate_run(gt, perturb_layout(gt, {20, 20, 0, 0, 0, 0}));
  for (const auto* k : {&shifted.text, &shifted.image}) {
    c.expect(k->has_value() && (*k)->iou_mean && *(*k)->iou_mean < 1.0, "shifted IoU not below 1");
    c.expect(k->has_value() && (*k)->center_offset_mean_px && std::abs(*(*k)->center_offset_mean_px - 20.0 * std::sqrt(2.0)) <= 1e-6,
             "diagonal shift offset");
  }
  auto horizontal = evaluate_run(gt, perturb_layout(gt, {20, 0, 0, 0, 0, 0}));
  for (const auto* k : {&horizontal.text, &horizontal.image}) {
    c.expect(k->has_value() && *(*k)->iou_mean < 1.0, "shifted IoU not below 1");
    c.expect(k->has_value() && std::abs(*(*k)->center_offset_mean_px - 20.0) <= 1e-6,
             "offset = " + num(k->has_value() ? *(*k)->center_offset_mean_px : -1));
  }
}

void background_synthesis(Check& c) {
  Raster img(10, 10, {0, 0, 0, 255});
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 10; ++x) img.set(x, y, {255, 255, 255, 255});
  auto solid = synthesize_background_raster(img, {{0, 0, 10, 10}, BackgroundMode::solid}, 40, 30);
  const Rgba first = solid.at(0, 0);
  for (int y = 0; y < solid.height(); ++y)
    for (int x = 0; x < solid.width(); ++x) c.expect(solid.at(x, y) == first, "solid output not uniform");
  for (int ch = 0; ch < 3; ++ch) c.expect(std::abs(first[ch] - 127.5) <= 0.5, "not mid-gray: " + std::to_string(first[ch]));

  std::mt19937 rng(909);
  auto src = testing_support::random_image(rng, 40, 40);
  auto tile = synthesize_background_raster(src, {{12, 5, 10, 10}, BackgroundMode::tile}, 25, 25);
  c.expect(tile.width() == 25 && tile.height() == 25, "tile output size");
  for (int j = 0; j < 25; ++j)
    for (int i = 0; i < 25; ++i) c.expect(tile.at(i, j) == src.at(12 + i % 10, 5 + j % 10), "tile pixel mismatch");
}

class CountingUploader : public Uploader {
 public:
  std::string upload(const std::string& name, std::span<const std::uint8_t>) override {
    ++calls;
    return "https://assets.example.test/" + name;
  }
  int calls = 0;
};

void dedup(Check& c) {
  ScratchDir dir("acceptance-dedup");
  auto img = testing_support::gradient_image(300, 200, 3);
  const int n = 12;
  std::set<std::string> urls;
  {
    AssetStore store(dir.path());
    CountingUploader up;
    for (int i = 0; i < n; ++i) urls.insert(*store.store_and_upload(crop_region_png(img, {40, 30, 120, 90}), up).url);
    c.expect(up.calls == 1, "cold cache made " + std::to_string(up.calls) + " uploads");
    c.expect(urls.size() == 1, "copies got different URLs");
  }
  AssetStore warm(dir.path());
  CountingUploader up;
  for (int i = 0; i < n; ++i) urls.insert(*warm.store_and_upload(crop_region_png(img, {40, 30, 120, 90}), up).url);
  c.expect(up.calls == 0, "warm cache made " + std::to_string(up.calls) + " uploads");
  c.expect(urls.size() == 1, "warm cache returned a different URL");
}

void report_schema(Check& c) {
  ScratchDir dir("acceptance-report");
  auto out_path = dir / "eval_report.json";
  std::ostringstream out, err;
  CliHooks hooks;
  hooks.env = [](const char*) -> std::optional<std::string> { return std::nullopt; };
  const int code = run_cli({"eval", "--run-dir", testing_support::data_path("data/runs").string(), "--out", out_path.string()}, out, err, hooks);
  c.expect(code == 0, "eval exited " + std::to_string(code) + ": " + err.str());
  if (code != 0) return;
  auto doc = json::parse(read_file_text(out_path));

  const std::vector<std::string> rows{"Element recovery rate", "Character recovery rate", "Mean IoU", "Median IoU",
                                      "Mean center offset (px)", "Mean CER / WER", "Frac. IoU ≥ 0.5", "Frac. IoU ≥ 0.75",
                                      "VLM extraction time (s)", "Slides API time (s)"};
  // Which of Text / Image / Overall carry a value in each row.
  const std::vector<std::array<bool, 3>> cells{{true, true, true},  {true, false, false}, {true, true, false},
                                               {true, true, false}, {true, true, false},  {true, false, false},
                                               {true, true, true},  {true, true, true},   {false, false, true},
                                               {false, false, true}};
  const std::array<const char*, 3> columns{"Text", "Image", "Overall / global"};
  c.expect(doc["runs"] == 2, "run count");
  c.expect(doc["columns"] == json(columns), "column names");
  c.expect(doc["table"].is_array() && doc["table"].size() == rows.size(), "row count");
  if (!doc["table"].is_array() || doc["table"].size() != rows.size()) return;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = doc["table"][i];
    c.expect(row["metric"] == rows[i], "row " + std::to_string(i) + " is '" + row["metric"].dump() + "'");
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& cell = row[columns[k]];
      c.expect(cell.is_null() != cells[i][k], rows[i] + " / " + columns[k] + " presence");
      if (cell.is_null()) continue;
      if (i == 5) {
        c.expect(cell.contains("cer") && cell.contains("wer") && cell["cer"].contains("mean") && cell["wer"].contains("std"),
                 "CER / WER cell shape");
      } else {
        c.expect(cell.contains("mean") && cell.contains("std"), rows[i] + " cell shape");
      }
    }
    c.expect(row.value("spans_columns", false) == (i >= 8), rows[i] + " column span");
  }
  c.expect(std::abs(doc["table"][8]["Overall / global"]["mean"].get<double>() - 55.0) < 1e-9, "timing mean");
  c.expect(std::abs(doc["table"][8]["Overall / global"]["std"].get<double>() - 2.5) < 1e-9, "timing std");
  const std::string table = out.str();
  for (const auto& r : rows) c.expect(table.find(r) != std::string::npos, "printed table lacks '" + r + "'");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"typography anchors and monotone calibration", typography},
      {"fit transform and px/pt round trip", geometry},
      {"crop padding spans", crop_padding},
      {"width expansion examples and properties", width_expansion},
      {"deterministic golden batch", deterministic_batches},
      {"assignment optimality vs brute force", assignment_optimality},
      {"CER/WER, IoU and offset oracles", metric_oracles},
      {"round-trip fixed point and shift perturbation", round_trip},
      {"background synthesis", background_synthesis},
      {"asset dedup and warm cache", dedup},
      {"aggregate report schema", report_schema},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << "AC" << (i + 1) << " " << (c.ok() ? "PASS" : "FAIL") << "  " << criteria[i].first;
    if (!c.ok()) std::cout << "  [" << c.summary() << "]";
    std::cout << "\n";
    failed += !c.ok();
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed ? 1 : 0;
}
