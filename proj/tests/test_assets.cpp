#include <gtest/gtest.h>

#include <random>
#include <set>
#include <thread>

#include "infoslide/assets.hpp"
#include "support.hpp"

using namespace infoslide;
using testing_support::ScratchDir;

namespace {

/// Counts upload calls and hands back deterministic https URLs.
class CountingUploader : public Uploader {
 public:
  std::string upload(const std::string& name, std::span<const std::uint8_t>) override {
    ++calls;
    names.push_back(name);
    return "https://assets.example.test/" + name;
  }
  int calls = 0;
  std::vector<std::string> names;
};

class FailingUploader : public Uploader {
 public:
  std::string upload(const std::string&, std::span<const std::uint8_t>) override {
    throw UploadError("connection reset", true);
  }
};

class PlainHttpUploader : public Uploader {
 public:
  std::string upload(const std::string& name, std::span<const std::uint8_t>) override { return "http://insecure/" + name; }
};

}  // namespace

TEST(Raster, PngRoundTrip) {
  auto img = testing_support::gradient_image(37, 23, 5);
  img.set(3, 4, {1, 2, 3, 100});
  auto png = encode_png(img);
  EXPECT_EQ(decode_image(png), img);
  EXPECT_EQ(encode_png(img), png);
}

TEST(Raster, RejectsGarbage) {
  std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
  EXPECT_THROW(decode_image(junk), ImageCodecError);
  EXPECT_THROW(decode_image(std::vector<std::uint8_t>{}), ImageCodecError);
}

TEST(CropSpan, Examples) {
  EXPECT_EQ(crop_span({32, 140, 469, 351}, 1600, 900), (CropSpan{32, 140, 511, 501}));
  EXPECT_EQ(crop_span({0, 0, 1600, 900}, 1600, 900), (CropSpan{0, 0, 1600, 900}));
  EXPECT_EQ(crop_span({100, 100, 50, 50}, 155, 155), (CropSpan{100, 100, 155, 155}));
  EXPECT_EQ(crop_span({10.4, 20.6, 5.2, 5.1}, 100, 100, 0), (CropSpan{10, 20, 16, 26}));
  EXPECT_EQ(crop_span({10, 10, 5, 5}, 100, 100, 3), (CropSpan{10, 10, 18, 18}));
}

TEST(CropSpan, DegenerateThrows) {
  EXPECT_THROW(crop_span({100, 10, 5, 5}, 100, 100), std::invalid_argument);
  EXPECT_THROW(crop_span({10, 120, 5, 5}, 100, 100), std::invalid_argument);
}

TEST(CropRegion, WholeImage) {
  auto img = testing_support::gradient_image(20, 10);
  EXPECT_EQ(crop_region(img, {0, 0, 20, 10}), img);
}

TEST(CropRegion, RandomSpansAndPixels) {
  std::mt19937 rng(3);
  for (int i = 0; i < 300; ++i) {
    const int W = 1 + static_cast<int>(rng() % 80), H = 1 + static_cast<int>(rng() % 80);
    auto img = testing_support::random_image(rng, W, H);
    const int x = static_cast<int>(rng() % W), y = static_cast<int>(rng() % H);
    const int w = 1 + static_cast<int>(rng() % (W - x)), h = 1 + static_cast<int>(rng() % (H - y));
    auto crop = crop_region(img, {double(x), double(y), double(w), double(h)});
    ASSERT_EQ(crop.width(), std::min(x + w + 10, W) - x);
    ASSERT_EQ(crop.height(), std::min(y + h + 10, H) - y);
    for (int yy = 0; yy < crop.height(); ++yy)
      for (int xx = 0; xx < crop.width(); ++xx) ASSERT_EQ(crop.at(xx, yy), img.at(x + xx, y + yy));
  }
}

TEST(ContentName, Deterministic) {
  auto img = testing_support::gradient_image(50, 40);
  auto a = crop_region_png(img, {5, 5, 20, 20});
  auto b = crop_region_png(img, {5, 5, 20, 20});
  EXPECT_EQ(content_name(a), content_name(b));
  auto name = content_name(a);
  EXPECT_EQ(name.size(), 36u);
  EXPECT_EQ(name.substr(32), ".png");
  for (char c : name.substr(0, 32)) EXPECT_TRUE((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'));
  EXPECT_THROW(content_name(std::vector<std::uint8_t>{}), std::invalid_argument);
}

TEST(ContentName, KnownDigest) {
  // SHA-256("abc") = ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad
  EXPECT_EQ(content_name(as_bytes("abc")), "ba7816bf8f01cfea414140de5dae2223.png");
}

TEST(ContentName, EqualIffBytesEqual) {
  std::mt19937 rng(8);
  std::map<std::string, std::vector<std::uint8_t>> seen;
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> bytes(1 + rng() % 6);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng() % 4);
    auto name = content_name(bytes);
    auto [it, inserted] = seen.emplace(name, bytes);
    if (!inserted) EXPECT_EQ(it->second, bytes);
  }
  std::vector<std::uint8_t> a{1, 2, 3}, b{1, 2, 4};
  EXPECT_NE(content_name(a), content_name(b));
}

TEST(AssetStore, DedupsWithinAndAcrossRuns) {
  ScratchDir dir("assets");
  auto img = testing_support::gradient_image(64, 64);
  auto crop = crop_region_png(img, {4, 4, 20, 20});
  {
    AssetStore store(dir.path());
    CountingUploader up;
    std::set<std::string> urls;
    for (int i = 0; i < 5; ++i) urls.insert(*store.store_and_upload(crop, up).url);
    EXPECT_EQ(up.calls, 1);
    EXPECT_EQ(urls.size(), 1u);
    auto other = store.store_and_upload(crop_region_png(img, {30, 30, 20, 20}), up);
    EXPECT_EQ(up.calls, 2);
    EXPECT_NE(*other.url, *urls.begin());
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "assets" / other.content_name));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "assets" / "manifest.json"));
  }
  AssetStore warm(dir.path());
  CountingUploader up;
  auto ref = warm.store_and_upload(crop, up);
  EXPECT_EQ(up.calls, 0);
  EXPECT_EQ(*ref.url, "https://assets.example.test/" + content_name(crop));
  EXPECT_EQ(ref.byte_length, crop.size());
}

TEST(AssetStore, UploadCountEqualsDistinctNames) {
  ScratchDir dir("assets-distinct");
  AssetStore store(dir.path());
  CountingUploader up;
  std::mt19937 rng(21);
  auto img = testing_support::random_image(rng, 60, 60);
  std::set<std::string> names;
  for (int i = 0; i < 40; ++i) {
    PixelBox box{double(rng() % 4), double(rng() % 4), 10, 10};
    auto bytes = crop_region_png(img, box);
    names.insert(content_name(bytes));
    store.store_and_upload(bytes, up);
  }
  EXPECT_EQ(static_cast<std::size_t>(up.calls), names.size());
}

TEST(AssetStore, ConcurrentSameContent) {
  ScratchDir dir("assets-mt");
  AssetStore store(dir.path());
  auto bytes = crop_region_png(testing_support::gradient_image(30, 30), {0, 0, 10, 10});
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) threads.emplace_back([&] { (void)store.store(bytes); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(read_file_bytes(dir.path() / "assets" / content_name(bytes)), bytes);
}

TEST(AssetStore, UploadFailuresSurface) {
  ScratchDir dir("assets-fail");
  AssetStore store(dir.path());
  FailingUploader failing;
  auto bytes = as_bytes("payload");
  try {
    store.store_and_upload(bytes, failing);
    FAIL() << "expected UploadError";
  } catch (const UploadError& e) {
    EXPECT_TRUE(e.retryable());
    EXPECT_NE(std::string(e.what()).find("connection reset"), std::string::npos);
  }
  EXPECT_FALSE(store.recorded_url(content_name(bytes)).has_value());
  PlainHttpUploader plain;
  EXPECT_THROW(store.store_and_upload(bytes, plain), UploadError);
}

TEST(FilesystemUploader, WritesAndReturnsUrl) {
  ScratchDir dir("fs-upload");
  FilesystemUploader up(dir / "public", "https://cdn.example.test/x");
  auto url = up.upload("abc.png", as_bytes("hi"));
  EXPECT_EQ(url, "https://cdn.example.test/x/abc.png");
  EXPECT_EQ(read_file_text(dir / "public/abc.png"), "hi");
}

TEST(Background, SolidUniformPatch) {
  Raster img(20, 20, {10, 20, 30, 255});
  auto out = synthesize_background_raster(img, {{2, 2, 5, 5}, BackgroundMode::solid}, 8, 6);
  EXPECT_EQ(out, Raster(8, 6, {10, 20, 30, 255}));
}

TEST(Background, SolidHalfBlackHalfWhite) {
  Raster img(10, 10, {0, 0, 0, 255});
  for (int y = 0; y < 10; ++y)
    for (int x = 5; x < 10; ++x) img.set(x, y, {255, 255, 255, 255});
  auto out = synthesize_background_raster(img, {{0, 0, 10, 10}, BackgroundMode::solid}, 16, 9);
  // Per-channel mean over the patch, computed independently.
  std::array<int, 3> sum{};
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) sum[c] += img.at(x, y)[c];
  std::array<double, 3> mean{};
  for (int c = 0; c < 3; ++c) mean[c] = sum[c] / 100.0;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(x, y)[c], mean[c], 0.5);
  EXPECT_EQ(out.at(0, 0), out.at(15, 8));
}

TEST(Background, TileRepeatsPatch) {
  std::mt19937 rng(4);
  auto img = testing_support::random_image(rng, 30, 30);
  BackgroundSample s{{7, 3, 10, 10}, BackgroundMode::tile};
  auto out = synthesize_background_raster(img, s, 25, 25);
  for (int j = 0; j < 25; ++j)
    for (int i = 0; i < 25; ++i) ASSERT_EQ(out.at(i, j), img.at(7 + i % 10, 3 + j % 10));
}

TEST(Background, Errors) {
  Raster img(10, 10);
  EXPECT_THROW(synthesize_background_raster(img, {{20, 20, 5, 5}, BackgroundMode::solid}, 5, 5), std::invalid_argument);
  EXPECT_THROW(synthesize_background_raster(img, {{0, 0, 5, 5}, BackgroundMode::solid}, 0, 5), std::invalid_argument);
}

TEST(Background, JsonRoundTrip) {
  BackgroundSample s{{1, 2, 3, 4}, BackgroundMode::tile};
  std::string error;
  auto back = parse_background_sample(background_sample_to_json(s), error);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->bbox, s.bbox);
  EXPECT_EQ(back->mode, BackgroundMode::tile);
  EXPECT_FALSE(parse_background_sample(json{{"bbox_px", {{"x", 1}}}, {"mode", "solid"}}, error));
  EXPECT_FALSE(parse_background_sample(json{{"bbox_px", {{"x", 1}, {"y", 1}, {"w", 1}, {"h", 1}}}, {"mode", "blur"}}, error));
  EXPECT_NE(error.find("mode"), std::string::npos);
}

TEST(Overlay, EmptyLayoutLeavesImage) {
  auto img = testing_support::gradient_image(40, 30);
  EXPECT_EQ(render_overlay_raster(img, Layout{40, 30, {}}), img);
  EXPECT_EQ(decode_image(render_overlay(img, Layout{40, 30, {}})), img);
}

TEST(Overlay, OneRectangleOutline) {
  Raster img(100, 100, {255, 255, 255, 255});
  Layout l{100, 100, {testing_support::image_region("b", 1, {20, 30, 40, 30})}};
  auto out = render_overlay_raster(img, l);
  EXPECT_EQ(out.width(), 100);
  EXPECT_EQ(out.at(20, 45), kOverlayImageColor);  // left edge
  EXPECT_EQ(out.at(59, 45), kOverlayImageColor);  // right edge
  EXPECT_EQ(out.at(40, 59), kOverlayImageColor);  // bottom edge
  EXPECT_EQ(out.at(50, 30), kOverlayImageColor);  // top edge
  EXPECT_EQ(out.at(19, 45), (Rgba{255, 255, 255, 255}));
  EXPECT_EQ(out.at(60, 45), (Rgba{255, 255, 255, 255}));
  EXPECT_EQ(out.at(40, 50), (Rgba{255, 255, 255, 255}));  // interior below the label
  int colored = 0;
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      if (out.at(x, y) == kOverlayImageColor && (x < 20 || x >= 60 || y < 30 || y >= 60)) ++colored;
  EXPECT_EQ(colored, 0);
}

TEST(Overlay, SampleLayoutTwoLabeledBoxes) {
  Raster img(1600, 900, {255, 255, 255, 255});
  auto out = render_overlay_raster(img, testing_support::sample_layout());
  EXPECT_EQ(out.at(35, 75), kOverlayTextColor);
  EXPECT_EQ(out.at(1534, 75), kOverlayTextColor);
  EXPECT_EQ(out.at(32, 300), kOverlayImageColor);
  EXPECT_EQ(out.at(500, 300), kOverlayImageColor);
  // Labels: glyph pixels in the box color inside the label area.
  auto label_pixels = [&](int x0, int y0, Rgba c) {
    int n = 0;
    for (int y = y0 + 3; y < y0 + 12; ++y)
      for (int x = x0 + 3; x < x0 + 60; ++x) n += out.at(x, y) == c;
    return n;
  };
  EXPECT_GT(label_pixels(35, 45, kOverlayTextColor), 20);
  EXPECT_GT(label_pixels(32, 140, kOverlayImageColor), 20);
}
