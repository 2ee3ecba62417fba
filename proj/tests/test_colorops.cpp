#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "huemod/cfa.hpp"
#include "huemod/color.hpp"
#include "huemod/dataset.hpp"
#include "huemod/io.hpp"

using namespace huemod;

namespace {

ImageRaster random_image(int h, int w, std::uint64_t seed) {
    ImageRaster img(h, w);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, 255);
    for (auto& p : img.px) p = static_cast<std::uint8_t>(d(rng));
    return img;
}

}  // namespace

TEST_CASE("hue rotation on primary colors") {
    ImageRaster img(1, 1);
    img.at(0, 0, 0) = 255;  // pure red
    ImageRaster out = hue_rotate(img, HueAngle(120));
    CHECK(out.at(0, 0, 0) == 0);
    CHECK(out.at(0, 0, 1) == 255);  // pure green
    CHECK(out.at(0, 0, 2) == 0);
    out = hue_rotate(out, HueAngle(120));
    CHECK(out.at(0, 0, 2) == 255);  // pure blue
}

TEST_CASE("hue rotation by zero is the exact identity") {
    ImageRaster img = random_image(17, 23, 42);
    CHECK(hue_rotate(img, HueAngle(0)) == img);
    CHECK(hue_rotate(img, HueAngle(360)) == img);
}

TEST_CASE("hue rotation periodicity within one LSB") {
    // 1000-pixel random sample across 12 angles
    ImageRaster img = random_image(25, 40, 7);
    for (int a = 30; a < 360; a += 30) {
        ImageRaster back = hue_rotate(hue_rotate(img, HueAngle(a)), HueAngle(360 - a));
        for (std::size_t i = 0; i < img.px.size(); ++i) {
            const int diff = std::abs(static_cast<int>(back.px[i]) - img.px[i]);
            CHECK(diff <= 1);
        }
    }
}

TEST_CASE("hue rotation preserves value and saturation ordering on grays") {
    // achromatic pixels have undefined hue; rotation must not change them
    ImageRaster img(1, 3);
    for (int c = 0; c < 3; ++c) {
        img.at(0, 0, c) = 128;
        img.at(0, 1, c) = 0;
        img.at(0, 2, c) = 255;
    }
    CHECK(hue_rotate(img, HueAngle(197)) == img);
}

TEST_CASE("rgb/hsv round trip") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    for (int i = 0; i < 500; ++i) {
        const float r = d(rng), g = d(rng), b = d(rng);
        float h, s, v, r2, g2, b2;
        rgb_to_hsv(r, g, b, h, s, v);
        CHECK(h >= 0.f);
        CHECK(h < 360.f);
        hsv_to_rgb(h, s, v, r2, g2, b2);
        CHECK(r2 == doctest::Approx(r).epsilon(1e-5));
        CHECK(g2 == doctest::Approx(g).epsilon(1e-5));
        CHECK(b2 == doctest::Approx(b).epsilon(1e-5));
    }
}

TEST_CASE("quantize_channel rounds half away from zero and clamps") {
    CHECK(quantize_channel(0.5f) == 128);          // 127.5 rounds away from zero
    CHECK(quantize_channel(127.f / 255.f) == 127);
    CHECK(quantize_channel(1.f) == 255);
    CHECK(quantize_channel(-0.1f) == 0);
    CHECK(quantize_channel(2.f) == 255);
}

TEST_CASE("cfa pattern parsing") {
    const CfaPattern p = CfaPattern::parse("GBRG");
    CHECK(p.channel_at(0, 0) == 'G');
    CHECK(p.channel_at(0, 1) == 'B');
    CHECK(p.channel_at(1, 0) == 'R');
    CHECK(p.channel_at(1, 1) == 'G');
    CHECK(p.channel_at(2, 2) == 'G');  // tiling
    CHECK(p.to_string() == "GBRG");
    CHECK_THROWS_AS(CfaPattern::parse("GGRB"), std::invalid_argument);
    CHECK_THROWS_AS(CfaPattern::parse("RGB"), std::invalid_argument);
}

TEST_CASE("cfa_mosaic 2x2 under GBRG keeps the pattern-dictated channel") {
    ImageRaster img(2, 2);
    int val = 10;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = static_cast<std::uint8_t>(val++);
    const CfaMosaic m = cfa_mosaic(img, CfaPattern::parse("GBRG"));
    CHECK(m.at(0, 0) == img.at(0, 0, 1));  // G
    CHECK(m.at(0, 1) == img.at(0, 1, 2));  // B
    CHECK(m.at(1, 0) == img.at(1, 0, 0));  // R
    CHECK(m.at(1, 1) == img.at(1, 1, 1));  // G
}

TEST_CASE("cfa_mosaic rejects odd dimensions") {
    CHECK_THROWS_AS(cfa_mosaic(ImageRaster(3, 4), CfaPattern::parse("GBRG")), std::invalid_argument);
    CHECK_THROWS_AS(cfa_mosaic(ImageRaster(4, 5), CfaPattern::parse("GBRG")), std::invalid_argument);
}

TEST_CASE("constant image survives mosaic and demosaic unchanged") {
    ImageRaster img(8, 8);
    for (auto& p : img.px) p = 77;
    const CfaMosaic m = cfa_mosaic(img, CfaPattern::parse("GBRG"));
    for (auto v : m.v) CHECK(v == 77);
    const ImageRaster out = demosaic_bilinear(m);
    CHECK(out == img);
}

TEST_CASE("demosaic copies recorded samples bit-exactly") {
    const ImageRaster img = random_image(16, 20, 99);
    const CfaPattern pat = CfaPattern::parse("GBRG");
    const CfaMosaic m = cfa_mosaic(img, pat);
    const ImageRaster out = demosaic_bilinear(m);
    for (int r = 0; r < img.h; ++r)
        for (int c = 0; c < img.w; ++c)
            CHECK(out.at(r, c, pat.channel_index_at(r, c)) == m.at(r, c));
    // re-mosaicing the demosaiced image reproduces the mosaic
    const CfaMosaic m2 = cfa_mosaic(out, pat);
    CHECK(m2.v == m.v);
}

TEST_CASE("interpolated greens on a horizontal ramp lie between their neighbors") {
    // independent oracle: a linear ramp makes every bilinear average land
    // strictly between (or equal to) the horizontal recorded neighbors
    ImageRaster img(8, 32);
    for (int r = 0; r < img.h; ++r)
        for (int c = 0; c < img.w; ++c)
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = static_cast<std::uint8_t>(c * 8);
    const CfaPattern pat = CfaPattern::parse("GBRG");
    const ImageRaster out = demosaic_bilinear(cfa_mosaic(img, pat));
    for (int r = 1; r < img.h - 1; ++r) {
        for (int c = 1; c < img.w - 1; ++c) {
            if (pat.channel_at(r, c) == 'G') continue;  // recorded
            const int g = out.at(r, c, 1);
            const int left = img.at(r, c - 1, 1), right = img.at(r, c + 1, 1);
            CHECK(g >= std::min(left, right));
            CHECK(g <= std::max(left, right));
        }
    }
}

TEST_CASE("jpeg round trip quality behavior") {
    const ImageRaster img = synth_source_image(64, 64, 123);
    CHECK_THROWS_AS(jpeg_roundtrip(img, 0), std::invalid_argument);
    CHECK_THROWS_AS(jpeg_roundtrip(img, 101), std::invalid_argument);

    auto mae = [&](const ImageRaster& a, const ImageRaster& b) {
        double s = 0.;
        for (std::size_t i = 0; i < a.px.size(); ++i)
            s += std::abs(static_cast<int>(a.px[i]) - b.px[i]);
        return s / a.px.size();
    };
    const ImageRaster q100 = jpeg_roundtrip(img, 100);
    CHECK(q100.h == img.h);
    CHECK(q100.w == img.w);
    CHECK(mae(img, q100) < 3.0);

    // determinism
    CHECK(jpeg_roundtrip(img, 80) == jpeg_roundtrip(img, 80));

    // lower quality introduces larger error
    CHECK(mae(img, jpeg_roundtrip(img, 55)) > mae(img, jpeg_roundtrip(img, 95)));
}

TEST_CASE("png io round trip") {
    const ImageRaster img = random_image(15, 9, 4);
    const std::string path = "test_colorops_tmp.png";
    write_png_rgb(path, img);
    CHECK(read_png_rgb(path) == img);
    CHECK(read_image(path) == img);
    std::remove(path.c_str());
}

TEST_CASE("mask png io round trip") {
    BoolMask mask(13, 21);
    std::mt19937_64 rng(3);
    for (auto& v : mask.m) v = rng() & 1;
    const std::string path = "test_colorops_mask_tmp.png";
    write_png_mask(path, mask);
    CHECK(read_png_mask(path) == mask);
    std::remove(path.c_str());
}

TEST_CASE("heatmap raw io round trip") {
    FloatImage hm(5, 7);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> d(0.f, 1.f);
    for (auto& v : hm.v) v = d(rng);
    const std::string path = "test_colorops_hm_tmp.bin";
    const FloatImage back = (write_heatmap_raw(path, hm), read_heatmap_raw(path));
    CHECK(back.h == hm.h);
    CHECK(back.w == hm.w);
    CHECK(back.v == hm.v);
    std::remove(path.c_str());
}
