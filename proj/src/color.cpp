#include "huemod/color.hpp"

#include <algorithm>
#include <cmath>

namespace huemod {

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    float mx = std::max(r, std::max(g, b));
    float mn = std::min(r, std::min(g, b));
    float d = mx - mn;
    v = mx;
    s = (mx > 0.f) ? d / mx : 0.f;
    if (d <= 0.f) {
        h = 0.f;
        return;
    }
    if (mx == r)
        h = 60.f * ((g - b) / d);
    else if (mx == g)
        h = 60.f * ((b - r) / d) + 120.f;
    else
        h = 60.f * ((r - g) / d) + 240.f;
    if (h < 0.f) h += 360.f;
    if (h >= 360.f) h -= 360.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    if (s <= 0.f) {
        r = g = b = v;
        return;
    }
    float hh = h / 60.f;
    int sector = static_cast<int>(std::floor(hh)) % 6;
    if (sector < 0) sector += 6;
    float f = hh - std::floor(hh);
    float p = v * (1.f - s);
    float q = v * (1.f - s * f);
    float t = v * (1.f - s * (1.f - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

std::uint8_t quantize_channel(float x) {
    float scaled = x * 255.f;
    // round half away from zero (scaled is non-negative here after clamp)
    float r = std::floor(std::fabs(scaled) + 0.5f) * (scaled < 0.f ? -1.f : 1.f);
    r = std::clamp(r, 0.f, 255.f);
    return static_cast<std::uint8_t>(r);
}

void hue_rotate_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b, float degrees,
                      std::uint8_t& ro, std::uint8_t& go, std::uint8_t& bo) {
    float rf = r / 255.f, gf = g / 255.f, bf = b / 255.f;
    float h, s, v;
    rgb_to_hsv(rf, gf, bf, h, s, v);
    h += degrees;
    h = std::fmod(h, 360.f);
    if (h < 0.f) h += 360.f;
    float r2, g2, b2;
    hsv_to_rgb(h, s, v, r2, g2, b2);
    ro = quantize_channel(r2);
    go = quantize_channel(g2);
    bo = quantize_channel(b2);
}

ImageRaster hue_rotate(const ImageRaster& img, HueAngle angle) {
    if (angle.degrees == 0) return img;  // exact identity
    ImageRaster out(img.h, img.w);
    const float deg = static_cast<float>(angle.degrees);
    for (int r = 0; r < img.h; ++r) {
        for (int c = 0; c < img.w; ++c) {
            std::uint8_t ro, go, bo;
            hue_rotate_pixel(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2), deg, ro, go, bo);
            out.at(r, c, 0) = ro;
            out.at(r, c, 1) = go;
            out.at(r, c, 2) = bo;
        }
    }
    return out;
}

}  // namespace huemod
