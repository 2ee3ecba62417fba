#pragma once

#include "huemod/image.hpp"

namespace huemod {

/// Hue angle in degrees; arithmetic is modulo 360.
struct HueAngle {
    int degrees = 0;  // normalized to [0, 360)

    HueAngle() = default;
    explicit HueAngle(int deg) { degrees = ((deg % 360) + 360) % 360; }
};

/// RGB channels in [0,1] -> (h in [0,360), s in [0,1], v in [0,1]). Hexcone model.
void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

/// Scale a [0,1] channel to 8 bits: round half away from zero, clamp to [0,255].
std::uint8_t quantize_channel(float x);

/// Rotate the hue of every pixel by `angle`; saturation and value unchanged.
ImageRaster hue_rotate(const ImageRaster& img, HueAngle angle);

/// Rotate a single RGB pixel's hue by `degrees` (any real angle).
void hue_rotate_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b, float degrees,
                      std::uint8_t& ro, std::uint8_t& go, std::uint8_t& bo);

}  // namespace huemod
