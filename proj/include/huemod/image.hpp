#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace huemod {

/// Interleaved 8-bit RGB raster, row-major.
struct ImageRaster {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> px;  // size h*w*3, RGB order

    ImageRaster() = default;
    ImageRaster(int height, int width)
        : h(height), w(width), px(static_cast<std::size_t>(height) * width * 3, 0) {
        if (height < 1 || width < 1) throw std::invalid_argument("ImageRaster: H and W must be >= 1");
    }

    std::uint8_t& at(int r, int c, int ch) { return px[(static_cast<std::size_t>(r) * w + c) * 3 + ch]; }
    std::uint8_t at(int r, int c, int ch) const { return px[(static_cast<std::size_t>(r) * w + c) * 3 + ch]; }

    bool same_shape(const ImageRaster& o) const { return h == o.h && w == o.w; }
    bool operator==(const ImageRaster& o) const { return h == o.h && w == o.w && px == o.px; }
};

/// Single-channel boolean mask (0 = false, 1 = true).
struct BoolMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> m;  // size h*w

    BoolMask() = default;
    BoolMask(int height, int width) : h(height), w(width), m(static_cast<std::size_t>(height) * width, 0) {}

    bool at(int r, int c) const { return m[static_cast<std::size_t>(r) * w + c] != 0; }
    void set(int r, int c, bool v) { m[static_cast<std::size_t>(r) * w + c] = v ? 1 : 0; }

    std::size_t count_true() const {
        std::size_t n = 0;
        for (auto v : m) n += (v != 0);
        return n;
    }
    bool operator==(const BoolMask& o) const { return h == o.h && w == o.w && m == o.m; }
};

/// Single-channel float image, row-major.
struct FloatImage {
    int h = 0;
    int w = 0;
    std::vector<float> v;

    FloatImage() = default;
    FloatImage(int height, int width) : h(height), w(width), v(static_cast<std::size_t>(height) * width, 0.f) {}

    float& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
    float at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
};

}  // namespace huemod
