#pragma once

#include <string>

#include "huemod/image.hpp"

namespace huemod {

// --- PNG ---
void write_png_rgb(const std::string& path, const ImageRaster& img);
ImageRaster read_png_rgb(const std::string& path);

/// 1-bit grayscale PNG (0 = pristine, 1 = forged).
void write_png_mask(const std::string& path, const BoolMask& mask);
BoolMask read_png_mask(const std::string& path);

/// 8-bit grayscale PNG of values clipped to [0,1].
void write_png_gray(const std::string& path, const FloatImage& img);

// --- JPEG ---
/// Encode to baseline JPEG in memory at quality qf in [1,100].
/// Chroma subsampling: 4:2:0 below qf 95, 4:4:4 at and above.
std::vector<std::uint8_t> jpeg_encode(const ImageRaster& img, int qf);
ImageRaster jpeg_decode(const std::vector<std::uint8_t>& data);

ImageRaster jpeg_roundtrip(const ImageRaster& img, int qf);

void write_jpeg(const std::string& path, const ImageRaster& img, int qf);
ImageRaster read_jpeg(const std::string& path);

/// Reads PNG or JPEG based on file signature.
ImageRaster read_image(const std::string& path);

// --- Raw float heatmap ("HMAP" magic, u32 h, u32 w, h*w little-endian f32) ---
void write_heatmap_raw(const std::string& path, const FloatImage& hm);
FloatImage read_heatmap_raw(const std::string& path);

}  // namespace huemod
