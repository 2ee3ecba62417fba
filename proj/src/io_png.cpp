#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

#include "huemod/io.hpp"

namespace huemod {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open file: " + path);
    return f;
}

void write_png_impl(const std::string& path, int h, int w, int color_type, int bit_depth,
                    const std::vector<std::vector<std::uint8_t>>& rows) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng write error: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows) png_write_row(png, const_cast<png_bytep>(row.data()));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_rgb(const std::string& path, const ImageRaster& img) {
    std::vector<std::vector<std::uint8_t>> rows(img.h);
    for (int r = 0; r < img.h; ++r)
        rows[r].assign(img.px.begin() + static_cast<std::size_t>(r) * img.w * 3,
                       img.px.begin() + static_cast<std::size_t>(r + 1) * img.w * 3);
    write_png_impl(path, img.h, img.w, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_png_mask(const std::string& path, const BoolMask& mask) {
    std::vector<std::vector<std::uint8_t>> rows(mask.h);
    const int stride = (mask.w + 7) / 8;
    for (int r = 0; r < mask.h; ++r) {
        rows[r].assign(stride, 0);
        for (int c = 0; c < mask.w; ++c)
            if (mask.at(r, c)) rows[r][c / 8] |= static_cast<std::uint8_t>(0x80u >> (c % 8));
    }
    write_png_impl(path, mask.h, mask.w, PNG_COLOR_TYPE_GRAY, 1, rows);
}

void write_png_gray(const std::string& path, const FloatImage& img) {
    std::vector<std::vector<std::uint8_t>> rows(img.h);
    for (int r = 0; r < img.h; ++r) {
        rows[r].resize(img.w);
        for (int c = 0; c < img.w; ++c) {
            float x = std::clamp(img.at(r, c), 0.f, 1.f);
            rows[r][c] = static_cast<std::uint8_t>(x * 255.f + 0.5f);
        }
    }
    write_png_impl(path, img.h, img.w, PNG_COLOR_TYPE_GRAY, 8, rows);
}

namespace {

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() { if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

}  // namespace

ImageRaster read_png_rgb(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    PngReader rd;
    rd.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    rd.info = png_create_info_struct(rd.png);
    if (!rd.png || !rd.info) throw std::runtime_error("libpng init failed");
    if (setjmp(png_jmpbuf(rd.png))) throw std::runtime_error("libpng read error: " + path);
    png_init_io(rd.png, f.get());
    png_read_info(rd.png, rd.info);
    png_set_expand(rd.png);
    png_set_strip_16(rd.png);
    png_set_strip_alpha(rd.png);
    png_set_gray_to_rgb(rd.png);
    png_read_update_info(rd.png, rd.info);
    const int h = static_cast<int>(png_get_image_height(rd.png, rd.info));
    const int w = static_cast<int>(png_get_image_width(rd.png, rd.info));
    ImageRaster img(h, w);
    for (int r = 0; r < h; ++r)
        png_read_row(rd.png, img.px.data() + static_cast<std::size_t>(r) * w * 3, nullptr);
    return img;
}

BoolMask read_png_mask(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    PngReader rd;
    rd.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    rd.info = png_create_info_struct(rd.png);
    if (!rd.png || !rd.info) throw std::runtime_error("libpng init failed");
    if (setjmp(png_jmpbuf(rd.png))) throw std::runtime_error("libpng read error: " + path);
    png_init_io(rd.png, f.get());
    png_read_info(rd.png, rd.info);
    png_set_expand(rd.png);  // 1-bit gray -> 8-bit
    png_set_strip_16(rd.png);
    png_set_strip_alpha(rd.png);
    png_set_rgb_to_gray(rd.png, 1, -1, -1);
    png_read_update_info(rd.png, rd.info);
    const int h = static_cast<int>(png_get_image_height(rd.png, rd.info));
    const int w = static_cast<int>(png_get_image_width(rd.png, rd.info));
    BoolMask mask(h, w);
    std::vector<std::uint8_t> row(w);
    for (int r = 0; r < h; ++r) {
        png_read_row(rd.png, row.data(), nullptr);
        for (int c = 0; c < w; ++c) mask.set(r, c, row[c] != 0);
    }
    return mask;
}

ImageRaster read_image(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    unsigned char sig[2] = {0, 0};
    if (std::fread(sig, 1, 2, f.get()) != 2) throw std::runtime_error("file too short: " + path);
    f.reset();
    if (sig[0] == 0x89 && sig[1] == 'P') return read_png_rgb(path);
    if (sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(path);
    throw std::runtime_error("unrecognized image format: " + path);
}

void write_heatmap_raw(const std::string& path, const FloatImage& hm) {
    FilePtr f = open_file(path, "wb");
    const char magic[4] = {'H', 'M', 'A', 'P'};
    std::uint32_t h = static_cast<std::uint32_t>(hm.h), w = static_cast<std::uint32_t>(hm.w);
    if (std::fwrite(magic, 1, 4, f.get()) != 4 || std::fwrite(&h, 4, 1, f.get()) != 1 ||
        std::fwrite(&w, 4, 1, f.get()) != 1 ||
        std::fwrite(hm.v.data(), 4, hm.v.size(), f.get()) != hm.v.size())
        throw std::runtime_error("heatmap write failed: " + path);
}

FloatImage read_heatmap_raw(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    char magic[4];
    std::uint32_t h = 0, w = 0;
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::string(magic, 4) != "HMAP" ||
        std::fread(&h, 4, 1, f.get()) != 1 || std::fread(&w, 4, 1, f.get()) != 1)
        throw std::runtime_error("bad heatmap header: " + path);
    FloatImage hm(static_cast<int>(h), static_cast<int>(w));
    if (std::fread(hm.v.data(), 4, hm.v.size(), f.get()) != hm.v.size())
        throw std::runtime_error("truncated heatmap: " + path);
    return hm;
}

}  // namespace huemod
