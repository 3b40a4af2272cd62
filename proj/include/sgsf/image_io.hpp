#pragma once

#include <cstdio>
#include <filesystem>

#include <png.h>

#include "sgsf/tensor.hpp"

namespace sgsf {

/// Reads an 8-bit RGB PNG into [3,H,W] with values mapped to [0,1] by /255.
/// Palette, gray and alpha variants are expanded/stripped to RGB.
inline Tensor load_png_rgb(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    SGSF_CHECK(fp, "cannot open PNG '" << path << "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail("libpng failed reading '" + path + "'");
    }
    png_init_io(png, fp);
    png_read_png(png, info,
                 PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_STRIP_ALPHA |
                     PNG_TRANSFORM_GRAY_TO_RGB | PNG_TRANSFORM_EXPAND,
                 nullptr);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    png_bytepp rows = png_get_rows(png, info);
    const png_uint_32 rowbytes = static_cast<png_uint_32>(png_get_rowbytes(png, info));
    SGSF_CHECK(rowbytes == w * 3, "PNG '" << path << "' did not decode to RGB8");

    Tensor img = Tensor::zeros({3, static_cast<int64_t>(h), static_cast<int64_t>(w)});
    const int64_t npx = static_cast<int64_t>(h) * w;
    for (png_uint_32 y = 0; y < h; ++y)
        for (png_uint_32 x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                img.ptr()[c * npx + static_cast<int64_t>(y) * w + x] =
                    static_cast<float>(rows[y][x * 3 + c]) / 255.f;
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

/// Writes [3,H,W] values in [0,1] as an 8-bit RGB PNG (atomic: temp+rename).
inline void save_png_rgb(const Tensor& img, const std::string& path) {
    SGSF_CHECK(img.rank() == 3 && img.dim(0) == 3,
               "save_png_rgb expects [3,H,W], got " << shape_str(img.shape()));
    const int64_t h = img.dim(1), w = img.dim(2), npx = h * w;
    const std::string tmp = path + ".tmp";
    FILE* fp = std::fopen(tmp.c_str(), "wb");
    SGSF_CHECK(fp, "cannot open '" << tmp << "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    std::vector<png_byte> buf(static_cast<size_t>(npx) * 3);
    std::vector<png_bytep> rows(h);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail("libpng failed writing '" + path + "'");
    }
    for (int64_t y = 0; y < h; ++y) {
        rows[y] = buf.data() + y * w * 3;
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const float v = std::min(1.f, std::max(0.f, img.ptr()[c * npx + y * w + x]));
                rows[y][x * 3 + c] = static_cast<png_byte>(std::lround(v * 255.f));
            }
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    std::filesystem::rename(tmp, path);
}

}  // namespace sgsf
