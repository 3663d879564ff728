// Copyright 2026 The fishforge authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "fishforge/image.hpp"

namespace fishforge {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    return FilePtr(std::fopen(path.c_str(), mode));
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) {
            if (png) png_destroy_read_struct(&png, &info, nullptr);
            throw io_error("libpng: failed to allocate read structs");
        }
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) {
            if (png) png_destroy_write_struct(&png, &info);
            throw io_error("libpng: failed to allocate write structs");
        }
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
    PngWriter(const PngWriter&) = delete;
    PngWriter& operator=(const PngWriter&) = delete;
};

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

inline bool has_png_signature(std::FILE* fp) {
    unsigned char sig[8];
    const bool ok = std::fread(sig, 1, 8, fp) == 8 && png_sig_cmp(sig, 0, 8) == 0;
    std::rewind(fp);
    return ok;
}

inline bool has_jpeg_signature(std::FILE* fp) {
    unsigned char sig[2];
    const bool ok = std::fread(sig, 1, 2, fp) == 2 && sig[0] == 0xFF && sig[1] == 0xD8;
    std::rewind(fp);
    return ok;
}

inline RasterImage load_png_color(std::FILE* fp, const std::string& path) {
    PngReader r;
    if (setjmp(png_jmpbuf(r.png)))
        throw io_error("undecodable PNG: " + path);
    png_init_io(r.png, fp);
    png_read_info(r.png, r.info);

    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (bit_depth == 16) png_set_strip_16(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(r.png);
    png_set_interlace_handling(r.png);
    png_read_update_info(r.png, r.info);

    const int channels = png_get_channels(r.png, r.info);
    if (channels != 3 && channels != 4)
        throw io_error("unsupported channel count (" + std::to_string(channels) + "): " + path);

    RasterImage img = RasterImage::create(png_get_image_width(r.png, r.info),
                                          png_get_image_height(r.png, r.info), channels);
    std::vector<png_bytep> rows(img.height);
    const std::size_t stride = static_cast<std::size_t>(img.width) * channels;
    for (int y = 0; y < img.height; ++y) rows[y] = img.data.data() + y * stride;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

inline RasterImage load_jpeg(std::FILE* fp, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw io_error("undecodable JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    RasterImage img = RasterImage::create(static_cast<int>(cinfo.output_width),
                                          static_cast<int>(cinfo.output_height), 3);
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.data.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

// Single-channel grayscale PNG, preserving 16-bit depth. Rejects color input.
struct GrayPixels {
    int width = 0;
    int height = 0;
    int bit_depth = 0;                 // 8 or 16
    std::vector<std::uint8_t> data8;   // when bit_depth == 8
    std::vector<std::uint16_t> data16; // when bit_depth == 16
};

inline GrayPixels load_png_gray(const std::string& path) {
    auto fp = open_file(path, "rb");
    if (!fp) throw io_error("file not found: " + path);
    if (!has_png_signature(fp.get())) throw io_error("not a PNG file: " + path);

    PngReader r;
    if (setjmp(png_jmpbuf(r.png)))
        throw io_error("undecodable PNG: " + path);
    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    const int color_type = png_get_color_type(r.png, r.info);
    if (color_type != PNG_COLOR_TYPE_GRAY)
        throw io_error("mask must be a single-channel grayscale PNG: " + path);
    if (png_get_bit_depth(r.png, r.info) < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    png_set_interlace_handling(r.png);
    png_read_update_info(r.png, r.info);

    GrayPixels g;
    g.width = static_cast<int>(png_get_image_width(r.png, r.info));
    g.height = static_cast<int>(png_get_image_height(r.png, r.info));
    g.bit_depth = png_get_bit_depth(r.png, r.info);

    std::vector<png_bytep> rows(g.height);
    if (g.bit_depth == 16) {
        png_set_swap(r.png);  // file is big-endian; we want host order
        g.data16.resize(static_cast<std::size_t>(g.width) * g.height);
        for (int y = 0; y < g.height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(g.data16.data() + static_cast<std::size_t>(y) * g.width);
    } else {
        g.data8.resize(static_cast<std::size_t>(g.width) * g.height);
        for (int y = 0; y < g.height; ++y)
            rows[y] = g.data8.data() + static_cast<std::size_t>(y) * g.width;
    }
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return g;
}

inline void write_png(const std::string& path, int width, int height, int color_type,
                      int bit_depth, const std::vector<png_bytep>& rows, bool swap16) {
    auto fp = open_file(path, "wb");
    if (!fp) throw io_error("unwritable path: " + path);
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png)))
        throw io_error("PNG write failed: " + path);
    png_init_io(w.png, fp.get());
    png_set_IHDR(w.png, w.info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    if (swap16) png_set_swap(w.png);
    png_write_image(w.png, const_cast<png_bytep*>(rows.data()));
    png_write_end(w.png, nullptr);
}

}  // namespace detail

/// Decode a PNG or JPEG file into an 8-bit RGB/RGBA raster.
inline RasterImage load_image(const std::string& path) {
    auto fp = detail::open_file(path, "rb");
    if (!fp) throw io_error("file not found: " + path);
    if (detail::has_png_signature(fp.get())) return detail::load_png_color(fp.get(), path);
    if (detail::has_jpeg_signature(fp.get())) return detail::load_jpeg(fp.get(), path);
    throw io_error("unsupported raster format: " + path);
}

/// Load an RGBA cut-out whose alpha channel is its segmentation label.
inline FishAsset load_asset(const std::string& path) {
    RasterImage img = load_image(path);
    if (img.channels != 4)
        throw io_error("asset must be RGBA (alpha is the label): " + path);
    return FishAsset::from_image(std::move(img));
}

/// Load an 8-bit grayscale PNG as a {0,255} mask; any nonzero sample is 255.
inline BinaryMask load_mask(const std::string& path) {
    detail::GrayPixels g = detail::load_png_gray(path);
    BinaryMask m = BinaryMask::create(g.width, g.height);
    if (g.bit_depth == 16) {
        for (std::size_t i = 0; i < g.data16.size(); ++i) m.data[i] = g.data16[i] ? 255 : 0;
    } else {
        for (std::size_t i = 0; i < g.data8.size(); ++i) m.data[i] = g.data8[i] ? 255 : 0;
    }
    return m;
}

/// Load a grayscale PNG as per-pixel probabilities. 16-bit samples map to
/// value/65535; 8-bit input is promoted with v*257 so 255 reads as 1.0.
inline SoftMask load_soft_mask(const std::string& path) {
    detail::GrayPixels g = detail::load_png_gray(path);
    SoftMask m = SoftMask::create(g.width, g.height);
    if (g.bit_depth == 16) {
        m.data = std::move(g.data16);
    } else {
        for (std::size_t i = 0; i < g.data8.size(); ++i)
            m.data[i] = static_cast<std::uint16_t>(g.data8[i] * 257);
    }
    return m;
}

/// Whether a grayscale PNG stores 16-bit (soft) or 8-bit (binary) samples.
inline int mask_bit_depth(const std::string& path) {
    return detail::load_png_gray(path).bit_depth;
}

inline void save_image(const RasterImage& img, const std::string& path) {
    if (!img.valid()) throw std::invalid_argument("save_image: invalid image");
    std::vector<png_bytep> rows(img.height);
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + y * stride);
    detail::write_png(path, img.width, img.height,
                      img.channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB, 8, rows,
                      false);
}

inline void save_mask(const BinaryMask& m, const std::string& path) {
    std::vector<png_bytep> rows(m.height);
    for (int y = 0; y < m.height; ++y)
        rows[y] = const_cast<png_bytep>(m.data.data() + static_cast<std::size_t>(y) * m.width);
    detail::write_png(path, m.width, m.height, PNG_COLOR_TYPE_GRAY, 8, rows, false);
}

inline void save_soft_mask(const SoftMask& m, const std::string& path) {
    std::vector<png_bytep> rows(m.height);
    for (int y = 0; y < m.height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(m.data.data() + static_cast<std::size_t>(y) * m.width));
    detail::write_png(path, m.width, m.height, PNG_COLOR_TYPE_GRAY, 16, rows, true);
}

/// 16-bit grayscale write for instance-id maps (0 = background).
inline void save_gray16(const std::vector<std::uint16_t>& data, int width, int height,
                        const std::string& path) {
    if (static_cast<std::size_t>(width) * height != data.size())
        throw std::invalid_argument("save_gray16: size mismatch");
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(data.data() + static_cast<std::size_t>(y) * width));
    detail::write_png(path, width, height, PNG_COLOR_TYPE_GRAY, 16, rows, true);
}

}  // namespace fishforge
