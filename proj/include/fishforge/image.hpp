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

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fishforge {

/// Thrown for file and codec failures; the message always names the path.
class io_error : public std::runtime_error {
  public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }

/// Integer pixel rectangle, half-open in both axes: [x, x+w) x [y, y+h).
struct RectI {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool empty() const { return w <= 0 || h <= 0; }
    long long area() const { return empty() ? 0 : static_cast<long long>(w) * h; }
    bool contains(int px, int py) const {
        return px >= x && px < x + w && py >= y && py < y + h;
    }
};

inline RectI intersect(RectI a, RectI b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.x + a.w, b.x + b.w);
    const int y1 = std::min(a.y + a.h, b.y + b.h);
    if (x1 <= x0 || y1 <= y0) return {};
    return {x0, y0, x1 - x0, y1 - y0};
}

/// Row-major interleaved 8-bit raster, RGB (3 channels) or RGBA (4).
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    static RasterImage create(int w, int h, int c, std::uint8_t fill = 0) {
        if (w < 1 || h < 1) throw std::invalid_argument("RasterImage: dimensions must be >= 1");
        if (c != 3 && c != 4) throw std::invalid_argument("RasterImage: channels must be 3 or 4");
        RasterImage img;
        img.width = w;
        img.height = h;
        img.channels = c;
        img.data.assign(static_cast<std::size_t>(w) * h * c, fill);
        return img;
    }

    bool valid() const {
        return width >= 1 && height >= 1 && (channels == 3 || channels == 4) &&
               data.size() == static_cast<std::size_t>(width) * height * channels;
    }

    std::uint8_t& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
    std::uint8_t* pixel(int x, int y) {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
};

/// Per-pixel {0,255} segmentation mask.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    static BinaryMask create(int w, int h, std::uint8_t fill = 0) {
        if (w < 1 || h < 1) throw std::invalid_argument("BinaryMask: dimensions must be >= 1");
        BinaryMask m;
        m.width = w;
        m.height = h;
        m.data.assign(static_cast<std::size_t>(w) * h, fill);
        return m;
    }

    bool valid() const {
        if (width < 1 || height < 1) return false;
        if (data.size() != static_cast<std::size_t>(width) * height) return false;
        return std::all_of(data.begin(), data.end(),
                           [](std::uint8_t v) { return v == 0 || v == 255; });
    }

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    long long count_positive() const {
        return std::count(data.begin(), data.end(), std::uint8_t{255});
    }
};

/// Per-pixel foreground probability, stored as 16-bit samples (value/65535).
struct SoftMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> data;

    static SoftMask create(int w, int h, std::uint16_t fill = 0) {
        if (w < 1 || h < 1) throw std::invalid_argument("SoftMask: dimensions must be >= 1");
        SoftMask m;
        m.width = w;
        m.height = h;
        m.data.assign(static_cast<std::size_t>(w) * h, fill);
        return m;
    }

    double prob(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x] / 65535.0;
    }
    std::uint16_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// RGBA foreground cut-out; the alpha channel is the segmentation label.
struct FishAsset {
    RasterImage image;

    static FishAsset from_image(RasterImage img) {
        if (img.channels != 4)
            throw std::invalid_argument("FishAsset: image must be RGBA");
        FishAsset a{std::move(img)};
        if (a.opaque_count() == 0)
            throw std::invalid_argument("FishAsset: alpha channel is empty");
        return a;
    }

    int width() const { return image.width; }
    int height() const { return image.height; }
    std::uint8_t alpha(int x, int y) const { return image.at(x, y, 3); }

    long long opaque_count() const {
        long long n = 0;
        const std::uint8_t* p = image.data.data() + 3;
        const std::size_t total = static_cast<std::size_t>(image.width) * image.height;
        for (std::size_t i = 0; i < total; ++i, p += 4) n += (*p > 0);
        return n;
    }

    /// Bounding box of alpha>0 pixels; empty rect if fully transparent.
    RectI alpha_bbox() const {
        int x0 = image.width, y0 = image.height, x1 = -1, y1 = -1;
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                if (alpha(x, y) > 0) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
            }
        }
        if (x1 < 0) return {};
        return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    }
};

// FNV-1a over dimensions plus raw samples. Used for manifest integrity checks.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const std::uint8_t*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t pixel_hash(const RasterImage& img) {
    const std::int32_t dims[3] = {img.width, img.height, img.channels};
    std::uint64_t h = fnv1a64(dims, sizeof dims);
    return fnv1a64(img.data.data(), img.data.size(), h);
}

inline std::uint64_t pixel_hash(const SoftMask& m) {
    const std::int32_t dims[2] = {m.width, m.height};
    std::uint64_t h = fnv1a64(dims, sizeof dims);
    return fnv1a64(m.data.data(), m.data.size() * sizeof(std::uint16_t), h);
}

}  // namespace fishforge
