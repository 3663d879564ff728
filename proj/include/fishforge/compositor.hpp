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

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fishforge/bilinear.hpp"
#include "fishforge/image.hpp"

namespace fishforge {

/// Composition target: RGB image, accumulated {0,255} mask, and an
/// instance-id map where later pastes overwrite earlier ones.
struct Canvas {
    RasterImage image;                     // RGB
    BinaryMask mask;
    std::vector<std::uint16_t> instances;  // 0 = background
    int instance_count = 0;
    int alpha_cutoff = 127;

    static Canvas from_background(const RasterImage& bg, int alpha_cutoff = 127) {
        Canvas c;
        c.image = bg;
        if (bg.channels == 4) {  // drop alpha; backgrounds composite as opaque
            c.image = RasterImage::create(bg.width, bg.height, 3);
            for (int y = 0; y < bg.height; ++y)
                for (int x = 0; x < bg.width; ++x) {
                    const std::uint8_t* s = bg.pixel(x, y);
                    std::uint8_t* d = c.image.pixel(x, y);
                    d[0] = s[0];
                    d[1] = s[1];
                    d[2] = s[2];
                }
        }
        c.mask = BinaryMask::create(bg.width, bg.height);
        c.instances.assign(static_cast<std::size_t>(bg.width) * bg.height, 0);
        c.alpha_cutoff = alpha_cutoff;
        return c;
    }
};

/// Fraction of the asset's alpha>0 pixels that land inside a canvas of the
/// given dimensions when pasted at (origin_x, origin_y).
inline double visibility_fraction(const FishAsset& asset, int origin_x, int origin_y,
                                  int canvas_w, int canvas_h) {
    long long total = 0, inside = 0;
    for (int y = 0; y < asset.height(); ++y) {
        const bool row_in = (origin_y + y >= 0) && (origin_y + y < canvas_h);
        for (int x = 0; x < asset.width(); ++x) {
            if (asset.alpha(x, y) == 0) continue;
            ++total;
            if (row_in && origin_x + x >= 0 && origin_x + x < canvas_w) ++inside;
        }
    }
    if (total == 0) throw std::invalid_argument("visibility_fraction: asset has no alpha");
    return static_cast<double>(inside) / static_cast<double>(total);
}

/// "Over" blend the asset onto the canvas at an integer origin and OR its
/// thresholded alpha footprint into the mask. Later pastes occlude earlier
/// ones. Throws if no alpha>0 pixel lands in frame.
inline void paste(Canvas& canvas, const FishAsset& asset, int origin_x, int origin_y) {
    const RectI overlap = intersect({0, 0, canvas.image.width, canvas.image.height},
                                    {origin_x, origin_y, asset.width(), asset.height()});
    bool touched = false;
    const int id = canvas.instance_count + 1;
    for (int y = overlap.y; y < overlap.y + overlap.h; ++y) {
        for (int x = overlap.x; x < overlap.x + overlap.w; ++x) {
            const std::uint8_t* s = asset.image.pixel(x - origin_x, y - origin_y);
            const std::uint8_t a = s[3];
            if (a == 0) continue;
            touched = true;
            std::uint8_t* d = canvas.image.pixel(x, y);
            if (a == 255) {
                d[0] = s[0];
                d[1] = s[1];
                d[2] = s[2];
            } else {
                // out = (a*fish + (255-a)*bg) / 255, rounded to nearest
                const int ia = a, ib = 255 - a;
                d[0] = static_cast<std::uint8_t>((ia * s[0] + ib * d[0] + 127) / 255);
                d[1] = static_cast<std::uint8_t>((ia * s[1] + ib * d[1] + 127) / 255);
                d[2] = static_cast<std::uint8_t>((ia * s[2] + ib * d[2] + 127) / 255);
            }
            if (a > canvas.alpha_cutoff) {
                canvas.mask.at(x, y) = 255;
                canvas.instances[static_cast<std::size_t>(y) * canvas.image.width + x] =
                    static_cast<std::uint16_t>(id);
            }
        }
    }
    if (!touched) throw std::invalid_argument("paste: asset does not overlap the canvas");
    canvas.instance_count = id;
}

}  // namespace fishforge
