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

#include <array>
#include <cmath>

#include "fishforge/image.hpp"

namespace fishforge::detail {

// Bilinear RGBA sample at real (x, y); pixel (i, j) sits at coordinate (i, j).
// Texels outside the source contribute (0,0,0,0), so warped edges fade to
// transparent instead of clamping.
inline std::array<double, 4> bilinear_rgba(const RasterImage& src, double x, double y) {
    std::array<double, 4> out{0.0, 0.0, 0.0, 0.0};
    if (x <= -1.0 || y <= -1.0 || x >= src.width || y >= src.height) return out;

    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const double w[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};

    for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        if (xs[k] < 0 || xs[k] >= src.width || ys[k] < 0 || ys[k] >= src.height) continue;
        const std::uint8_t* p = src.pixel(xs[k], ys[k]);
        for (int c = 0; c < 4; ++c) out[c] += w[k] * p[c];
    }
    return out;
}

inline std::uint8_t round_u8(double v) {
    if (v <= 0.0) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace fishforge::detail
