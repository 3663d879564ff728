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

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "fishforge/bilinear.hpp"
#include "fishforge/compositor.hpp"
#include "fishforge/config.hpp"
#include "fishforge/image.hpp"
#include "fishforge/rng.hpp"

namespace fishforge {

class placement_error : public std::runtime_error {
  public:
    explicit placement_error(const std::string& what) : std::runtime_error(what) {}
};

/// Rotation angle (radians), scale factors, and translation into background
/// pixel coordinates.
struct AffineParams {
    double alpha = 0.0;
    double sx = 1.0;
    double sy = 1.0;
    double tx = 0.0;
    double ty = 0.0;
};

/// 2x3 matrix mapping (x, y) -> (a*x + b*y + tx, c*x + d*y + ty).
struct AffineMatrix {
    double a = 1.0, b = 0.0, tx = 0.0;
    double c = 0.0, d = 1.0, ty = 0.0;

    Vec2 apply(Vec2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
    double det() const { return a * d - b * c; }

    AffineMatrix inverse() const {
        const double dt = det();
        if (std::abs(dt) < 1e-12)
            throw std::invalid_argument("AffineMatrix: singular matrix");
        AffineMatrix inv;
        inv.a = d / dt;
        inv.b = -b / dt;
        inv.c = -c / dt;
        inv.d = a / dt;
        inv.tx = -(inv.a * tx + inv.b * ty);
        inv.ty = -(inv.c * tx + inv.d * ty);
        return inv;
    }
};

/// Translate . scale . rotate, in that composition order.
inline AffineMatrix compose_affine(const AffineParams& p) {
    if (p.sx <= 0.0 || p.sy <= 0.0)
        throw std::invalid_argument("compose_affine: scale factors must be positive");
    const double cs = std::cos(p.alpha);
    const double sn = std::sin(p.alpha);
    AffineMatrix m;
    m.a = p.sx * cs;
    m.b = -p.sx * sn;
    m.c = p.sy * sn;
    m.d = p.sy * cs;
    m.tx = p.tx;
    m.ty = p.ty;
    return m;
}

/// Backward-mapped warp: each output pixel samples the asset at m^-1(pixel)
/// with bilinear interpolation on all four channels; samples falling outside
/// the asset are fully transparent.
inline FishAsset apply_affine(const FishAsset& asset, const AffineMatrix& m, int out_w,
                              int out_h) {
    if (out_w < 1 || out_h < 1)
        throw std::invalid_argument("apply_affine: output dimensions must be >= 1");
    const AffineMatrix inv = m.inverse();  // throws on singular input

    FishAsset out{RasterImage::create(out_w, out_h, 4)};
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const Vec2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            const auto v = detail::bilinear_rgba(asset.image, s.x, s.y);
            std::uint8_t* d = out.image.pixel(x, y);
            d[0] = detail::round_u8(v[0]);
            d[1] = detail::round_u8(v[1]);
            d[2] = detail::round_u8(v[2]);
            d[3] = detail::round_u8(v[3]);
        }
    }
    return out;
}

/// A transformed fish rendered into a tight local canvas, positioned on the
/// background by an integer origin.
struct PlacedAsset {
    FishAsset image;
    int origin_x = 0;
    int origin_y = 0;
};

/// Rasterize the asset under the full affine transform into a canvas that
/// covers the whole bilinear support, and record the canvas origin in
/// background coordinates. Deterministic in the parameters, so manifest
/// replay reproduces it exactly.
inline PlacedAsset render_affine(const FishAsset& asset, const AffineParams& p) {
    const AffineMatrix m = compose_affine(p);
    // Bilinear support of the source is the open rect (-1, W) x (-1, H).
    const double cx[4] = {-1.0, static_cast<double>(asset.width()), -1.0,
                          static_cast<double>(asset.width())};
    const double cy[4] = {-1.0, -1.0, static_cast<double>(asset.height()),
                          static_cast<double>(asset.height())};
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (int k = 0; k < 4; ++k) {
        const Vec2 q = m.apply({cx[k], cy[k]});
        x0 = std::min(x0, q.x);
        y0 = std::min(y0, q.y);
        x1 = std::max(x1, q.x);
        y1 = std::max(y1, q.y);
    }
    const int ox = static_cast<int>(std::floor(x0));
    const int oy = static_cast<int>(std::floor(y0));
    const int w = static_cast<int>(std::ceil(x1)) - ox + 1;
    const int h = static_cast<int>(std::ceil(y1)) - oy + 1;

    AffineMatrix local = m;
    local.tx -= ox;
    local.ty -= oy;
    return {apply_affine(asset, local, w, h), ox, oy};
}

namespace detail {

struct AffineDraw {
    AffineParams params;
    PlacedAsset placed;
};

// One candidate placement: rotation uniform on [0, 2pi), largest-dimension
// ratio uniform on the configured interval, translation uniform over every
// offset that keeps some overlap with the frame.
inline AffineDraw draw_affine_candidate(const GenConfig& cfg, int bg_w, int bg_h,
                                        const FishAsset& asset, RngStream& rng) {
    AffineParams p;
    p.alpha = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ratio = rng.uniform(cfg.ratio_lo, cfg.ratio_hi);
    const double s = ratio * std::max(bg_w, bg_h) /
                     static_cast<double>(std::max(asset.width(), asset.height()));
    p.sx = p.sy = s;

    // Extent of the rotated+scaled source rect before translation.
    const AffineMatrix lin = compose_affine({p.alpha, s, s, 0.0, 0.0});
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    const double cx[4] = {0.0, static_cast<double>(asset.width()), 0.0,
                          static_cast<double>(asset.width())};
    const double cy[4] = {0.0, 0.0, static_cast<double>(asset.height()),
                          static_cast<double>(asset.height())};
    for (int k = 0; k < 4; ++k) {
        const Vec2 q = lin.apply({cx[k], cy[k]});
        x0 = std::min(x0, q.x);
        y0 = std::min(y0, q.y);
        x1 = std::max(x1, q.x);
        y1 = std::max(y1, q.y);
    }
    p.tx = rng.uniform(-x1, bg_w - x0);
    p.ty = rng.uniform(-y1, bg_h - y0);
    return {p, render_affine(asset, p)};
}

}  // namespace detail

/// Rejection-sample affine parameters until at least half of the fish's
/// alpha>0 pixels land inside the background frame. `tries` both caps and
/// reports the placement attempts consumed.
inline AffineParams sample_affine_params(const GenConfig& cfg, int bg_w, int bg_h,
                                         const FishAsset& asset, RngStream& rng,
                                         int* tries_used = nullptr) {
    if (!(cfg.ratio_lo > 0.0 && cfg.ratio_lo <= cfg.ratio_hi))
        throw std::invalid_argument("sample_affine_params: invalid size-ratio interval");
    for (int attempt = 1; attempt <= cfg.max_placement_tries; ++attempt) {
        auto draw = detail::draw_affine_candidate(cfg, bg_w, bg_h, asset, rng);
        // Extreme downscales can round every alpha sample to zero; treat as a miss.
        if (draw.placed.image.opaque_count() == 0) continue;
        if (visibility_fraction(draw.placed.image, draw.placed.origin_x, draw.placed.origin_y,
                                bg_w, bg_h) >= 0.5) {
            if (tries_used) *tries_used = attempt;
            return draw.params;
        }
    }
    throw placement_error("no placement with >=50% visibility after " +
                          std::to_string(cfg.max_placement_tries) + " tries");
}

}  // namespace fishforge
