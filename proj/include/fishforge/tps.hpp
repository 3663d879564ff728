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
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fishforge/bilinear.hpp"
#include "fishforge/config.hpp"
#include "fishforge/image.hpp"
#include "fishforge/rng.hpp"

namespace fishforge {

/// Signals a control-point configuration whose interpolation system is too
/// ill-conditioned to solve; callers should resample the points.
class tps_conditioning_error : public std::runtime_error {
  public:
    explicit tps_conditioning_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// U as a function of squared distance: r^2 ln r = 0.5 * r2 * ln r2. One
// shared formula keeps the solver's matrix and eval_tps bit-identical.
inline double tps_kernel_r2(double r2) {
    return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;
}

}  // namespace detail

/// Thin plate spline kernel U(r) = r^2 ln r, continuously extended by U(0)=0.
inline double tps_kernel(double r) {
    if (r < 0.0) throw std::invalid_argument("tps_kernel: negative distance");
    return detail::tps_kernel_r2(r * r);
}

/// Anchor pixels (x_i, y_i) with prescribed displacements (dx_i, dy_i).
struct ControlPointSet {
    std::vector<Vec2> points;
    std::vector<Vec2> displacements;

    std::size_t size() const { return points.size(); }

    void validate() const {
        if (points.size() < 3)
            throw std::invalid_argument("ControlPointSet: need at least 3 points");
        if (points.size() != displacements.size())
            throw std::invalid_argument("ControlPointSet: points/displacements mismatch");
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t j = i + 1; j < points.size(); ++j)
                if (points[i].x == points[j].x && points[i].y == points[j].y)
                    throw std::invalid_argument("ControlPointSet: duplicate control point");
    }

    /// Interpolation target of point i: its position plus its displacement.
    Vec2 target(std::size_t i) const { return points[i] + displacements[i]; }
};

/// Solved warp: kernel weights w and affine coefficients (a_1, a_x, a_y) for
/// each output axis.
struct TpsWarp {
    ControlPointSet cps;
    std::vector<double> wx, wy;
    std::array<double, 3> ax{0.0, 1.0, 0.0};
    std::array<double, 3> ay{0.0, 0.0, 1.0};
};

namespace detail {

// Dense LU with partial pivoting, row-major in place. piv[k] records the row
// swapped into position k. Returns the ratio min|u_kk| / max|u_kk| as a fast
// singularity screen (0 on an exactly singular pivot); lu_rcond_inf below is
// the estimate that conditioning decisions rest on.
inline double lu_factor(std::vector<double>& a, int n, std::vector<int>& piv) {
    piv.resize(n);
    double min_d = 1e300, max_d = 0.0;
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::abs(a[k * n + k]);
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(a[i * n + k]);
            if (v > best) {
                best = v;
                p = i;
            }
        }
        piv[k] = p;
        if (p != k)
            for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
        const double d = a[k * n + k];
        if (d == 0.0) return 0.0;
        min_d = std::min(min_d, std::abs(d));
        max_d = std::max(max_d, std::abs(d));
        const double inv = 1.0 / d;
        for (int i = k + 1; i < n; ++i) {
            const double f = a[i * n + k] * inv;
            a[i * n + k] = f;
            for (int j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
        }
    }
    return min_d / max_d;
}

inline void lu_solve(const std::vector<double>& lu, const std::vector<int>& piv, int n,
                     std::vector<double>& b) {
    // The factorization swaps whole rows, so L lives in final row order and
    // every recorded swap must hit b before the first elimination step.
    for (int k = 0; k < n; ++k)
        if (piv[k] != k) std::swap(b[k], b[piv[k]]);
    for (int k = 0; k < n; ++k)
        for (int i = k + 1; i < n; ++i) b[i] -= lu[i * n + k] * b[k];
    for (int i = n - 1; i >= 0; --i) {
        for (int j = i + 1; j < n; ++j) b[i] -= lu[i * n + j] * b[j];
        b[i] /= lu[i * n + i];
    }
}

// LU solve plus two rounds of iterative refinement against the original
// matrix. The side-condition rows of the interpolation system are orders of
// magnitude smaller than the kernel rows, and refinement is what keeps their
// residuals near the per-row rounding floor.
inline std::vector<double> solve_refined(const std::vector<double>& a,
                                         const std::vector<double>& lu,
                                         const std::vector<int>& piv, int n,
                                         const std::vector<double>& b) {
    std::vector<double> x = b;
    lu_solve(lu, piv, n, x);
    std::vector<double> r(n), d(n);
    for (int round = 0; round < 2; ++round) {
        for (int i = 0; i < n; ++i) {
            double s = b[i];
            for (int j = 0; j < n; ++j) s -= a[i * n + j] * x[j];
            r[i] = s;
        }
        d = r;
        lu_solve(lu, piv, n, d);
        for (int i = 0; i < n; ++i) x[i] += d[i];
    }
    return x;
}

// Reciprocal condition number 1 / (||A||_inf * ||A^-1||_inf), with the inverse
// norm taken from n unit-vector solves against the precomputed factors. The
// systems here are at most 11x11, so the exact norm costs less than the
// factorization that preceded it.
inline double lu_rcond_inf(const std::vector<double>& a, const std::vector<double>& lu,
                           const std::vector<int>& piv, int n) {
    double anorm = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += std::abs(a[i * n + j]);
        anorm = std::max(anorm, row);
    }
    std::vector<double> col(n), rowsum(n, 0.0);
    for (int j = 0; j < n; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        col[j] = 1.0;
        lu_solve(lu, piv, n, col);
        for (int i = 0; i < n; ++i) rowsum[i] += std::abs(col[i]);
    }
    const double invnorm = *std::max_element(rowsum.begin(), rowsum.end());
    if (anorm == 0.0 || invnorm == 0.0 || !std::isfinite(invnorm)) return 0.0;
    return 1.0 / (anorm * invnorm);
}

}  // namespace detail

/// Build and solve the (N+3)x(N+3) interpolation system
///   [ K  P ] [w]   [t]
///   [ P^T 0 ] [a] = [0]
/// once per output axis, where K_ij = U(||p_i - p_j||), row i of P is
/// (1, x_i, y_i) and t holds the displaced positions. Throws
/// tps_conditioning_error when the reciprocal condition estimate drops
/// below 1e-10.
///
/// The system is assembled in centered, rms-scaled coordinates and the
/// solution mapped back. In raw pixel coordinates the kernel rows sit around
/// 1e5 while the border rows are order one, which buries the geometry in the
/// condition number; after scaling, the estimate responds to degenerate point
/// layouts and to nothing else. The map back is exact: scaling distances by s
/// adds an s^2 ln(s) r^2 term to the kernel, and r^2 collapses to a constant
/// under the side conditions, so it folds into the affine part.
inline TpsWarp solve_tps(const ControlPointSet& cps) {
    cps.validate();
    const int n = static_cast<int>(cps.size());
    const int m = n + 3;

    double cx = 0.0, cy = 0.0;
    for (const Vec2& p : cps.points) {
        cx += p.x;
        cy += p.y;
    }
    cx /= n;
    cy /= n;
    double spread = 0.0;
    for (const Vec2& p : cps.points)
        spread += (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
    const double s = std::sqrt(spread / n);
    if (s == 0.0 || !std::isfinite(s))
        throw tps_conditioning_error("TPS control points have no spread; resample control points");

    std::vector<double> qx(n), qy(n);
    for (int i = 0; i < n; ++i) {
        qx[i] = (cps.points[i].x - cx) / s;
        qy[i] = (cps.points[i].y - cy) / s;
    }

    std::vector<double> sys(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = qx[i] - qx[j];
            const double dy = qy[i] - qy[j];
            const double u = detail::tps_kernel_r2(dx * dx + dy * dy);
            sys[i * m + j] = u;
            sys[j * m + i] = u;
        }
        sys[i * m + n] = 1.0;
        sys[i * m + n + 1] = qx[i];
        sys[i * m + n + 2] = qy[i];
        sys[n * m + i] = 1.0;
        sys[(n + 1) * m + i] = qx[i];
        sys[(n + 2) * m + i] = qy[i];
    }

    std::vector<double> lu = sys;
    std::vector<int> piv;
    double rcond = detail::lu_factor(lu, m, piv);
    if (rcond != 0.0) rcond = detail::lu_rcond_inf(sys, lu, piv, m);
    if (rcond < 1e-10)
        throw tps_conditioning_error("TPS system is ill-conditioned; resample control points");

    std::vector<double> bx(m, 0.0), by(m, 0.0);
    for (int i = 0; i < n; ++i) {
        bx[i] = (cps.target(i).x - cx) / s;
        by[i] = (cps.target(i).y - cy) / s;
    }
    const auto zx = detail::solve_refined(sys, lu, piv, m, bx);
    const auto zy = detail::solve_refined(sys, lu, piv, m, by);

    TpsWarp warp;
    warp.cps = cps;
    warp.wx.resize(n);
    warp.wy.resize(n);
    double kx = 0.0, ky = 0.0;
    for (int i = 0; i < n; ++i) {
        warp.wx[i] = zx[i] / s;
        warp.wy[i] = zy[i] / s;
        const double pp = cps.points[i].x * cps.points[i].x + cps.points[i].y * cps.points[i].y;
        kx += zx[i] * pp;
        ky += zy[i] * pp;
    }
    const double lss = std::log(s) / s;
    warp.ax = {s * zx[n] - zx[n + 1] * cx - zx[n + 2] * cy + cx - lss * kx, zx[n + 1], zx[n + 2]};
    warp.ay = {s * zy[n] - zy[n + 1] * cx - zy[n + 2] * cy + cy - lss * ky, zy[n + 1], zy[n + 2]};
    return warp;
}

/// Evaluate both warping functions at p:
///   f(p) = a_1 + a_x x + a_y y + sum_i w_i U(||p_i - p||), per axis.
inline Vec2 eval_tps(const TpsWarp& warp, Vec2 p) {
    double fx = warp.ax[0] + warp.ax[1] * p.x + warp.ax[2] * p.y;
    double fy = warp.ay[0] + warp.ay[1] * p.x + warp.ay[2] * p.y;
    const std::size_t n = warp.cps.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = warp.cps.points[i].x - p.x;
        const double dy = warp.cps.points[i].y - p.y;
        const double u = detail::tps_kernel_r2(dx * dx + dy * dy);
        fx += warp.wx[i] * u;
        fy += warp.wy[i] * u;
    }
    return {fx, fy};
}

/// A warped fish on a canvas padded by the rounded-up maximum displacement on
/// every side; the content origin moved by (-pad_x, -pad_y).
struct WarpedAsset {
    FishAsset image;
    int pad_x = 0;
    int pad_y = 0;
};

/// Backward-mapped TPS warp of all four channels: output pixel (x, y) samples
/// the source at f(x - pad, y - pad). Alpha rides the same mapping as color,
/// so the label stays consistent with the appearance.
inline WarpedAsset warp_asset(const FishAsset& asset, const ControlPointSet& cps) {
    const TpsWarp warp = solve_tps(cps);  // propagates conditioning errors

    double max_dx = 0.0, max_dy = 0.0;
    for (const Vec2& d : cps.displacements) {
        max_dx = std::max(max_dx, std::abs(d.x));
        max_dy = std::max(max_dy, std::abs(d.y));
    }
    const int pad_x = static_cast<int>(std::ceil(max_dx));
    const int pad_y = static_cast<int>(std::ceil(max_dy));

    const int out_w = asset.width() + 2 * pad_x;
    const int out_h = asset.height() + 2 * pad_y;
    WarpedAsset out{FishAsset{RasterImage::create(out_w, out_h, 4)}, pad_x, pad_y};
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const Vec2 s = eval_tps(warp, {static_cast<double>(x - pad_x),
                                           static_cast<double>(y - pad_y)});
            const auto v = detail::bilinear_rgba(asset.image, s.x, s.y);
            std::uint8_t* d = out.image.image.pixel(x, y);
            d[0] = detail::round_u8(v[0]);
            d[1] = detail::round_u8(v[1]);
            d[2] = detail::round_u8(v[2]);
            d[3] = detail::round_u8(v[3]);
        }
    }
    return out;
}

/// Draw cfg.tps_points control points uniformly over the alpha bounding box
/// and displacements uniform in [-f*W, f*W] x [-f*H, f*H], where (W, H) are
/// the asset dimensions. Resamples (up to 20 times) when the solve reports
/// ill-conditioning.
inline ControlPointSet sample_tps(int asset_w, int asset_h, RectI alpha_bbox,
                                  const GenConfig& cfg, RngStream& rng) {
    if (cfg.tps_points < 3)
        throw std::invalid_argument("sample_tps: need at least 3 control points");
    if (!(cfg.tps_fraction > 0.0 && cfg.tps_fraction <= 0.5))
        throw std::invalid_argument("sample_tps: tps_fraction must be in (0, 0.5]");
    if (alpha_bbox.empty())
        throw std::invalid_argument("sample_tps: empty alpha bounding box");

    const double dx_max = cfg.tps_fraction * asset_w;
    const double dy_max = cfg.tps_fraction * asset_h;
    for (int attempt = 0; attempt < 20; ++attempt) {
        ControlPointSet cps;
        cps.points.reserve(cfg.tps_points);
        cps.displacements.reserve(cfg.tps_points);
        for (int i = 0; i < cfg.tps_points; ++i)
            cps.points.push_back({rng.uniform(alpha_bbox.x, alpha_bbox.x + alpha_bbox.w),
                                  rng.uniform(alpha_bbox.y, alpha_bbox.y + alpha_bbox.h)});
        for (int i = 0; i < cfg.tps_points; ++i)
            cps.displacements.push_back(
                {rng.uniform(-dx_max, dx_max), rng.uniform(-dy_max, dy_max)});
        try {
            solve_tps(cps);
            return cps;
        } catch (const tps_conditioning_error&) {
            // resample
        }
    }
    throw tps_conditioning_error("sample_tps: repeated ill-conditioning after 20 attempts");
}

}  // namespace fishforge
