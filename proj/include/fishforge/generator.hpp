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
#include <atomic>
#include <cctype>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fishforge/affine.hpp"
#include "fishforge/compositor.hpp"
#include "fishforge/config.hpp"
#include "fishforge/histmatch.hpp"
#include "fishforge/image.hpp"
#include "fishforge/image_io.hpp"
#include "fishforge/manifest.hpp"
#include "fishforge/metrics.hpp"
#include "fishforge/rng.hpp"
#include "fishforge/tps.hpp"

namespace fishforge {

/// Fatal generation problem: nothing useful can be produced.
class generation_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Replayed state disagrees with the manifest's record.
class replay_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The fixed set of cut-outs fish are drawn from, with replacement.
struct AssetPool {
    struct Item {
        std::string path;
        std::uint64_t hash = 0;
        FishAsset asset;
    };
    std::vector<Item> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }

    /// Loads every .png in `dir`, sorted by filename so pool indices are
    /// stable across platforms. Unreadable files become warnings; an empty
    /// result is fatal.
    static AssetPool load(const std::string& dir, std::vector<std::string>* warnings = nullptr) {
        namespace fs = std::filesystem;
        if (!fs::is_directory(dir)) throw generation_error("asset directory not found: " + dir);
        std::vector<fs::path> paths;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            std::string ext = e.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".png") paths.push_back(e.path());
        }
        std::sort(paths.begin(), paths.end());

        AssetPool pool;
        for (const auto& p : paths) {
            try {
                Item item;
                item.path = p.string();
                item.asset = load_asset(item.path);
                item.hash = pixel_hash(item.asset.image);
                pool.items.push_back(std::move(item));
            } catch (const std::exception& e) {
                if (warnings)
                    warnings->push_back("skipping unreadable asset " + p.string() + ": " +
                                        e.what());
            }
        }
        if (pool.empty()) throw generation_error("empty asset pool: " + dir);
        return pool;
    }
};

namespace detail {

// Bounding box, in canvas coordinates, of the asset's alpha>0 pixels that
// land inside the canvas.
inline RectI inframe_alpha_bbox(const FishAsset& asset, int ox, int oy, int cw, int ch) {
    int x0 = cw, y0 = ch, x1 = -1, y1 = -1;
    for (int y = 0; y < asset.height(); ++y) {
        const int gy = oy + y;
        if (gy < 0 || gy >= ch) continue;
        for (int x = 0; x < asset.width(); ++x) {
            const int gx = ox + x;
            if (gx < 0 || gx >= cw) continue;
            if (asset.alpha(x, y) == 0) continue;
            x0 = std::min(x0, gx);
            y0 = std::min(y0, gy);
            x1 = std::max(x1, gx);
            y1 = std::max(y1, gy);
        }
    }
    if (x1 < 0) return RectI{};
    return RectI{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

// Rebuild the reference histogram a fish record pins down. Generation and
// replay both come through here, so the two can never diverge.
inline HistogramSpec reference_histogram(const ReferenceRecord& ref, const RasterImage& bg,
                                         const SoftMask* soft, double min_positive_fraction) {
    RngStream ref_rng(ref.sample_seed, 0);
    if (ref.kind == PixelSample::Region::BackgroundPatch) {
        const PixelSample s = stage1_reference(bg, ref.patch, ref.fraction, ref_rng);
        return compute_histogram(s);
    }
    if (!soft) throw replay_error("high-confidence reference without a soft mask");
    const auto s =
        stage2_reference(bg, *soft, ref.conf, min_positive_fraction, ref.fraction, ref_rng);
    if (!s) throw replay_error("recorded reference no longer passes the positive-pixel rule");
    if (s->qualifying != ref.qualifying)
        throw replay_error("qualifying-pixel count drifted from the manifest");
    return compute_histogram(*s);
}

struct RenderedFish {
    FishAsset image;  // warped + histogram-matched, ready to paste
    int origin_x = 0;
    int origin_y = 0;
};

// Deterministic render of one fish from its pinned parameters. Throws
// replay_error if any recorded intermediate disagrees with the recomputation.
inline RenderedFish render_fish(const FishRecord& rec, const FishAsset& asset,
                                const RasterImage& bg, const SoftMask* soft,
                                const GenConfig& cfg) {
    const PlacedAsset placed = render_affine(asset, rec.affine);
    if (placed.origin_x != rec.affine_origin_x || placed.origin_y != rec.affine_origin_y)
        throw replay_error("affine origin drifted from the manifest");
    const WarpedAsset warped = warp_asset(placed.image, rec.tps);
    if (warped.pad_x != rec.pad_x || warped.pad_y != rec.pad_y)
        throw replay_error("warp padding drifted from the manifest");
    const int ox = placed.origin_x - warped.pad_x;
    const int oy = placed.origin_y - warped.pad_y;
    if (ox != rec.origin_x || oy != rec.origin_y)
        throw replay_error("paste origin drifted from the manifest");

    const HistogramSpec hist =
        reference_histogram(rec.reference, bg, soft, cfg.min_positive_fraction);
    return RenderedFish{match_histogram(warped.image, hist), ox, oy};
}

// Sample one fish end to end: affine candidate, TPS warp, both visibility
// gates. Every rejected candidate consumes one placement try.
// `stage2_qualifying` is the precomputed |{soft >= conf}| (0 in stage 1).
inline FishRecord sample_fish(const AssetPool::Item& item, const RasterImage& bg,
                              const SoftMask* soft, long long stage2_qualifying,
                              const GenConfig& cfg, RngStream& rng) {
    FishRecord rec;
    rec.asset_path = item.path;
    rec.asset_hash = item.hash;
    rec.asset_width = item.asset.width();
    rec.asset_height = item.asset.height();

    for (int attempt = 1; attempt <= cfg.max_placement_tries; ++attempt) {
        const auto draw = draw_affine_candidate(cfg, bg.width, bg.height, item.asset, rng);
        if (draw.placed.image.opaque_count() == 0) continue;
        if (visibility_fraction(draw.placed.image, draw.placed.origin_x, draw.placed.origin_y,
                                bg.width, bg.height) < 0.5)
            continue;

        ControlPointSet cps;
        try {
            cps = sample_tps(draw.placed.image.width(), draw.placed.image.height(),
                             draw.placed.image.alpha_bbox(), cfg, rng);
        } catch (const tps_conditioning_error&) {
            continue;
        }
        const WarpedAsset warped = warp_asset(draw.placed.image, cps);
        if (warped.image.opaque_count() == 0) continue;
        const int ox = draw.placed.origin_x - warped.pad_x;
        const int oy = draw.placed.origin_y - warped.pad_y;
        const double vis =
            visibility_fraction(warped.image, ox, oy, bg.width, bg.height);
        if (vis < 0.5) continue;

        rec.affine = draw.params;
        rec.affine_origin_x = draw.placed.origin_x;
        rec.affine_origin_y = draw.placed.origin_y;
        rec.tps = cps;
        rec.pad_x = warped.pad_x;
        rec.pad_y = warped.pad_y;
        rec.origin_x = ox;
        rec.origin_y = oy;
        rec.visibility = vis;
        rec.tries_used = attempt;

        rec.reference.fraction = cfg.hm_sample_fraction;
        rec.reference.sample_seed = rng.next_u64();
        if (soft == nullptr) {
            rec.reference.kind = PixelSample::Region::BackgroundPatch;
            rec.reference.patch =
                inframe_alpha_bbox(warped.image, ox, oy, bg.width, bg.height);
            rec.reference.sample_count =
                sample_count(cfg.hm_sample_fraction, rec.reference.patch.area());
        } else {
            rec.reference.kind = PixelSample::Region::HighConfidencePositives;
            rec.reference.conf = cfg.conf_threshold;
            rec.reference.qualifying = stage2_qualifying;
            rec.reference.sample_count =
                sample_count(cfg.hm_sample_fraction, stage2_qualifying);
        }
        return rec;
    }
    throw placement_error("no valid placement after " +
                          std::to_string(cfg.max_placement_tries) + " tries");
}

}  // namespace detail

/// One finished example: composited image, accumulated mask, instance ids,
/// and the manifest entry (stem/round/io fields left for the caller).
struct GeneratedExample {
    RasterImage image;
    BinaryMask mask;
    std::vector<std::uint16_t> instances;
    EntryRecord entry;
};

namespace detail {

inline GeneratedExample generate_example(const RasterImage& bg, const SoftMask* soft,
                                         const AssetPool& pool, const GenConfig& cfg,
                                         RngStream& rng) {
    if (pool.empty()) throw generation_error("empty asset pool");

    GeneratedExample out;
    Canvas canvas = Canvas::from_background(bg, cfg.alpha_cutoff);
    if (soft) canvas.mask = binarize(*soft, cfg.pseudo_label_threshold);

    bool place = true;
    long long qualifying = 0;
    if (soft) {
        // Positive-pixel existence rule: with too small a confident area
        // there is nothing trustworthy to color-match against.
        for (const auto v : soft->data) qualifying += (v / 65535.0 >= cfg.conf_threshold);
        const double area = static_cast<double>(soft->data.size());
        if (static_cast<double>(qualifying) < cfg.min_positive_fraction * area - 1e-9) {
            place = false;
            out.entry.no_fish_rule = true;
        }
    }

    if (place) {
        const int n = sample_fish_count(cfg.fish_count, rng);
        for (int i = 0; i < n; ++i) {
            const auto idx = rng.below(static_cast<std::uint32_t>(pool.size()));
            const AssetPool::Item& item = pool.items[idx];
            try {
                FishRecord rec = detail::sample_fish(item, bg, soft, qualifying, cfg, rng);
                const detail::RenderedFish fish =
                    detail::render_fish(rec, item.asset, bg, soft, cfg);
                paste(canvas, fish.image, fish.origin_x, fish.origin_y);
                out.entry.fish.push_back(std::move(rec));
            } catch (const placement_error& e) {
                out.entry.skipped = true;
                out.entry.skip_reason = e.what();
                out.entry.warnings.push_back(std::string("placement failed, example skipped: ") +
                                             e.what());
                out.entry.fish.clear();
                return out;
            }
        }
    }

    out.image = std::move(canvas.image);
    out.mask = std::move(canvas.mask);
    out.instances = std::move(canvas.instances);
    return out;
}

}  // namespace detail

/// Algorithm: draw a fish count, then per fish sample affine parameters, TPS
/// control points, and a background-patch color reference; render and paste.
inline GeneratedExample generate_stage1_example(const RasterImage& bg, const AssetPool& pool,
                                                const GenConfig& cfg, RngStream& rng) {
    if (cfg.stage != 1) throw std::invalid_argument("generate_stage1_example: cfg.stage != 1");
    return detail::generate_example(bg, nullptr, pool, cfg, rng);
}

/// Stage 2 variant: the color reference comes from high-confidence positives
/// of the soft mask, the emitted mask is the union of the binarized
/// pseudo-label and the synthetic footprints, and the positive-pixel rule may
/// veto placement entirely.
inline GeneratedExample generate_stage2_example(const RasterImage& img, const SoftMask& soft,
                                                const AssetPool& pool, const GenConfig& cfg,
                                                RngStream& rng) {
    if (cfg.stage != 2) throw std::invalid_argument("generate_stage2_example: cfg.stage != 2");
    if (img.width != soft.width || img.height != soft.height)
        throw std::invalid_argument("generate_stage2_example: image/soft-mask dimension mismatch");
    return detail::generate_example(img, &soft, pool, cfg, rng);
}

struct DatasetInputs {
    std::string image_dir;  // stage 1: empty habitats; stage 2: training images
    std::string soft_dir;   // stage 2 only
    std::string asset_dir;
    std::string out_dir;
};

struct DatasetSummary {
    int images_written = 0;
    int fish_placed = 0;
    int skipped = 0;        // entries with nothing written
    int no_fish_rule = 0;   // stage 2 entries vetoed by the positive-pixel rule
};

namespace detail {

struct WorkUnit {
    std::string stem;
    int round = 0;
    std::string image_path;
    std::string soft_path;  // stage 2
};

inline std::vector<std::filesystem::path> list_rasters(const std::string& dir,
                                                       bool require_png_only) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw generation_error("input directory not found: " + dir);
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        const bool ok = require_png_only ? (ext == ".png")
                                         : (ext == ".png" || ext == ".jpg" || ext == ".jpeg");
        if (ok) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string output_stem(const std::string& stem, int round) {
    return stem + "_r" + std::to_string(round);
}

// Run `fn(i)` for i in [0, n) on up to `jobs` threads. The first exception
// wins; remaining units still drain so no thread is left detached.
template <typename Fn>
inline void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n ? n : 1)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        threads.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Generate one output pair per (input, round), write the tree plus
/// manifest.json, and return the manifest. Each unit draws from its own RNG
/// stream derived from (seed, stem, round), so results do not depend on
/// `jobs` or scheduling.
inline Manifest generate_dataset(const DatasetInputs& in, const GenConfig& cfg, int rounds,
                                 int jobs, DatasetSummary* summary = nullptr) {
    namespace fs = std::filesystem;
    cfg.validate();
    if (rounds < 1) throw generation_error("rounds must be >= 1");
    if (jobs < 1) throw generation_error("jobs must be >= 1");

    Manifest manifest;
    manifest.config = cfg;

    const AssetPool pool = AssetPool::load(in.asset_dir, &manifest.warnings);

    const auto images = detail::list_rasters(in.image_dir, false);
    if (cfg.stage == 2 && !fs::is_directory(in.soft_dir))
        throw generation_error("soft-mask directory not found: " + in.soft_dir);
    std::vector<detail::WorkUnit> inputs;
    std::map<std::string, bool> seen_stem;
    for (const auto& p : images) {
        const std::string stem = p.stem().string();
        if (seen_stem.count(stem)) {
            manifest.warnings.push_back("duplicate stem skipped: " + p.string());
            continue;
        }
        seen_stem[stem] = true;
        detail::WorkUnit u;
        u.stem = stem;
        u.image_path = p.string();
        if (cfg.stage == 2) {
            const fs::path soft = fs::path(in.soft_dir) / (stem + ".png");
            if (!fs::is_regular_file(soft)) {
                manifest.warnings.push_back("no soft mask for stem " + stem + ", skipped");
                continue;
            }
            u.soft_path = soft.string();
        }
        inputs.push_back(std::move(u));
    }
    if (inputs.empty()) throw generation_error("no usable inputs in " + in.image_dir);

    std::vector<detail::WorkUnit> units;
    for (const auto& u : inputs)
        for (int r = 0; r < rounds; ++r) {
            detail::WorkUnit unit = u;
            unit.round = r;
            units.push_back(std::move(unit));
        }
    // Units are already (stem, round)-sorted; with the `<stem>_r<round>`
    // naming this is the output-name order the manifest promises.

    fs::create_directories(in.out_dir);

    std::vector<EntryRecord> entries(units.size());
    detail::parallel_for(units.size(), jobs, [&](std::size_t i) {
        const detail::WorkUnit& u = units[i];
        EntryRecord& e = entries[i];
        e.stem = u.stem;
        e.round = u.round;
        e.stream = derive_stream(cfg.master_seed, u.stem, u.round);
        e.background.path = u.image_path;

        RasterImage bg;
        SoftMask soft;
        try {
            bg = load_image(u.image_path);
            e.background.hash = pixel_hash(bg);
            e.background.width = bg.width;
            e.background.height = bg.height;
            if (cfg.stage == 2) {
                soft = load_soft_mask(u.soft_path);
                InputRecord sm;
                sm.path = u.soft_path;
                sm.hash = pixel_hash(soft);
                sm.width = soft.width;
                sm.height = soft.height;
                e.soft_mask = sm;
                if (soft.width != bg.width || soft.height != bg.height)
                    throw io_error("soft mask dimensions do not match the image");
            }
        } catch (const std::exception& ex) {
            e.skipped = true;
            e.skip_reason = ex.what();
            e.warnings.push_back(std::string("unreadable input, skipped: ") + ex.what());
            return;
        }

        RngStream rng(cfg.master_seed, e.stream);
        GeneratedExample g =
            (cfg.stage == 2) ? generate_stage2_example(bg, soft, pool, cfg, rng)
                             : generate_stage1_example(bg, pool, cfg, rng);
        g.entry.stem = e.stem;
        g.entry.round = e.round;
        g.entry.stream = e.stream;
        g.entry.background = e.background;
        g.entry.soft_mask = e.soft_mask;
        e = std::move(g.entry);
        if (e.skipped) return;

        const std::string base = detail::output_stem(u.stem, u.round);
        e.out_image = base + ".png";
        e.out_mask = base + "_mask.png";
        save_image(g.image, (fs::path(in.out_dir) / e.out_image).string());
        save_mask(g.mask, (fs::path(in.out_dir) / e.out_mask).string());
        if (cfg.emit_instance_maps) {
            e.out_instances = base + "_instances.png";
            save_gray16(g.instances, g.image.width, g.image.height,
                        (fs::path(in.out_dir) / e.out_instances).string());
        }
    });

    manifest.entries = std::move(entries);
    if (summary) {
        for (const auto& e : manifest.entries) {
            if (e.skipped) {
                ++summary->skipped;
                continue;
            }
            ++summary->images_written;
            summary->fish_placed += static_cast<int>(e.fish.size());
            if (e.no_fish_rule) ++summary->no_fish_rule;
        }
    }
    save_manifest(manifest, (fs::path(in.out_dir) / "manifest.json").string());
    return manifest;
}

/// Re-render every (or one `--only`-selected) entry of a recorded run from
/// its pinned parameters. No sampling happens; inputs are verified against
/// the recorded hashes and dimensions first.
inline DatasetSummary replay_manifest(const Manifest& manifest, const std::string& out_dir,
                                      const std::string& only = std::string(), int jobs = 1) {
    namespace fs = std::filesystem;
    manifest.config.validate();
    const GenConfig& cfg = manifest.config;

    std::vector<const EntryRecord*> selected;
    for (const auto& e : manifest.entries) {
        if (!only.empty() && e.stem != only &&
            detail::output_stem(e.stem, e.round) != only)
            continue;
        selected.push_back(&e);
    }
    if (selected.empty())
        throw replay_error(only.empty() ? "manifest has no entries"
                                        : "--only matches no manifest entry: " + only);

    // Assets verify once up front; entries then share the cache read-only.
    std::map<std::string, FishAsset> assets;
    for (const auto* e : selected)
        for (const auto& f : e->fish) {
            if (assets.count(f.asset_path)) continue;
            FishAsset a = load_asset(f.asset_path);
            if (pixel_hash(a.image) != f.asset_hash || a.width() != f.asset_width ||
                a.height() != f.asset_height)
                throw replay_error("asset changed since generation: " + f.asset_path);
            assets.emplace(f.asset_path, std::move(a));
        }

    fs::create_directories(out_dir);

    DatasetSummary summary;
    std::mutex summary_mutex;
    detail::parallel_for(selected.size(), jobs, [&](std::size_t i) {
        const EntryRecord& e = *selected[i];
        if (e.skipped) {
            std::lock_guard<std::mutex> lock(summary_mutex);
            ++summary.skipped;
            return;
        }

        RasterImage bg = load_image(e.background.path);
        if (pixel_hash(bg) != e.background.hash || bg.width != e.background.width ||
            bg.height != e.background.height)
            throw replay_error("background changed since generation: " + e.background.path);

        SoftMask soft;
        const SoftMask* soft_ptr = nullptr;
        if (e.soft_mask) {
            soft = load_soft_mask(e.soft_mask->path);
            if (pixel_hash(soft) != e.soft_mask->hash || soft.width != e.soft_mask->width ||
                soft.height != e.soft_mask->height)
                throw replay_error("soft mask changed since generation: " + e.soft_mask->path);
            soft_ptr = &soft;
        }

        Canvas canvas = Canvas::from_background(bg, cfg.alpha_cutoff);
        if (soft_ptr) canvas.mask = binarize(soft, cfg.pseudo_label_threshold);
        for (const auto& f : e.fish) {
            const detail::RenderedFish fish =
                detail::render_fish(f, assets.at(f.asset_path), bg, soft_ptr, cfg);
            paste(canvas, fish.image, fish.origin_x, fish.origin_y);
        }

        save_image(canvas.image, (fs::path(out_dir) / e.out_image).string());
        save_mask(canvas.mask, (fs::path(out_dir) / e.out_mask).string());
        if (!e.out_instances.empty())
            save_gray16(canvas.instances, canvas.image.width, canvas.image.height,
                        (fs::path(out_dir) / e.out_instances).string());

        std::lock_guard<std::mutex> lock(summary_mutex);
        ++summary.images_written;
        summary.fish_placed += static_cast<int>(e.fish.size());
        if (e.no_fish_rule) ++summary.no_fish_rule;
    });
    return summary;
}

}  // namespace fishforge
