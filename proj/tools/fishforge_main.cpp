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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fishforge/fishforge.hpp"

namespace fs = std::filesystem;
using namespace fishforge;

namespace {

// Exit codes: 0 success, 1 fatal config/input error, 2 partial run (per-file
// skips occurred).
constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct GenCliOpts {
    std::string backgrounds;  // stage 1 / preview
    std::string images;       // stage 2
    std::string soft;         // stage 2
    std::string assets;
    std::string out;
    std::uint64_t seed = 0;
    int rounds = 1;
    int jobs = 1;
    int count = 4;  // preview
    std::vector<double> ratio;
    int tps_points = 3;
    double tps_fraction = 0.2;
    double hm_fraction = 0.10;
    double conf = 0.8;
    double min_positive = 0.01;
    double pseudo_threshold = 0.5;
    std::string dist;
    int alpha_cutoff = 127;
    int max_tries = 100;
    bool instance_maps = false;
};

void add_common_gen_options(CLI::App* cmd, GenCliOpts& o, int stage) {
    const GenConfig defaults;
    o.ratio = {defaults.ratio_lo, defaults.ratio_hi};
    o.tps_points = defaults.tps_points;
    o.tps_fraction = defaults.tps_fraction;
    o.hm_fraction = defaults.hm_sample_fraction;
    o.conf = defaults.conf_threshold;
    o.min_positive = defaults.min_positive_fraction;
    o.pseudo_threshold = defaults.pseudo_label_threshold;
    o.alpha_cutoff = defaults.alpha_cutoff;
    o.max_tries = defaults.max_placement_tries;
    // Stage-specific count defaults: uniform over {1..3} fish, or the
    // {none: 0.2, one: 0.8} table when augmenting training images.
    o.dist = (stage == 2) ? "0:0.2,1:0.8" : defaults.fish_count.to_string();

    cmd->add_option("--assets", o.assets, "directory of RGBA PNG fish assets")->required();
    cmd->add_option("--seed", o.seed, "master seed (env FISHFORGE_SEED)")
        ->envname("FISHFORGE_SEED");
    cmd->add_option("--ratio", o.ratio, "size-ratio interval: LO HI")
        ->expected(2);
    cmd->add_option("--tps-points", o.tps_points, "TPS control points per fish");
    cmd->add_option("--tps-fraction", o.tps_fraction,
                    "TPS displacement range as a fraction of each dimension");
    cmd->add_option("--hm-fraction", o.hm_fraction,
                    "fraction of reference-region pixels sampled for histogram matching");
    cmd->add_option("--conf", o.conf, "stage 2 confidence gate on soft masks");
    cmd->add_option("--min-positive", o.min_positive,
                    "stage 2 minimum fraction of confident pixels required to place fish");
    cmd->add_option("--dist", o.dist, "fish-count distribution, e.g. \"0:0.2,1:0.8\"");
    cmd->add_option("--alpha-cutoff", o.alpha_cutoff, "alpha level above which a pixel is mask");
    cmd->add_option("--max-tries", o.max_tries, "placement attempts per fish");
    cmd->add_flag("--instance-maps", o.instance_maps, "also write 16-bit instance-id maps");
    if (stage == 2)
        cmd->add_option("--pseudo-threshold", o.pseudo_threshold,
                        "binarization threshold for the pseudo-label target mask");
}

GenConfig build_config(const GenCliOpts& o, int stage) {
    GenConfig cfg;
    cfg.stage = stage;
    cfg.ratio_lo = o.ratio.at(0);
    cfg.ratio_hi = o.ratio.at(1);
    cfg.tps_points = o.tps_points;
    cfg.tps_fraction = o.tps_fraction;
    cfg.hm_sample_fraction = o.hm_fraction;
    cfg.conf_threshold = o.conf;
    cfg.min_positive_fraction = o.min_positive;
    cfg.pseudo_label_threshold = o.pseudo_threshold;
    cfg.fish_count = FishCountDistribution::parse(o.dist);
    cfg.master_seed = o.seed;
    cfg.max_placement_tries = o.max_tries;
    cfg.alpha_cutoff = o.alpha_cutoff;
    cfg.emit_instance_maps = o.instance_maps;
    cfg.validate();
    return cfg;
}

int report_gen(const Manifest& manifest, const DatasetSummary& s, const std::string& out,
               int stage) {
    std::cout << "wrote " << s.images_written << " image/mask pair(s), " << s.fish_placed
              << " fish, to " << out << "\n";
    if (stage == 2)
        std::cout << "no-fish rule applied to " << s.no_fish_rule << " image(s)\n";
    if (s.skipped > 0) std::cout << "skipped " << s.skipped << " input(s)\n";
    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& e : manifest.entries)
        for (const auto& w : e.warnings)
            std::cerr << "warning [" << e.stem << "_r" << e.round << "]: " << w << "\n";
    const bool partial = s.skipped > 0 || !manifest.warnings.empty();
    return partial ? kExitPartial : kExitOk;
}

int cmd_gen(const GenCliOpts& o, int stage) {
    const GenConfig cfg = build_config(o, stage);
    DatasetInputs in;
    in.image_dir = (stage == 2) ? o.images : o.backgrounds;
    in.soft_dir = o.soft;
    in.asset_dir = o.assets;
    in.out_dir = o.out;
    DatasetSummary summary;
    const Manifest manifest = generate_dataset(in, cfg, o.rounds, o.jobs, &summary);
    return report_gen(manifest, summary, o.out, stage);
}

struct EvalOpts {
    std::string pred;
    std::string gt;
    std::string out;  // report file; stdout when empty
};

// A prediction directory is "soft" if any file is 16-bit or an 8-bit file
// holds values other than {0, 255}.
bool predictions_are_soft(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
        if (mask_bit_depth(p) == 16) return true;
        const SoftMask m = load_soft_mask(p);
        for (const auto v : m.data)
            if (v != 0 && v != 65535) return true;
    }
    return false;
}

int cmd_eval(const EvalOpts& o) {
    if (!fs::is_directory(o.pred)) throw generation_error("prediction directory not found: " + o.pred);
    if (!fs::is_directory(o.gt)) throw generation_error("reference directory not found: " + o.gt);

    std::vector<std::string> stems;
    std::vector<std::string> pred_paths, gt_paths;
    for (const auto& e : fs::directory_iterator(o.pred)) {
        if (!e.is_regular_file() || e.path().extension() != ".png") continue;
        const std::string stem = e.path().stem().string();
        const fs::path gt_path = fs::path(o.gt) / (stem + ".png");
        if (!fs::is_regular_file(gt_path)) {
            std::cerr << "warning: no reference mask for stem " << stem << "\n";
            continue;
        }
        stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end());
    for (const auto& s : stems) {
        pred_paths.push_back((fs::path(o.pred) / (s + ".png")).string());
        gt_paths.push_back((fs::path(o.gt) / (s + ".png")).string());
    }
    if (stems.empty()) throw generation_error("no stem-matched prediction/reference pairs");

    const bool soft_mode = predictions_are_soft(pred_paths);

    nlohmann::json report;
    report["mode"] = soft_mode ? "soft" : "binary";
    report["pairs"] = stems.size();

    double best_t = 0.5;
    std::vector<BinaryMask> preds;
    std::vector<BinaryMask> gts;
    preds.reserve(stems.size());
    gts.reserve(stems.size());
    for (const auto& p : gt_paths) gts.push_back(load_mask(p));

    if (soft_mode) {
        std::vector<SoftMask> softs;
        softs.reserve(stems.size());
        for (const auto& p : pred_paths) softs.push_back(load_soft_mask(p));
        const auto sweep = pr_sweep(softs, gts, default_threshold_grid());
        best_t = best_dice_threshold(sweep);
        nlohmann::json pr = nlohmann::json::array();
        for (const auto& pt : sweep)
            pr.push_back({{"threshold", pt.threshold},
                          {"precision", pt.precision},
                          {"recall", pt.recall},
                          {"dice", pt.dice}});
        report["pr"] = std::move(pr);
        report["best_threshold"] = best_t;
        for (const auto& s : softs) preds.push_back(binarize(s, best_t));
    } else {
        for (const auto& p : pred_paths) preds.push_back(load_mask(p));
    }

    nlohmann::json per_image = nlohmann::json::array();
    std::uint64_t g_inter = 0, g_union = 0, g_a = 0, g_b = 0;
    for (std::size_t i = 0; i < stems.size(); ++i) {
        if (preds[i].width != gts[i].width || preds[i].height != gts[i].height)
            throw generation_error("dimension mismatch for stem " + stems[i]);
        per_image.push_back(
            {{"stem", stems[i]}, {"dice", dice(preds[i], gts[i])}, {"iou", iou(preds[i], gts[i])}});
        for (std::size_t k = 0; k < preds[i].data.size(); ++k) {
            const bool p = preds[i].data[k] != 0, g = gts[i].data[k] != 0;
            g_inter += p && g;
            g_union += p || g;
            g_a += p;
            g_b += g;
        }
    }
    report["per_image"] = std::move(per_image);
    report["pooled"] = {
        {"dice", (g_a + g_b) ? 2.0 * static_cast<double>(g_inter) / static_cast<double>(g_a + g_b)
                             : 1.0},
        {"iou",
         g_union ? static_cast<double>(g_inter) / static_cast<double>(g_union) : 1.0}};

    const std::string text = report.dump(2) + "\n";
    if (o.out.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(o.out, std::ios::binary);
        if (!f) throw io_error("unwritable path: " + o.out);
        f << text;
        std::cout << "report written to " << o.out << "\n";
    }
    return kExitOk;
}

struct ReplayOpts {
    std::string manifest;
    std::string out;
    std::string only;
    int jobs = 1;
};

int cmd_replay(const ReplayOpts& o) {
    const Manifest manifest = load_manifest(o.manifest);
    const std::string out =
        o.out.empty() ? fs::path(o.manifest).parent_path().string() : o.out;
    const DatasetSummary s = replay_manifest(manifest, out.empty() ? "." : out, o.only, o.jobs);
    std::cout << "replayed " << s.images_written << " image/mask pair(s), " << s.fish_placed
              << " fish, to " << (out.empty() ? "." : out) << "\n";
    if (s.skipped > 0)
        std::cout << s.skipped << " entr(ies) were recorded as skipped; nothing to replay\n";
    return kExitOk;
}

int cmd_preview(const GenCliOpts& o) {
    GenConfig cfg = build_config(o, 1);
    std::vector<std::string> warnings;
    const AssetPool pool = AssetPool::load(o.assets, &warnings);
    const auto bgs = fishforge::detail::list_rasters(o.backgrounds, false);
    if (bgs.empty()) throw generation_error("no usable inputs in " + o.backgrounds);
    if (o.count < 1) throw generation_error("count must be >= 1");

    Manifest manifest;
    manifest.config = cfg;
    manifest.warnings = warnings;

    struct Cell {
        RasterImage image;
        BinaryMask mask;
        bool ok = false;
    };
    std::vector<Cell> cells(o.count);
    int cell_w = 0, cell_h = 0;
    bool partial = false;
    for (int i = 0; i < o.count; ++i) {
        const fs::path& bg_path = bgs[static_cast<std::size_t>(i) % bgs.size()];
        const int round = i / static_cast<int>(bgs.size());
        const std::string stem = bg_path.stem().string();

        EntryRecord entry;
        entry.stem = stem;
        entry.round = round;
        entry.stream = derive_stream(cfg.master_seed, stem, round);
        entry.background.path = bg_path.string();
        try {
            const RasterImage bg = load_image(bg_path.string());
            entry.background.hash = pixel_hash(bg);
            entry.background.width = bg.width;
            entry.background.height = bg.height;
            RngStream rng(cfg.master_seed, entry.stream);
            GeneratedExample g = generate_stage1_example(bg, pool, cfg, rng);
            g.entry.stem = entry.stem;
            g.entry.round = entry.round;
            g.entry.stream = entry.stream;
            g.entry.background = entry.background;
            entry = std::move(g.entry);
            if (!entry.skipped) {
                entry.out_image = fishforge::detail::output_stem(stem, round) + ".png";
                entry.out_mask = fishforge::detail::output_stem(stem, round) + "_mask.png";
                cells[i].image = std::move(g.image);
                cells[i].mask = std::move(g.mask);
                cells[i].ok = true;
                cell_w = std::max(cell_w, cells[i].image.width);
                cell_h = std::max(cell_h, cells[i].image.height);
            } else {
                partial = true;
            }
        } catch (const std::exception& ex) {
            entry.skipped = true;
            entry.skip_reason = ex.what();
            entry.warnings.push_back(std::string("unreadable input, skipped: ") + ex.what());
            partial = true;
        }
        manifest.entries.push_back(std::move(entry));
    }
    if (cell_w == 0) throw generation_error("no preview cells could be generated");

    // count rows by two columns: composited image on the left, mask on the
    // right.
    RasterImage sheet = RasterImage::create(cell_w * 2, cell_h * o.count, 3);
    for (int i = 0; i < o.count; ++i) {
        if (!cells[i].ok) continue;
        const RasterImage& img = cells[i].image;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const std::uint8_t* s = img.pixel(x, y);
                std::uint8_t* d = sheet.pixel(x, i * cell_h + y);
                d[0] = s[0];
                d[1] = s[1];
                d[2] = s[2];
            }
        const BinaryMask& m = cells[i].mask;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                const std::uint8_t v = m.at(x, y);
                std::uint8_t* d = sheet.pixel(cell_w + x, i * cell_h + y);
                d[0] = d[1] = d[2] = v;
            }
    }
    save_image(sheet, o.out);

    fs::path mpath(o.out);
    mpath.replace_extension();
    mpath += "_manifest.json";
    save_manifest(manifest, mpath.string());
    std::cout << "wrote " << o.count << "x2 contact sheet to " << o.out << "\n";

    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& e : manifest.entries)
        for (const auto& w : e.warnings)
            std::cerr << "warning [" << e.stem << "_r" << e.round << "]: " << w << "\n";
    return partial ? kExitPartial : kExitOk;
}

int run(int argc, char** argv) {
    CLI::App app{"fishforge: deterministic synthetic-fish dataset generator"};
    app.set_version_flag("--version", kVersionString);
    app.set_config("--config", "", "TOML config file with [subcommand] sections");
    app.fallthrough(true);
    app.require_subcommand(1);

    GenCliOpts s1o, s2o, pvo;
    EvalOpts eo;
    ReplayOpts ro;

    auto* s1 = app.add_subcommand("gen-stage1",
                                  "plant color-matched fish into empty habitat backgrounds");
    s1->add_option("--backgrounds", s1o.backgrounds, "directory of background images")->required();
    s1->add_option("--out", s1o.out, "output directory")->required();
    s1->add_option("--rounds", s1o.rounds, "independently seeded passes over the inputs")
        ->check(CLI::PositiveNumber);
    s1->add_option("--jobs", s1o.jobs, "worker threads")->check(CLI::PositiveNumber);
    add_common_gen_options(s1, s1o, 1);

    auto* s2 = app.add_subcommand(
        "gen-stage2", "plant fish color-matched to confident positives of soft masks");
    s2->add_option("--images", s2o.images, "directory of training images")->required();
    s2->add_option("--soft", s2o.soft, "directory of soft masks (PNG, matched by stem)")
        ->required();
    s2->add_option("--out", s2o.out, "output directory")->required();
    s2->add_option("--rounds", s2o.rounds, "independently seeded passes over the inputs")
        ->check(CLI::PositiveNumber);
    s2->add_option("--jobs", s2o.jobs, "worker threads")->check(CLI::PositiveNumber);
    add_common_gen_options(s2, s2o, 2);

    auto* ev = app.add_subcommand("eval", "Dice/IoU report for stem-matched mask pairs");
    ev->add_option("--pred", eo.pred, "directory of predicted masks (binary or soft)")
        ->required();
    ev->add_option("--gt", eo.gt, "directory of reference masks")->required();
    ev->add_option("--out", eo.out, "report file (stdout when omitted)");

    auto* rp = app.add_subcommand("replay", "re-render a recorded run byte-exactly");
    rp->add_option("--manifest", ro.manifest, "manifest.json of a previous run")->required();
    rp->add_option("--out", ro.out, "output directory (defaults to the manifest's directory)");
    rp->add_option("--only", ro.only, "replay a single stem or stem_rN entry");
    rp->add_option("--jobs", ro.jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* pv = app.add_subcommand("preview", "contact sheet of generated image/mask pairs");
    pv->add_option("--backgrounds", pvo.backgrounds, "directory of background images")
        ->required();
    pv->add_option("--out", pvo.out, "output PNG path")->required();
    pv->add_option("--count", pvo.count, "examples on the sheet")->check(CLI::PositiveNumber);
    add_common_gen_options(pv, pvo, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFatal;
    }

    if (s1->parsed()) return cmd_gen(s1o, 1);
    if (s2->parsed()) return cmd_gen(s2o, 2);
    if (ev->parsed()) return cmd_eval(eo);
    if (rp->parsed()) return cmd_replay(ro);
    if (pv->parsed()) return cmd_preview(pvo);
    return kExitFatal;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
}
