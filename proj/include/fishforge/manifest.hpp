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
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fishforge/affine.hpp"
#include "fishforge/config.hpp"
#include "fishforge/histmatch.hpp"
#include "fishforge/image.hpp"
#include "fishforge/tps.hpp"

namespace fishforge {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kVersionString = "1.0.0";

class manifest_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::string hash_to_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

inline std::uint64_t hash_from_hex(const std::string& s) {
    if (s.size() != 16) throw manifest_error("bad hash literal: " + s);
    std::uint64_t h = 0;
    for (const char c : s) {
        h <<= 4;
        if (c >= '0' && c <= '9')
            h |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            h |= static_cast<std::uint64_t>(c - 'a' + 10);
        else
            throw manifest_error("bad hash literal: " + s);
    }
    return h;
}

/// One source file as it was seen at generation time. Replay refuses to run
/// against inputs whose decoded pixels no longer hash to this.
struct InputRecord {
    std::string path;
    std::uint64_t hash = 0;
    int width = 0;
    int height = 0;
};

/// Reference-sampling descriptor: everything needed to rebuild the exact
/// pixel sample, given the recorded inputs.
struct ReferenceRecord {
    PixelSample::Region kind = PixelSample::Region::BackgroundPatch;
    RectI patch;                // BackgroundPatch
    double conf = 0.0;          // HighConfidencePositives
    long long qualifying = 0;   // HighConfidencePositives
    double fraction = 0.0;
    std::uint64_t sample_seed = 0;
    long long sample_count = 0;
};

/// Complete recipe for one pasted fish. Every stochastic choice is pinned
/// here; the render path itself is deterministic.
struct FishRecord {
    std::string asset_path;
    std::uint64_t asset_hash = 0;
    int asset_width = 0;
    int asset_height = 0;
    AffineParams affine;
    int affine_origin_x = 0;  // render_affine output origin, for drift checks
    int affine_origin_y = 0;
    ControlPointSet tps;
    int pad_x = 0;  // TPS padding, for drift checks
    int pad_y = 0;
    ReferenceRecord reference;
    int origin_x = 0;  // final paste origin on the canvas
    int origin_y = 0;
    double visibility = 0.0;
    int tries_used = 0;
};

struct EntryRecord {
    std::string stem;
    int round = 0;
    std::uint64_t stream = 0;
    InputRecord background;
    std::optional<InputRecord> soft_mask;  // stage 2 only
    std::string out_image;
    std::string out_mask;
    std::string out_instances;  // empty unless instance maps were requested
    std::vector<FishRecord> fish;
    bool no_fish_rule = false;  // stage 2: confident area below the floor; outputs
                                // still written, with zero fish
    bool skipped = false;       // nothing written: unreadable input or placement failure
    std::string skip_reason;
    std::vector<std::string> warnings;
};

struct Manifest {
    int schema_version = kManifestSchemaVersion;
    std::string tool_version = kVersionString;
    GenConfig config;
    std::vector<EntryRecord> entries;
    std::vector<std::string> warnings;  // run-level notes (asset pool, pairing)
};

// --- JSON serialization -----------------------------------------------------

inline void to_json(nlohmann::json& j, const Vec2& v) { j = nlohmann::json::array({v.x, v.y}); }
inline void from_json(const nlohmann::json& j, Vec2& v) {
    v.x = j.at(0).get<double>();
    v.y = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const RectI& r) {
    j = nlohmann::json{{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
}
inline void from_json(const nlohmann::json& j, RectI& r) {
    r.x = j.at("x").get<int>();
    r.y = j.at("y").get<int>();
    r.w = j.at("w").get<int>();
    r.h = j.at("h").get<int>();
}

inline void to_json(nlohmann::json& j, const AffineParams& p) {
    j = nlohmann::json{
        {"alpha", p.alpha}, {"sx", p.sx}, {"sy", p.sy}, {"tx", p.tx}, {"ty", p.ty}};
}
inline void from_json(const nlohmann::json& j, AffineParams& p) {
    p.alpha = j.at("alpha").get<double>();
    p.sx = j.at("sx").get<double>();
    p.sy = j.at("sy").get<double>();
    p.tx = j.at("tx").get<double>();
    p.ty = j.at("ty").get<double>();
}

inline void to_json(nlohmann::json& j, const ControlPointSet& c) {
    j = nlohmann::json{{"points", c.points}, {"displacements", c.displacements}};
}
inline void from_json(const nlohmann::json& j, ControlPointSet& c) {
    c.points = j.at("points").get<std::vector<Vec2>>();
    c.displacements = j.at("displacements").get<std::vector<Vec2>>();
}

inline void to_json(nlohmann::json& j, const InputRecord& r) {
    j = nlohmann::json{{"path", r.path},
                       {"hash", hash_to_hex(r.hash)},
                       {"width", r.width},
                       {"height", r.height}};
}
inline void from_json(const nlohmann::json& j, InputRecord& r) {
    r.path = j.at("path").get<std::string>();
    r.hash = hash_from_hex(j.at("hash").get<std::string>());
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
}

inline void to_json(nlohmann::json& j, const ReferenceRecord& r) {
    j = nlohmann::json{{"fraction", r.fraction},
                       {"sample_seed", r.sample_seed},
                       {"sample_count", r.sample_count}};
    if (r.kind == PixelSample::Region::BackgroundPatch) {
        j["kind"] = "background_patch";
        j["patch"] = r.patch;
    } else {
        j["kind"] = "high_confidence";
        j["conf"] = r.conf;
        j["qualifying"] = r.qualifying;
    }
}
inline void from_json(const nlohmann::json& j, ReferenceRecord& r) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "background_patch") {
        r.kind = PixelSample::Region::BackgroundPatch;
        r.patch = j.at("patch").get<RectI>();
    } else if (kind == "high_confidence") {
        r.kind = PixelSample::Region::HighConfidencePositives;
        r.conf = j.at("conf").get<double>();
        r.qualifying = j.at("qualifying").get<long long>();
    } else {
        throw manifest_error("unknown reference kind: " + kind);
    }
    r.fraction = j.at("fraction").get<double>();
    r.sample_seed = j.at("sample_seed").get<std::uint64_t>();
    r.sample_count = j.at("sample_count").get<long long>();
}

inline void to_json(nlohmann::json& j, const FishRecord& f) {
    j = nlohmann::json{{"asset_path", f.asset_path},
                       {"asset_hash", hash_to_hex(f.asset_hash)},
                       {"asset_width", f.asset_width},
                       {"asset_height", f.asset_height},
                       {"affine", f.affine},
                       {"affine_origin", nlohmann::json::array({f.affine_origin_x, f.affine_origin_y})},
                       {"tps", f.tps},
                       {"pad", nlohmann::json::array({f.pad_x, f.pad_y})},
                       {"reference", f.reference},
                       {"origin", nlohmann::json::array({f.origin_x, f.origin_y})},
                       {"visibility", f.visibility},
                       {"tries_used", f.tries_used}};
}
inline void from_json(const nlohmann::json& j, FishRecord& f) {
    f.asset_path = j.at("asset_path").get<std::string>();
    f.asset_hash = hash_from_hex(j.at("asset_hash").get<std::string>());
    f.asset_width = j.at("asset_width").get<int>();
    f.asset_height = j.at("asset_height").get<int>();
    f.affine = j.at("affine").get<AffineParams>();
    f.affine_origin_x = j.at("affine_origin").at(0).get<int>();
    f.affine_origin_y = j.at("affine_origin").at(1).get<int>();
    f.tps = j.at("tps").get<ControlPointSet>();
    f.pad_x = j.at("pad").at(0).get<int>();
    f.pad_y = j.at("pad").at(1).get<int>();
    f.reference = j.at("reference").get<ReferenceRecord>();
    f.origin_x = j.at("origin").at(0).get<int>();
    f.origin_y = j.at("origin").at(1).get<int>();
    f.visibility = j.at("visibility").get<double>();
    f.tries_used = j.value("tries_used", 0);
}

inline void to_json(nlohmann::json& j, const EntryRecord& e) {
    j = nlohmann::json{{"stem", e.stem},
                       {"round", e.round},
                       {"stream", e.stream},
                       {"background", e.background},
                       {"out_image", e.out_image},
                       {"out_mask", e.out_mask},
                       {"fish", e.fish},
                       {"no_fish_rule", e.no_fish_rule},
                       {"skipped", e.skipped},
                       {"warnings", e.warnings}};
    if (e.soft_mask) j["soft_mask"] = *e.soft_mask;
    if (!e.out_instances.empty()) j["out_instances"] = e.out_instances;
    if (!e.skip_reason.empty()) j["skip_reason"] = e.skip_reason;
}
inline void from_json(const nlohmann::json& j, EntryRecord& e) {
    e.stem = j.at("stem").get<std::string>();
    e.round = j.at("round").get<int>();
    e.stream = j.at("stream").get<std::uint64_t>();
    e.background = j.at("background").get<InputRecord>();
    if (j.contains("soft_mask")) e.soft_mask = j.at("soft_mask").get<InputRecord>();
    e.out_image = j.at("out_image").get<std::string>();
    e.out_mask = j.at("out_mask").get<std::string>();
    e.out_instances = j.value("out_instances", std::string());
    e.fish = j.at("fish").get<std::vector<FishRecord>>();
    e.no_fish_rule = j.at("no_fish_rule").get<bool>();
    e.skipped = j.at("skipped").get<bool>();
    e.skip_reason = j.value("skip_reason", std::string());
    e.warnings = j.at("warnings").get<std::vector<std::string>>();
}

inline void to_json(nlohmann::json& j, const FishCountDistribution& d) {
    j = d.to_string();
}
inline void from_json(const nlohmann::json& j, FishCountDistribution& d) {
    d = FishCountDistribution::parse(j.get<std::string>());
}

inline void to_json(nlohmann::json& j, const GenConfig& c) {
    j = nlohmann::json{{"stage", c.stage},
                       {"ratio_lo", c.ratio_lo},
                       {"ratio_hi", c.ratio_hi},
                       {"tps_points", c.tps_points},
                       {"tps_fraction", c.tps_fraction},
                       {"hm_sample_fraction", c.hm_sample_fraction},
                       {"conf_threshold", c.conf_threshold},
                       {"min_positive_fraction", c.min_positive_fraction},
                       {"pseudo_label_threshold", c.pseudo_label_threshold},
                       {"fish_count", c.fish_count},
                       {"master_seed", c.master_seed},
                       {"max_placement_tries", c.max_placement_tries},
                       {"alpha_cutoff", c.alpha_cutoff},
                       {"emit_instance_maps", c.emit_instance_maps}};
}
inline void from_json(const nlohmann::json& j, GenConfig& c) {
    c.stage = j.at("stage").get<int>();
    c.ratio_lo = j.at("ratio_lo").get<double>();
    c.ratio_hi = j.at("ratio_hi").get<double>();
    c.tps_points = j.at("tps_points").get<int>();
    c.tps_fraction = j.at("tps_fraction").get<double>();
    c.hm_sample_fraction = j.at("hm_sample_fraction").get<double>();
    c.conf_threshold = j.at("conf_threshold").get<double>();
    c.min_positive_fraction = j.at("min_positive_fraction").get<double>();
    c.pseudo_label_threshold = j.at("pseudo_label_threshold").get<double>();
    c.fish_count = j.at("fish_count").get<FishCountDistribution>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.max_placement_tries = j.at("max_placement_tries").get<int>();
    c.alpha_cutoff = j.at("alpha_cutoff").get<int>();
    c.emit_instance_maps = j.at("emit_instance_maps").get<bool>();
}

inline void to_json(nlohmann::json& j, const Manifest& m) {
    j = nlohmann::json{{"schema_version", m.schema_version},
                       {"tool_version", m.tool_version},
                       {"config", m.config},
                       {"entries", m.entries},
                       {"warnings", m.warnings}};
}
inline void from_json(const nlohmann::json& j, Manifest& m) {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion)
        throw manifest_error("unsupported manifest schema version " +
                             std::to_string(m.schema_version));
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config = j.at("config").get<GenConfig>();
    m.entries = j.at("entries").get<std::vector<EntryRecord>>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
}

inline void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("unwritable path: " + path);
    f << nlohmann::json(m).dump(2) << '\n';
    if (!f) throw io_error("unwritable path: " + path);
}

inline Manifest load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("file not found: " + path);
    nlohmann::json j;
    try {
        f >> j;
        return j.get<Manifest>();
    } catch (const nlohmann::json::exception& e) {
        throw manifest_error(std::string("manifest parse error: ") + e.what());
    }
}

}  // namespace fishforge
