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

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fishforge/fishforge.hpp"
#include "testutil.hpp"

using namespace fishforge;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Runs the installed binary through the shell; FISHFORGE_BIN comes from the
// test environment. `env_prefix` may carry VAR=value assignments.
CliResult run_cli(const std::string& args, testutil::TempDir& dir,
                  const std::string& env_prefix = std::string()) {
    const char* bin = std::getenv("FISHFORGE_BIN");
    REQUIRE(bin != nullptr);
    const std::string out_file = dir.sub("cli_stdout.txt");
    const std::string err_file = dir.sub("cli_stderr.txt");
    const std::string cmd = env_prefix + "\"" + bin + "\" " + args + " >\"" + out_file +
                            "\" 2>\"" + err_file + "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

struct Fixture {
    std::string bg_dir;
    std::string asset_dir;
};

Fixture make_fixture(testutil::TempDir& dir, int bgs = 2) {
    Fixture f;
    f.bg_dir = dir.sub("bg");
    f.asset_dir = dir.sub("assets");
    fs::create_directories(f.bg_dir);
    fs::create_directories(f.asset_dir);
    for (int i = 0; i < bgs; ++i)
        save_image(testutil::noise_bg(48, 40, 140 + i),
                   f.bg_dir + "/hab" + std::to_string(i) + ".png");
    save_image(testutil::blob_asset(20, 14, 150).image, f.asset_dir + "/a.png");
    save_image(testutil::blob_asset(18, 18, 151).image, f.asset_dir + "/b.png");
    return f;
}

bool trees_equal(const std::string& a, const std::string& b) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
    std::size_t b_count = 0;
    for (const auto& e : fs::directory_iterator(b)) {
        (void)e;
        ++b_count;
    }
    if (names.size() != b_count) return false;
    for (const auto& n : names)
        if (!testutil::files_equal((fs::path(a) / n).string(), (fs::path(b) / n).string()))
            return false;
    return true;
}

#define REQUIRE_BIN()                                         \
    do {                                                      \
        if (std::getenv("FISHFORGE_BIN") == nullptr)          \
            SKIP("FISHFORGE_BIN not set; run via ctest");     \
    } while (0)

}  // namespace

TEST_CASE("--version reports the tool version", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_ver");
    const CliResult r = run_cli("--version", dir);
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("1.0.0") != std::string::npos);
}

TEST_CASE("generation runs are deterministic in the seed", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_det");
    const Fixture f = make_fixture(dir);
    const std::string base = " gen-stage1 --backgrounds \"" + f.bg_dir + "\" --assets \"" +
                             f.asset_dir + "\" --rounds 2";

    const CliResult r1 = run_cli(base + " --seed 42 --out \"" + dir.sub("out1") + "\"", dir);
    REQUIRE(r1.code == 0);
    REQUIRE(r1.out.find("wrote 4 image/mask pair(s)") != std::string::npos);
    const CliResult r2 = run_cli(base + " --seed 42 --out \"" + dir.sub("out2") + "\"", dir);
    REQUIRE(r2.code == 0);
    REQUIRE(trees_equal(dir.sub("out1"), dir.sub("out2")));

    const CliResult r3 = run_cli(base + " --seed 43 --out \"" + dir.sub("out3") + "\"", dir);
    REQUIRE(r3.code == 0);
    REQUIRE_FALSE(testutil::files_equal(dir.sub("out1") + "/hab0_r0.png",
                                        dir.sub("out3") + "/hab0_r0.png"));
}

TEST_CASE("the seed can come from FISHFORGE_SEED, and the flag wins", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_env");
    const Fixture f = make_fixture(dir, 1);
    const std::string base = " gen-stage1 --backgrounds \"" + f.bg_dir + "\" --assets \"" +
                             f.asset_dir + "\"";

    REQUIRE(run_cli(base + " --seed 9 --out \"" + dir.sub("flag") + "\"", dir).code == 0);
    REQUIRE(run_cli(base + " --out \"" + dir.sub("env") + "\"", dir, "FISHFORGE_SEED=9 ").code ==
            0);
    REQUIRE(trees_equal(dir.sub("flag"), dir.sub("env")));

    REQUIRE(run_cli(base + " --seed 9 --out \"" + dir.sub("both") + "\"", dir,
                    "FISHFORGE_SEED=1234 ")
                .code == 0);
    REQUIRE(trees_equal(dir.sub("flag"), dir.sub("both")));
}

TEST_CASE("a config file supplies defaults that flags override", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_cfg");
    const Fixture f = make_fixture(dir, 1);
    const std::string cfg_path = dir.sub("run.toml");
    {
        std::ofstream cfg(cfg_path);
        cfg << "[gen-stage1]\nseed = 77\ntps-points = 4\n";
    }
    const std::string base = " gen-stage1 --backgrounds \"" + f.bg_dir + "\" --assets \"" +
                             f.asset_dir + "\"";

    REQUIRE(run_cli("--config \"" + cfg_path + "\"" + base + " --out \"" + dir.sub("cfg") + "\"",
                    dir)
                .code == 0);
    REQUIRE(run_cli(base + " --seed 77 --tps-points 4 --out \"" + dir.sub("flags") + "\"", dir)
                .code == 0);
    REQUIRE(trees_equal(dir.sub("cfg"), dir.sub("flags")));

    // CLI beats config.
    REQUIRE(run_cli("--config \"" + cfg_path + "\"" + base + " --seed 5 --out \"" +
                        dir.sub("cfg_override") + "\"",
                    dir)
                .code == 0);
    REQUIRE(run_cli(base + " --seed 5 --tps-points 4 --out \"" + dir.sub("flags5") + "\"", dir)
                .code == 0);
    REQUIRE(trees_equal(dir.sub("cfg_override"), dir.sub("flags5")));
}

TEST_CASE("fatal input problems exit 1 and name the offender", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_fatal");
    const Fixture f = make_fixture(dir, 1);
    const CliResult r = run_cli(" gen-stage1 --backgrounds \"" + f.bg_dir +
                                    "\" --assets \"" + dir.sub("nothere") + "\" --out \"" +
                                    dir.sub("out") + "\"",
                                dir);
    REQUIRE(r.code == 1);
    REQUIRE(r.err.find("asset directory not found") != std::string::npos);
    REQUIRE(r.err.find(dir.sub("nothere")) != std::string::npos);

    REQUIRE(run_cli("", dir).code == 1);                    // a subcommand is required
    REQUIRE(run_cli(" gen-stage1 --bogus x", dir).code == 1);
}

TEST_CASE("unreadable inputs downgrade the run to exit 2", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_partial");
    const Fixture f = make_fixture(dir, 1);
    const unsigned char junk[] = {9, 9, 9};
    testutil::write_bytes(f.bg_dir + "/corrupt.png", junk, sizeof(junk));

    const CliResult r = run_cli(" gen-stage1 --backgrounds \"" + f.bg_dir + "\" --assets \"" +
                                    f.asset_dir + "\" --seed 2 --out \"" + dir.sub("out") + "\"",
                                dir);
    REQUIRE(r.code == 2);
    REQUIRE(r.out.find("skipped 1 input(s)") != std::string::npos);
    REQUIRE(r.err.find("corrupt") != std::string::npos);
    REQUIRE(fs::is_regular_file(dir.sub("out") + "/hab0_r0.png"));
}

TEST_CASE("stage 2 pairs images with soft masks by stem", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_s2");
    const Fixture f = make_fixture(dir, 0);
    const std::string img_dir = dir.sub("imgs");
    const std::string soft_dir = dir.sub("soft");
    fs::create_directories(img_dir);
    fs::create_directories(soft_dir);
    save_image(testutil::noise_bg(60, 50, 160), img_dir + "/train0.png");
    save_image(testutil::noise_bg(60, 50, 161), img_dir + "/orphan.png");
    // 1200 qualifying pixels >> 1% of the 3000-pixel image: fish are placed.
    SoftMask soft = testutil::block_soft(60, 50, RectI{5, 5, 40, 30}, 60000);
    save_soft_mask(soft, soft_dir + "/train0.png");

    const CliResult r = run_cli(" gen-stage2 --images \"" + img_dir + "\" --soft \"" + soft_dir +
                                    "\" --assets \"" + f.asset_dir + "\" --seed 6 --out \"" +
                                    dir.sub("out") + "\"",
                                dir);
    REQUIRE(r.code == 2);  // orphan stem had no soft mask
    REQUIRE(r.err.find("no soft mask for stem orphan") != std::string::npos);
    REQUIRE(r.out.find("no-fish rule applied to 0 image(s)") != std::string::npos);
    REQUIRE(fs::is_regular_file(dir.sub("out") + "/train0_r0.png"));
    REQUIRE_FALSE(fs::exists(dir.sub("out") + "/orphan_r0.png"));
}

TEST_CASE("eval scores identical binary masks at 1.0", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_eval");
    const std::string pred = dir.sub("pred");
    const std::string gt = dir.sub("gt");
    fs::create_directories(pred);
    fs::create_directories(gt);
    for (int i = 0; i < 3; ++i) {
        const BinaryMask m = testutil::random_mask(32, 32, 0.3, 170 + i);
        save_mask(m, pred + "/img" + std::to_string(i) + ".png");
        save_mask(m, gt + "/img" + std::to_string(i) + ".png");
    }
    const std::string report_path = dir.sub("report.json");
    const CliResult r = run_cli(" eval --pred \"" + pred + "\" --gt \"" + gt + "\" --out \"" +
                                    report_path + "\"",
                                dir);
    REQUIRE(r.code == 0);
    const nlohmann::json report = nlohmann::json::parse(slurp(report_path));
    REQUIRE(report["mode"] == "binary");
    REQUIRE(report["pairs"] == 3);
    REQUIRE(report["pooled"]["dice"] == 1.0);
    REQUIRE(report["pooled"]["iou"] == 1.0);
    REQUIRE(report["per_image"].size() == 3);
}

TEST_CASE("eval sweeps soft predictions and reports the best threshold", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_evalsoft");
    const std::string pred = dir.sub("pred");
    const std::string gt = dir.sub("gt");
    fs::create_directories(pred);
    fs::create_directories(gt);
    const BinaryMask m = testutil::random_mask(40, 40, 0.25, 180);
    SoftMask soft = SoftMask::create(40, 40);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        soft.data[i] = m.data[i] ? 60000 : 500;  // probs 0.9155 and 0.0076
    save_soft_mask(soft, pred + "/x.png");
    save_mask(m, gt + "/x.png");

    const std::string report_path = dir.sub("report.json");
    const CliResult r = run_cli(" eval --pred \"" + pred + "\" --gt \"" + gt + "\" --out \"" +
                                    report_path + "\"",
                                dir);
    REQUIRE(r.code == 0);
    const nlohmann::json report = nlohmann::json::parse(slurp(report_path));
    REQUIRE(report["mode"] == "soft");
    // Dice 1.0 ties across the whole usable range; the largest wins.
    REQUIRE(report["best_threshold"] == 0.91);
    REQUIRE(report["pooled"]["dice"] == 1.0);
    REQUIRE(report["pr"].size() == 101);
}

TEST_CASE("replay reproduces a recorded run byte-exactly", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_replay");
    const Fixture f = make_fixture(dir);
    const std::string out = dir.sub("out");
    REQUIRE(run_cli(" gen-stage1 --backgrounds \"" + f.bg_dir + "\" --assets \"" + f.asset_dir +
                        "\" --seed 3 --out \"" + out + "\"",
                    dir)
                .code == 0);

    const std::string replay_out = dir.sub("replayed");
    const CliResult r = run_cli(" replay --manifest \"" + out + "/manifest.json\" --out \"" +
                                    replay_out + "\"",
                                dir);
    REQUIRE(r.code == 0);
    for (const auto& e : fs::directory_iterator(out)) {
        const std::string name = e.path().filename().string();
        if (name == "manifest.json") continue;
        REQUIRE(testutil::files_equal(e.path().string(),
                                      (fs::path(replay_out) / name).string()));
    }

    const std::string only_out = dir.sub("only");
    const CliResult ro = run_cli(" replay --manifest \"" + out +
                                     "/manifest.json\" --only hab1_r0 --out \"" + only_out +
                                     "\"",
                                 dir);
    REQUIRE(ro.code == 0);
    REQUIRE(fs::is_regular_file(only_out + "/hab1_r0.png"));
    REQUIRE_FALSE(fs::exists(only_out + "/hab0_r0.png"));

    REQUIRE(run_cli(" replay --manifest \"" + out + "/manifest.json\" --only ghost", dir).code ==
            1);
}

TEST_CASE("preview writes a contact sheet plus its manifest", "[cli]") {
    REQUIRE_BIN();
    testutil::TempDir dir("cli_preview");
    const Fixture f = make_fixture(dir, 2);
    const std::string sheet = dir.sub("sheet.png");
    const CliResult r = run_cli(" preview --backgrounds \"" + f.bg_dir + "\" --assets \"" +
                                    f.asset_dir + "\" --count 3 --seed 8 --out \"" + sheet +
                                    "\"",
                                dir);
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("3x2 contact sheet") != std::string::npos);
    const RasterImage img = load_image(sheet);
    REQUIRE(img.width == 48 * 2);
    REQUIRE(img.height == 40 * 3);
    REQUIRE(fs::is_regular_file(dir.sub("sheet_manifest.json")));
    const Manifest m = load_manifest(dir.sub("sheet_manifest.json"));
    REQUIRE(m.entries.size() == 3);
    REQUIRE(m.entries[2].round == 1);  // two backgrounds cycle before rounds advance
}
