#include <doctest.h>
#include <json.hpp>

#include "support/cli_runner.hpp"
#include "support/test_support.hpp"

#include "d3net/imagecore.hpp"
#include "d3net/turbsim.hpp"

#include <fstream>
#include <map>

using namespace d3net;
using d3net::testing::read_bytes;
using d3net::testing::run_cli;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

/// Scenes that are constant on 2x2 blocks and exact in 8 bits, so a
/// zero-strength dataset is reproduced exactly by every bench method.
void write_block_scenes(const fs::path& dir, int count, int size) {
    fs::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        const Plane p = d3net::testing::random_plane(size / 2, size / 2, 50 + i);
        Image img(1, size, size);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                img.data()(y, x) = std::round(p(y / 2, x / 2) * 255.0) / 255.0;
            }
        }
        save_image(img, dir / ("img_" + std::to_string(i) + ".png"));
    }
}

} // namespace

TEST_CASE("help exits 0 and documents flags with defaults") {
    const auto root = d3net::testing::scratch_dir("cli_help");
    CHECK(run_cli("--help", root / "top.txt") == 0);
    const std::map<std::string, std::vector<std::string>> expected{
        {"degrade", {"--clean", "--out", "--frames", "100", "--tilt-sigma", "--blur-sigma", "--noise-sigma", "--seed"}},
        {"fixture", {"--out", "--count", "--size", "--channels"}},
        {"train", {"--model", "d2net", "--data", "--iters", "1000", "--patch", "--batch", "--input", "--width"}},
        {"restore", {"--frames", "--out", "--dump-intermediate", "--d2net", "--rdfdbk", "--levels", "--roi"}},
        {"bench", {"--data", "--out", "--table", "--timing", "--d2net", "--rdfdbk"}},
    };
    for (const auto& [cmd, flags] : expected) {
        CAPTURE(cmd);
        const auto log = root / (cmd + ".txt");
        CHECK(run_cli(cmd + " --help", log) == 0);
        const auto text = read_bytes(log);
        for (const auto& f : flags) {
            CAPTURE(f);
            CHECK(text.find(f) != std::string::npos);
        }
    }
}

TEST_CASE("usage errors exit 2, runtime errors exit 1") {
    const auto root = d3net::testing::scratch_dir("cli_errors");
    write_block_scenes(root / "clean", 1, 16);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("degrade --clean " + q(root / "clean") + " --out " + q(root / "o") + " --frames 0") == 2);
    CHECK(run_cli("degrade --clean " + q(root / "clean") + " --out " + q(root / "o") + " --frames x") == 2);
    CHECK(run_cli("degrade --out " + q(root / "o")) == 2);
    CHECK(run_cli("degrade --clean " + q(root / "clean") + " --out " + q(root / "o") + " --blur-sigma -1") == 2);
    CHECK(run_cli("train --data " + q(root / "m.json") + " --model gan") == 2);
    CHECK(run_cli("--threads -1 fixture --out " + q(root / "f")) == 2);

    write_file(root / "unknown.json", R"({"frames": 2, "bogus": 1})");
    CHECK(run_cli("--config " + q(root / "unknown.json") + " degrade --clean " + q(root / "clean") + " --out " +
                  q(root / "o")) == 2);
    write_file(root / "badtype.json", R"({"frames": "many"})");
    CHECK(run_cli("--config " + q(root / "badtype.json") + " degrade --clean " + q(root / "clean") + " --out " +
                  q(root / "o")) == 2);
    write_file(root / "array.json", "[1, 2]");
    CHECK(run_cli("--config " + q(root / "array.json") + " fixture --out " + q(root / "f")) == 2);

    CHECK(run_cli("--config " + q(root / "missing.json") + " fixture --out " + q(root / "f")) == 1);
    CHECK(run_cli("degrade --clean " + q(root / "nowhere") + " --out " + q(root / "o")) == 1);
    CHECK(run_cli("train --data " + q(root / "nowhere.json")) == 1);

    fs::create_directories(root / "frames");
    fs::copy_file(root / "clean" / "img_0.png", root / "frames" / "f0.png");
    const auto log = root / "restore.txt";
    CHECK(run_cli("restore --frames " + q(root / "frames") + " --out " + q(root / "r.png") + " --d2net " +
                      q(root / "absent.d3nc"),
                  log) == 1);
    CHECK(read_bytes(log).find("absent.d3nc") != std::string::npos);
    CHECK(run_cli("restore --frames " + q(root / "clean_none") + " --out " + q(root / "r.png")) == 1);
}

TEST_CASE("config file values apply unless overridden by flags and are echoed") {
    const auto root = d3net::testing::scratch_dir("cli_config");
    write_block_scenes(root / "clean", 2, 16);
    write_file(root / "cfg.json", R"({"frames": 3, "noise_sigma": 0.02, "clean": "ignored-by-flag"})");
    REQUIRE(run_cli("--seed 5 --config " + q(root / "cfg.json") + " degrade --clean " + q(root / "clean") +
                    " --out " + q(root / "ds") + " --noise-sigma 0.03") == 0);
    const auto m = DatasetManifest::load(root / "ds" / "manifest.json");
    CHECK(m.frame_count() == 6u);
    CHECK(m.config.at("frames") == 3);
    CHECK(m.config.at("noise_sigma") == 0.03);
    CHECK(m.config.at("seed") == 5);
    CHECK_FALSE(m.config.contains("clean"));
    CHECK_FALSE(m.config.contains("out"));
    CHECK(m.entries[0].params.seed == 5);
}

TEST_CASE("degrade prints the manifest path and is byte-reproducible") {
    const auto root = d3net::testing::scratch_dir("cli_degrade");
    REQUIRE(run_cli("--seed 9 fixture --out " + q(root / "clean") + " --count 3 --size 32") == 0);
    CHECK(list_images(root / "clean").size() == 3u);
    const auto log = root / "out.txt";
    REQUIRE(run_cli("--seed 7 degrade --clean " + q(root / "clean") + " --out " + q(root / "a") + " --frames 4", log) ==
            0);
    CHECK(read_bytes(log).find((root / "a" / "manifest.json").string()) != std::string::npos);
    REQUIRE(run_cli("--seed 7 degrade --clean " + q(root / "clean") + " --out " + q(root / "b") + " --frames 4") == 0);
    const auto ma = DatasetManifest::load(root / "a" / "manifest.json");
    CHECK(ma.frame_count() == 12u);
    CHECK(read_bytes(root / "a" / "manifest.json") == read_bytes(root / "b" / "manifest.json"));
    for (const auto& e : ma.entries) {
        for (const auto& f : e.frames) {
            CHECK(read_bytes(root / "a" / f) == read_bytes(root / "b" / f));
        }
    }
}

TEST_CASE("train writes checkpoint, log every 10 iterations and is reproducible") {
    const auto root = d3net::testing::scratch_dir("cli_train");
    REQUIRE(run_cli("fixture --out " + q(root / "clean") + " --count 2 --size 32") == 0);
    REQUIRE(run_cli("degrade --clean " + q(root / "clean") + " --out " + q(root / "ds") + " --frames 2") == 0);
    const std::string common = "--seed 1 train --model d2net --iters 200 --width 0.0625 --blocks 1 --batch 2 --data " +
                               q(root / "ds" / "manifest.json");
    REQUIRE(run_cli(common + " --out " + q(root / "a")) == 0);
    REQUIRE(run_cli(common + " --out " + q(root / "b")) == 0);
    CHECK(fs::exists(root / "a" / "d2net.d3nc"));
    CHECK(read_bytes(root / "a" / "d2net.d3nc") == read_bytes(root / "b" / "d2net.d3nc"));
    CHECK(read_bytes(root / "a" / "d2net_log.jsonl") == read_bytes(root / "b" / "d2net_log.jsonl"));
    CHECK(read_bytes(root / "a" / "d2net_config.json") == read_bytes(root / "b" / "d2net_config.json"));

    std::ifstream log(root / "a" / "d2net_log.jsonl");
    std::vector<nlohmann::json> lines;
    for (std::string line; std::getline(log, line);) {
        lines.push_back(nlohmann::json::parse(line));
    }
    REQUIRE(lines.size() == 20u);
    CHECK(lines[0].at("iter") == 0);
    CHECK(lines[0].at("lr") == 0.0004);
    CHECK(lines[19].at("iter") == 190);
    CHECK(lines[0].at("format_version") == 1);

    const auto cfg = nlohmann::json::parse(read_bytes(root / "a" / "d2net_config.json"));
    CHECK(cfg.at("format_version") == 1);
    CHECK(cfg.at("config").at("iters") == 200);
    CHECK(cfg.at("seed") == 1);
}

TEST_CASE("restore keeps input dims, dumps intermediates, identity round trip") {
    const auto root = d3net::testing::scratch_dir("cli_restore");
    write_block_scenes(root / "one", 1, 32);
    REQUIRE(run_cli("restore --frames " + q(root / "one") + " --out " + q(root / "r.png") + " --dump-intermediate " +
                    q(root / "dump")) == 0);
    const Image in = load_image(root / "one" / "img_0.png");
    const Image out = load_image(root / "r.png");
    REQUIRE(out.same_shape(in));
    CHECK((out.data() - in.data()).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
    for (const char* name : {"fused.pfm", "approx.pfm", "d2net.pfm"}) {
        CHECK(fs::exists(root / "dump" / name));
    }

    fs::create_directories(root / "odd");
    for (int i = 0; i < 3; ++i) {
        save_image(synthesize_scene(45, 38, 11 + i), root / "odd" / ("f" + std::to_string(i) + ".png"));
    }
    REQUIRE(run_cli("restore --frames " + q(root / "odd") + " --out " + q(root / "odd.png")) == 0);
    REQUIRE(run_cli("restore --frames " + q(root / "odd") + " --out " + q(root / "odd2.png")) == 0);
    const Image odd = load_image(root / "odd.png");
    CHECK(odd.height() == 45);
    CHECK(odd.width() == 38);
    CHECK(read_bytes(root / "odd.png") == read_bytes(root / "odd2.png"));
}

TEST_CASE("bench report contract on a zero-degradation dataset") {
    const auto root = d3net::testing::scratch_dir("cli_bench");
    write_block_scenes(root / "clean", 3, 32);
    REQUIRE(run_cli("degrade --clean " + q(root / "clean") + " --out " + q(root / "ds") +
                    " --frames 4 --tilt-sigma 0 --blur-sigma 0 --noise-sigma 0") == 0);
    const std::string args = "--seed 2 bench --data " + q(root / "ds" / "manifest.json");
    REQUIRE(run_cli(args + " --out " + q(root / "a.json")) == 0);
    REQUIRE(run_cli(args + " --out " + q(root / "b.json") + " --table " + q(root / "b_table.txt")) == 0);
    CHECK(read_bytes(root / "a.json") == read_bytes(root / "b.json"));
    CHECK(read_bytes(root / "a.txt") == read_bytes(root / "b_table.txt"));
    REQUIRE(run_cli("--threads 3 " + args + " --out " + q(root / "threaded.json")) == 0);
    CHECK(read_bytes(root / "a.json") == read_bytes(root / "threaded.json"));

    const auto report = nlohmann::json::parse(read_bytes(root / "a.json"));
    CHECK(report.at("format_version") == 1);
    CHECK(report.contains("tool_version"));
    CHECK(report.at("seed") == 2);
    CHECK(report.at("config").at("levels") == 2);
    const auto& rows = report.at("rows");
    REQUIRE(rows.size() == 3u * 4u);
    std::map<std::string, std::map<std::string, int>> seen;
    std::map<std::string, std::pair<double, double>> sums;
    for (const auto& r : rows) {
        const auto method = r.at("method").get<std::string>();
        ++seen[r.at("source_id").get<std::string>()][method];
        CHECK(r.at("psnr") == 99.0);
        CHECK(r.at("wall_ms").is_null());
        sums[method].first += r.at("psnr").get<double>();
        sums[method].second += r.at("ssim").get<double>();
    }
    CHECK(seen.size() == 3u);
    for (const auto& [id, methods] : seen) {
        CHECK(methods.size() == 4u);
        for (const auto& [m, n] : methods) {
            CHECK(n == 1);
        }
    }
    for (const auto& [method, s] : sums) {
        const auto& agg = report.at("aggregates").at(method);
        CHECK(agg.at("count") == 3);
        CHECK(std::abs(agg.at("mean_psnr").get<double>() - s.first / 3.0) < 1e-9);
        CHECK(std::abs(agg.at("mean_ssim").get<double>() - s.second / 3.0) < 1e-9);
    }

    REQUIRE(run_cli(args + " --out " + q(root / "t.json") + " --timing") == 0);
    const auto timed = nlohmann::json::parse(read_bytes(root / "t.json"));
    for (const auto& r : timed.at("rows")) {
        CHECK(r.at("wall_ms").is_number());
    }
}
