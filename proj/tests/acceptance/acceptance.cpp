#include "d3net/d3net.hpp"
#include "support/cli_runner.hpp"
#include "support/gradcheck.hpp"
#include "support/test_support.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

using namespace d3net;
using d3net::testing::gradcheck;
using d3net::testing::random_plane;
using d3net::testing::random_tensor;
using d3net::testing::read_bytes;
using d3net::testing::run_cli;
using d3net::testing::TensorD;
using d3net::testing::textured_field;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// 1
Outcome dwt_reconstruction() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(16, 128), lev(1, 3), fam(0, 1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int h = dim(rng), w = dim(rng), levels = lev(rng);
        const auto family = fam(rng) ? WaveletFamily::db2 : WaveletFamily::haar;
        const Plane x = random_plane(h, w, 10'000 + i);
        const Plane y = dwt2_inverse(dwt2_forward(x, levels, family));
        worst = std::max(worst, (y - x).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-6 && secs < 30.0, fmt("max abs error %.3g over 1000 images in %.2f s", worst, secs)};
}

// 2
Outcome parseval() {
    double worst = 0.0;
    int cases = 0;
    for (int k = 4; k <= 8; ++k)
        for (int k2 = 4; k2 <= 8; k2 += 2)
            for (int levels = 1; levels <= 3; ++levels) {
                const Plane x = random_plane(1 << k, 1 << k2, 100 * k + 10 * k2 + levels, -1.0, 1.0);
                const double e = pyramid_energy(dwt2_forward(x, levels, WaveletFamily::haar));
                worst = std::max(worst, std::abs(e - x.squaredNorm()) / x.squaredNorm());
                ++cases;
            }
    return {worst <= 1e-9, fmt("worst relative energy gap %.3g over %d power-of-two images", worst, cases)};
}

double sad(const Plane& a, const Plane& b) { return (a - b).cwiseAbs().sum(); }

std::pair<int, int> sad_search(const Plane& ref, const Plane& moving, int radius) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> arg{0, 0};
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            const double s = sad(circshift(ref, dy, dx), moving);
            if (s < best) {
                best = s;
                arg = {dy, dx};
            }
        }
    return arg;
}

// 3
Outcome registration() {
    int exact = 0, oracle_agrees = 0, subpixel = 0;
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> shift(-8, 8);
    for (int seed = 0; seed < 100; ++seed) {
        const Plane ref = textured_field(64, 64, 500 + seed);
        const int dy = shift(rng), dx = shift(rng);
        const Plane moving = circshift(ref, dy, dx);
        const auto est = estimate_shift(ref, moving);
        exact += est.dy == dy && est.dx == dx;
        oracle_agrees += sad_search(ref, moving, 8) == std::pair{dy, dx};

        // circular bilinear half-pixel shift along one axis, either sign
        const bool vertical = seed % 2 == 0;
        const int sign = (seed / 2) % 2 == 0 ? 1 : -1;
        const Plane neighbour = vertical ? circshift(ref, sign, 0) : circshift(ref, 0, sign);
        const Plane half = 0.5 * ref + 0.5 * neighbour;
        const auto sub = estimate_shift(ref, half);
        const double ty = vertical ? 0.5 * sign : 0.0, tx = vertical ? 0.0 : 0.5 * sign;
        subpixel += std::abs(sub.dy - ty) <= 0.25 && std::abs(sub.dx - tx) <= 0.25;
    }
    return {exact == 100 && oracle_agrees == 100 && subpixel >= 95,
            fmt("integer exact %d/100 (SAD oracle agrees %d/100), half-pixel within 0.25 px %d/100", exact,
                oracle_agrees, subpixel)};
}

// 4
Outcome fusion_weights() {
    double worst_sum = 0.0, worst_identity = 0.0;
    bool nonnegative = true;
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> frames(1, 8), dim(8, 40);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = frames(rng), h = dim(rng), w = dim(rng);
        std::vector<Plane> sim, bnd;
        for (int k = 0; k < n; ++k) {
            sim.push_back(random_plane(h, w, 1000 * trial + k));
            bnd.push_back((random_plane(h, w, 1000 * trial + k + 500).array() > 0.3).cast<double>().matrix());
        }
        const auto r = compute_priority(sim, bnd);
        Plane total = Plane::Zero(h, w);
        for (const auto& wk : r.weights) {
            total += wk;
            nonnegative = nonnegative && wk.minCoeff() >= 0.0;
        }
        worst_sum = std::max(worst_sum, (total.array() - 1.0).abs().maxCoeff());
    }
    for (int channels : {1, 3})
        for (auto fam : {WaveletFamily::haar, WaveletFamily::db2})
            for (int n : {2, 5, 16}) {
                const Image f = d3net::testing::random_image(channels, 48, 37, 70 + n);
                FrameSequence seq;
                seq.frames.assign(n, f);
                FusionOptions opt;
                opt.family = fam;
                const auto r = fuse_sequence(seq, opt);
                worst_identity = std::max(worst_identity, (r.fused_full.data() - f.data()).cwiseAbs().maxCoeff());
            }
    return {worst_sum <= 1e-6 && nonnegative && worst_identity <= 1e-6,
            fmt("partition-of-unity error %.3g on 100 map sets, identical-frame fusion error %.3g", worst_sum,
                worst_identity)};
}

TensorD off_kink(nn::Shape s, std::uint64_t seed) {
    auto t = random_tensor(s, seed);
    for (auto& v : t.data()) v = v >= 0 ? v + 0.05 : v - 0.05;
    return t;
}

std::vector<TensorD> all_params(nn::ParamStore<double>& p) {
    std::vector<TensorD> out;
    for (auto& [name, e] : p.entries()) out.push_back(e.param);
    return out;
}

// 5
Outcome gradient_checks() {
    using namespace nn;
    std::vector<std::pair<std::string, double>> results;
    for (auto [stride, pad] : {std::pair{1, 1}, {2, 1}, {2, 0}}) {
        auto x = random_tensor({2, 3, 6, 6}, 1), w = random_tensor({2, 3, 3, 3}, 2), b = random_tensor({1, 1, 1, 2}, 3);
        results.emplace_back("conv2d", gradcheck([&] {
                                 const auto y = conv2d(x, w, b, stride, pad);
                                 return sum(mul(y, y));
                             }, {x, w, b}).worst_relative);
    }
    for (auto [stride, pad] : {std::pair{1, 0}, {2, 0}, {2, 1}}) {
        auto x = random_tensor({2, 3, 4, 4}, 5), w = random_tensor({3, 2, 2, 2}, 6), b = random_tensor({1, 1, 1, 2}, 7);
        results.emplace_back("conv2d_transposed", gradcheck([&] {
                                 const auto y = conv2d_transposed(x, w, b, stride, pad);
                                 return sum(mul(y, y));
                             }, {x, w, b}).worst_relative);
    }
    {
        auto a = off_kink({1, 2, 4, 4}, 8), b = off_kink({1, 2, 4, 4}, 9), c = random_tensor({1, 3, 4, 4}, 10);
        auto weights = random_tensor({1, 5, 8, 8}, 11, false);
        results.emplace_back("relu/add/mul/concat/upsample", gradcheck([&] {
                                 const auto h = concat_channels(relu(add(a, mul(a, b))), c);
                                 return sum(mul(upsample_nearest2(h), weights));
                             }, {a, b, c}).worst_relative);
        auto p = off_kink({1, 1, 5, 5}, 12);
        auto t = TensorD::zeros({1, 1, 5, 5}, true);
        results.emplace_back("l1_loss", gradcheck([&] { return l1_loss(p, t); }, {p, t}).worst_relative);
    }
    {
        D2NetConfig cfg;
        cfg.width_multiplier = 1.0 / 16;
        cfg.residual_blocks = 1;
        auto p = init_d2net<double>(cfg, 11);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> d(-0.1, 0.1);
        for (auto& [name, e] : p.entries())
            if (e.param.array().abs().maxCoeff() == 0)
                for (auto& v : e.param.data()) v = d(rng);
        const auto x = random_tensor({2, 1, 8, 8}, 12, true, 0.0, 1.0);
        const auto t = random_tensor({2, 1, 8, 8}, 13, false, 0.0, 1.0);
        auto inputs = all_params(p);
        inputs.push_back(x);
        results.emplace_back("small d2net", gradcheck([&] { return l1_loss(d2net_forward(p, cfg, x), t); }, inputs,
                                                      1e-4, 24).worst_relative);
    }
    double worst = 0.0;
    std::string worst_name;
    for (const auto& [name, rel] : results)
        if (rel >= worst) {
            worst = rel;
            worst_name = name;
        }
    return {worst < 1e-3, fmt("%zu checks, worst relative error %.3g (%s)", results.size(), worst, worst_name.c_str())};
}

// 6
Outcome adam_and_schedule() {
    nn::ParamStore<double> store;
    store.insert("theta", TensorD::from({1, 1, 1, 1}, {1.0}, true));
    auto& th = store.get("theta");
    nn::backward(nn::sum(nn::mul(th, TensorD::from({1, 1, 1, 1}, {0.5}))));
    nn::adam_step(store, 0.0004);
    // m_hat = g, v_hat = g^2 after one bias-corrected step
    const double by_hand = 1.0 - 0.0004 * 0.5 / (std::sqrt(0.25) + 1e-8);
    const nn::LrSchedule s;
    const double lr0 = nn::lr_at(s, 0), lr2500 = nn::lr_at(s, 2500);
    const bool ok = std::abs(th.item() - by_hand) < 1e-9 && std::abs(th.item() - 0.9996) < 1e-9 && lr0 == 0.0004 &&
                    lr2500 == 0.0003;
    return {ok, fmt("theta' = %.12f, lr(0) = %.17g, lr(2500) = %.17g", th.item(), lr0, lr2500)};
}

// 7
Outcome training_gate() {
    const auto t0 = Clock::now();
    std::vector<TrainingPair> pairs;
    DegradationParams p;
    p.tilt_sigma = 0;
    p.blur_sigma = 0;
    p.noise_sigma = 0.05;
    for (int i = 0; i < 10; ++i) {
        const Image clean = synthesize_scene(128, 128, 100 + i);
        p.seed = 1000 + i;
        pairs.push_back({degrade_frame(clean, p, 0), clean});
    }
    ModelSpec spec;
    spec.d2net.width_multiplier = 1.0 / 8;
    TrainConfig cfg;
    cfg.max_iterations = 200;
    cfg.seed = 1;
    const auto r = train(spec, pairs, cfg);
    double first = 0, last = 0;
    for (int i = 0; i < 20; ++i) {
        first += r.losses[i] / 20;
        last += r.losses[180 + i] / 20;
    }
    const double secs = seconds_since(t0);
    return {last <= 0.7 * first && secs < 600,
            fmt("first-20 L1 %.5f, last-20 L1 %.5f, ratio %.3f, %.1f s", first, last, last / first, secs)};
}

struct Cli {
    fs::path root;
    fs::path log;
    int calls = 0;
    bool ok = true;
    std::string failed;

    void operator()(const std::string& args) {
        if (!ok) return;
        const auto out = log / ("call_" + std::to_string(calls++) + ".txt");
        if (run_cli(args, out) != 0) {
            ok = false;
            failed = args + ": " + read_bytes(out);
        }
    }
};

// 8
Outcome end_to_end(Cli& cli) {
    const auto& r = cli.root;
    cli("--seed 100 fixture --out " + q(r / "fixture_clean") + " --count 10 --size 128");
    cli("--seed 1 degrade --clean " + q(r / "fixture_clean") + " --out " + q(r / "fixture") + " --frames 16");
    cli("--seed 5000 fixture --out " + q(r / "train_clean") + " --count 20 --size 128");
    cli("--seed 2 degrade --clean " + q(r / "train_clean") + " --out " + q(r / "train") + " --frames 16");
    const std::string data = " --data " + q(r / "train" / "manifest.json") + " --out " + q(r / "models");
    cli("--seed 1 train --model d2net --input fused --width 0.125 --iters 300" + data);
    cli("--seed 1 train --model rdfdbk --features 16 --iters 300" + data);
    const std::string bench = "--seed 1 bench --data " + q(r / "fixture" / "manifest.json") + " --d2net " +
                              q(r / "models" / "d2net.d3nc") + " --rdfdbk " + q(r / "models" / "rdfdbk.d3nc");
    cli(bench + " --out " + q(r / "bench_a.json"));
    cli(bench + " --out " + q(r / "bench_b.json"));
    if (!cli.ok) return {false, "command failed: " + cli.failed};

    const auto report = nlohmann::json::parse(read_bytes(r / "bench_a.json"));
    const auto mean = [&](const char* m) { return report.at("aggregates").at(m).at("mean_psnr").get<double>(); };
    const double single = mean("single"), average = mean("average"), fused = mean("fused"), full = mean("full");
    const bool same = read_bytes(r / "bench_a.json") == read_bytes(r / "bench_b.json") &&
                      read_bytes(r / "bench_a.txt") == read_bytes(r / "bench_b.txt");
    return {fused - single >= 1.0 && full >= average && same && report.at("rows").size() == 40u,
            fmt("PSNR single %.3f, average %.3f, fused %.3f (+%.3f dB), full %.3f; rerun identical: %s", single,
                average, fused, fused - single, full, same ? "yes" : "no")};
}

// 9
Outcome determinism(Cli& cli) {
    const auto& r = cli.root;
    cli("--seed 3 fixture --out " + q(r / "det_clean") + " --count 3 --size 64");
    for (const char* run : {"a", "b"}) {
        const fs::path d = r / (std::string("det_") + run);
        cli("--seed 7 degrade --clean " + q(r / "det_clean") + " --out " + q(d / "data") + " --frames 4");
        const std::string train_args =
            " --iters 30 --batch 8 --data " + q(d / "data" / "manifest.json") + " --out " + q(d / "models");
        cli("--seed 4 train --model d2net --width 0.125" + train_args);
        cli("--seed 4 train --model rdfdbk --features 8 --rdfdbk-blocks 2" + train_args);
        const std::string nets = " --d2net " + q(d / "models" / "d2net.d3nc") + " --rdfdbk " +
                                 q(d / "models" / "rdfdbk.d3nc");
        cli("restore --frames " + q(d / "data" / "0000_scene_0000" / "frames") + " --out " + q(d / "restored.png") + nets);
        cli("--seed 4 bench --data " + q(d / "data" / "manifest.json") + " --out " + q(d / "bench.json") + nets);
    }
    if (!cli.ok) return {false, "command failed: " + cli.failed};

    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(r / "det_a"))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), r / "det_a"));
    std::size_t differing = 0;
    for (const auto& f : files)
        if (!fs::exists(r / "det_b" / f) || read_bytes(r / "det_a" / f) != read_bytes(r / "det_b" / f)) ++differing;
    return {differing == 0 && files.size() > 20,
            fmt("%zu artifacts compared across two runs, %zu differ", files.size(), differing)};
}

// 10
Outcome dataset_arithmetic(Cli& cli) {
    const auto& r = cli.root;
    cli("--seed 11 fixture --out " + q(r / "arith_clean") + " --count 50 --size 16");
    cli("--seed 7 degrade --clean " + q(r / "arith_clean") + " --out " + q(r / "arith") + " --frames 100");
    if (!cli.ok) return {false, "command failed: " + cli.failed};
    const auto m = DatasetManifest::load(r / "arith" / "manifest.json");
    std::size_t on_disk = 0;
    for (const auto& e : m.entries)
        for (const auto& f : e.frames) on_disk += fs::exists(m.resolve(f));
    return {m.entries.size() == 50 && m.frame_count() == 5000 && on_disk == 5000,
            fmt("%zu images, %zu manifest frames, %zu frame files", m.entries.size(), m.frame_count(), on_disk)};
}

} // namespace

int main() {
    const fs::path root = d3net::testing::scratch_dir("acceptance");
    Cli cli{root, root / "logs"};
    fs::create_directories(cli.log);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"dwt perfect reconstruction", dwt_reconstruction},
        {"haar parseval", parseval},
        {"registration", registration},
        {"fusion weights", fusion_weights},
        {"gradient checks", gradient_checks},
        {"adam step and lr schedule", adam_and_schedule},
        {"training gate", training_gate},
        {"end-to-end bench", [&] { return end_to_end(cli); }},
        {"determinism", [&] { return determinism(cli); }},
        {"dataset arithmetic", [&] { return dataset_arithmetic(cli); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        cli.ok = true;
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
