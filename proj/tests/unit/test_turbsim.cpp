#include "d3net/turbsim.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace d3net;
namespace fs = std::filesystem;

namespace {

DegradationParams zero_params() {
    DegradationParams p;
    p.tilt_sigma = 0;
    p.blur_sigma = 0;
    p.noise_sigma = 0;
    p.seed = 5;
    return p;
}

} // namespace

TEST_CASE("tilt field: zero strength, determinism and marginal std") {
    DegradationParams p;
    p.tilt_sigma = 0.0;
    const auto zero = sample_tilt_field(32, 32, p, 0);
    CHECK(zero.dy.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.dx.cwiseAbs().maxCoeff() == 0.0);

    p.tilt_sigma = 1.0;
    p.seed = 17;
    const auto a = sample_tilt_field(40, 30, p, 3);
    const auto b = sample_tilt_field(40, 30, p, 3);
    CHECK(a.dy == b.dy);
    CHECK(a.dx == b.dx);
    CHECK(a.dy != sample_tilt_field(40, 30, p, 4).dy);

    // Monte-Carlo std over 100 frames of 256x256
    double sy = 0, syy = 0, sx = 0, sxx = 0;
    std::size_t n = 0;
    for (int f = 0; f < 100; ++f) {
        const auto t = sample_tilt_field(256, 256, p, static_cast<std::uint64_t>(f));
        sy += t.dy.sum();
        syy += t.dy.squaredNorm();
        sx += t.dx.sum();
        sxx += t.dx.squaredNorm();
        n += static_cast<std::size_t>(t.dy.size());
    }
    const double std_y = std::sqrt(syy / n - (sy / n) * (sy / n));
    const double std_x = std::sqrt(sxx / n - (sx / n) * (sx / n));
    CHECK(std_y >= 0.9);
    CHECK(std_y <= 1.1);
    CHECK(std_x >= 0.9);
    CHECK(std_x <= 1.1);
}

TEST_CASE("zero-strength degradation is the identity") {
    const Image clean = d3net::testing::random_image(3, 20, 24, 1);
    CHECK(degrade_frame(clean, zero_params(), 0).data() == clean.data());
}

TEST_CASE("blur keeps constants and matches the sampled Gaussian on a delta") {
    auto p = zero_params();
    p.blur_sigma = 1.0;
    const Image flat(1, 16, 16, 0.35);
    CHECK((degrade_frame(flat, p, 0).data().array() - 0.35).abs().maxCoeff() < 1e-12);

    Image delta(1, 21, 21, 0.0);
    delta.at(0, 10, 10) = 1.0;
    const Image out = degrade_frame(delta, p, 0);
    // direct 2-D evaluation over the truncated [-3,3]^2 support
    double norm = 0.0;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j) norm += std::exp(-(i * i + j * j) / 2.0);
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j)
            CHECK(std::abs(out.at(0, 10 + i, 10 + j) - std::exp(-(i * i + j * j) / 2.0) / norm) < 1e-6);
    CHECK(out.at(0, 10, 14) == 0.0);
}

TEST_CASE("noise marginals on a mid-gray image") {
    auto p = zero_params();
    p.noise_sigma = 0.05;
    const Image gray(1, 128, 128, 0.5);
    const Image out = degrade_frame(gray, p, 2);
    const Eigen::ArrayXXd diff = (out.data() - gray.data()).array();
    const double n = static_cast<double>(diff.size());
    const double mean = diff.mean();
    const double stdev = std::sqrt((diff - mean).square().sum() / n);
    CHECK(std::abs(mean) < 4 * 0.05 / std::sqrt(n));
    CHECK(std::abs(stdev - 0.05) < 0.05 * 0.05);
}

TEST_CASE("full degradation keeps the mean intensity of a mid-gray scene") {
    DegradationParams p;
    p.seed = 3;
    const Image gray(1, 64, 64, 0.5);
    const Image out = degrade_frame(gray, p, 0);
    CHECK(out.data().minCoeff() >= 0.0);
    CHECK(out.data().maxCoeff() <= 1.0);
    CHECK(std::abs(out.data().mean() - 0.5) < 3 * p.noise_sigma / 64.0 + 1e-9);
}

TEST_CASE("jittered parameters stay inside [0.5, 1.5] of the base") {
    DegradationParams base;
    base.seed = 9;
    for (std::uint64_t v = 0; v < 50; ++v) {
        const auto p = jitter_params(base, 2, v);
        CHECK(p.tilt_sigma >= 0.5 * base.tilt_sigma);
        CHECK(p.tilt_sigma <= 1.5 * base.tilt_sigma);
        CHECK(p.blur_sigma >= 0.5 * base.blur_sigma);
        CHECK(p.noise_sigma <= 1.5 * base.noise_sigma);
        CHECK(p.tilt_corr == base.tilt_corr);
    }
}

TEST_CASE("synthesized scenes are deterministic and in range") {
    const Image a = synthesize_scene(64, 80, 4);
    CHECK(a.data() == synthesize_scene(64, 80, 4).data());
    CHECK(a.data() != synthesize_scene(64, 80, 5).data());
    CHECK(a.data().minCoeff() >= 0.0);
    CHECK(a.data().maxCoeff() <= 1.0);
    CHECK(synthesize_scene(32, 32, 1, 3).channels() == 3);
}

TEST_CASE("generate_dataset with zero strength copies the clean image") {
    const auto root = d3net::testing::scratch_dir("gen_identity");
    fs::create_directories(root / "clean");
    save_image(synthesize_scene(24, 24, 1), root / "clean" / "a.png");
    const auto m = generate_dataset(root / "clean", root / "out", zero_params(), 1);
    REQUIRE(m.entries.size() == 1u);
    REQUIRE(m.entries[0].frames.size() == 1u);
    CHECK(load_image(m.resolve(m.entries[0].frames[0])).data() == load_image(root / "clean" / "a.png").data());

    const auto reloaded = DatasetManifest::load(root / "out" / "manifest.json");
    CHECK(reloaded.to_json() == m.to_json());
    CHECK(fs::exists(reloaded.resolve(reloaded.entries[0].clean)));
}

TEST_CASE("generate_dataset is byte-reproducible") {
    const auto root = d3net::testing::scratch_dir("gen_repro");
    fs::create_directories(root / "clean");
    for (int i = 0; i < 3; ++i) save_image(synthesize_scene(32, 32, 10 + i), root / "clean" / ("s" + std::to_string(i) + ".png"));
    DegradationParams p;
    p.seed = 7;
    const auto a = generate_dataset(root / "clean", root / "run1", p, 4);
    const auto b = generate_dataset(root / "clean", root / "run2", p, 4);
    CHECK(d3net::testing::read_bytes(root / "run1" / "manifest.json") == d3net::testing::read_bytes(root / "run2" / "manifest.json"));
    for (std::size_t e = 0; e < a.entries.size(); ++e)
        for (const auto& f : a.entries[e].frames) CHECK(d3net::testing::read_bytes(a.resolve(f)) == d3net::testing::read_bytes(b.resolve(f)));
}

TEST_CASE("generate_dataset errors") {
    const auto root = d3net::testing::scratch_dir("gen_errors");
    fs::create_directories(root / "empty");
    CHECK_THROWS_AS(generate_dataset(root / "empty", root / "out", DegradationParams{}, 1), IoError);
    CHECK_THROWS_AS(generate_dataset(root / "missing", root / "out", DegradationParams{}, 1), IoError);
    DegradationParams bad;
    bad.tilt_corr = 0.5;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = {};
    bad.frames = 0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}
