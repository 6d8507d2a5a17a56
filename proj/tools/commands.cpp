#include "commands.hpp"

#include "d3net/d3net.hpp"
#include "d3net/parallel.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace d3net::cli {
namespace fs = std::filesystem;

namespace {

template <typename Fn>
auto usage_checked(Fn&& fn) {
    try {
        return fn();
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }
}

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + file.string() + "'");
    }
    out << text;
    if (!out) {
        throw IoError("write failed for '" + file.string() + "'");
    }
}

FrameSequence load_sequence(const std::vector<fs::path>& files, std::string id) {
    FrameSequence seq;
    seq.source_id = std::move(id);
    for (const auto& f : files) {
        seq.frames.push_back(load_image(f));
    }
    return seq;
}

struct Pipeline {
    nn::ParamStore<float> d2net;
    nn::ParamStore<float> rdfdbk;
    RestoreOptions options;
};

// Without checkpoints the networks are identity-configured.
Pipeline load_pipeline(const PipelineArgs& a) {
    Pipeline p;
    p.options.fusion.levels = a.levels;
    p.options.fusion.roi_size = a.roi;
    p.options.fusion.family = usage_checked([&] { return parse_wavelet_family(a.family); });
    p.options.d2net.global_residual = !a.no_global_residual;
    p.options.rdfdbk.time_steps = a.time_steps;
    if (a.levels < 1 || a.roi < 1 || a.time_steps < 1) {
        throw UsageError("levels, roi and time-steps must be >= 1");
    }
    D2NetConfig d2;
    d2.width_multiplier = 1.0 / 16;
    p.d2net = a.d2net.empty() ? identity_d2net(d2) : nn::load_checkpoint(a.d2net);
    p.rdfdbk = a.rdfdbk.empty() ? identity_rdfdbk(RdfdbkConfig{.feature_channels = 4, .residual_blocks = 1})
                                : nn::load_checkpoint(a.rdfdbk);
    return p;
}

nlohmann::json versioned(nlohmann::json body, std::uint64_t seed) {
    body["format_version"] = 1;
    body["tool_version"] = D3NET_VERSION;
    body["seed"] = seed;
    return body;
}

} // namespace

int cmd_degrade(const GlobalArgs& g, const DegradeArgs& a, const RunConfig& rc) {
    if (a.frames < 1) {
        throw UsageError("--frames must be >= 1");
    }
    DegradationParams p;
    p.tilt_sigma = a.tilt_sigma;
    p.tilt_corr = a.tilt_corr;
    p.blur_sigma = a.blur_sigma;
    p.noise_sigma = a.noise_sigma;
    p.seed = g.seed;
    usage_checked([&] {
        p.validate();
        return 0;
    });
    const auto m = generate_dataset(a.clean, a.out, p, a.frames, rc.effective());
    std::cout << (fs::path(a.out) / "manifest.json").string() << '\n';
    std::cerr << m.entries.size() << " images, " << m.frame_count() << " frames\n";
    return 0;
}

int cmd_fixture(const GlobalArgs& g, const FixtureArgs& a) {
    const int w = a.width > 0 ? a.width : a.size;
    if (a.count < 1 || a.size < 8 || w < 8 || (a.channels != 1 && a.channels != 3)) {
        throw UsageError("fixture: count >= 1, size/width >= 8 and channels in {1, 3} required");
    }
    fs::create_directories(a.out);
    for (int i = 0; i < a.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04d.png", i);
        save_image(synthesize_scene(a.size, w, image_seed(g.seed, static_cast<std::uint64_t>(i)), a.channels),
                   fs::path(a.out) / name);
    }
    std::cout << a.out << '\n';
    return 0;
}

int cmd_train(const GlobalArgs& g, const TrainArgs& a, const RunConfig& rc) {
    ModelSpec spec;
    TrainConfig cfg;
    usage_checked([&] {
        spec.kind = parse_model_kind(a.model);
        spec.d2net.width_multiplier = a.width;
        spec.d2net.residual_blocks = a.blocks;
        spec.d2net.global_residual = !a.no_global_residual;
        spec.d2net.validate();
        spec.rdfdbk.time_steps = a.time_steps;
        spec.rdfdbk.feature_channels = a.features;
        spec.rdfdbk.residual_blocks = a.rdfdbk_blocks;
        spec.rdfdbk.validate();
        cfg.patch_size = a.patch;
        cfg.batch_size = a.batch;
        cfg.max_iterations = a.iters;
        cfg.checkpoint_every = a.checkpoint_every;
        cfg.input = parse_train_input(a.input);
        cfg.seed = g.seed;
        cfg.validate();
        return 0;
    });
    const auto data = DatasetManifest::load(a.data);
    const fs::path out(a.out);
    fs::create_directories(out);
    const std::string stem = to_string(spec.kind);
    const TrainOutputs outputs{out / (stem + ".d3nc"), out / (stem + "_log.jsonl")};
    write_text(out / (stem + "_config.json"), versioned({{"config", rc.effective()}}, g.seed).dump(2) + "\n");
    const auto result = train(spec, data, cfg, outputs);
    std::cout << outputs.checkpoint.string() << '\n';
    if (!result.losses.empty()) {
        std::cerr << "final loss " << result.losses.back() << " after " << result.losses.size() << " iterations\n";
    }
    return 0;
}

int cmd_restore(const GlobalArgs&, const RestoreArgs& a) {
    const auto pipeline = load_pipeline(a.pipeline);
    const auto files = list_images(a.frames);
    if (files.empty()) {
        throw IoError("no .png/.pfm frames in '" + a.frames + "'");
    }
    const auto r = restore(load_sequence(files, a.frames), pipeline.d2net, pipeline.rdfdbk, pipeline.options);
    const fs::path out(a.out);
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    save_image(r.restored, out);
    if (!a.dump_intermediate.empty()) {
        dump_intermediate(r, a.dump_intermediate);
    }
    std::cout << out.string() << '\n';
    return 0;
}

int cmd_bench(const GlobalArgs& g, const BenchArgs& a, const RunConfig& rc) {
    const auto pipeline = load_pipeline(a.pipeline);
    const auto data = DatasetManifest::load(a.data);
    if (data.entries.empty()) {
        throw IoError("manifest '" + a.data + "' has no entries");
    }
    static const std::array<const char*, 4> kMethods{"single", "average", "fused", "full"};
    struct Row {
        double psnr = 0, ssim = 0, ms = 0;
    };
    std::vector<std::array<Row, 4>> rows(data.entries.size());
    std::vector<std::string> ids(data.entries.size());

    parallel_for(data.entries.size(), [&](std::size_t i) {
        const auto& e = data.entries[i];
        ids[i] = fs::path(e.clean).parent_path().string();
        std::vector<fs::path> files;
        for (const auto& f : e.frames) files.push_back(data.resolve(f));
        const FrameSequence seq = load_sequence(files, ids[i]);
        const Image truth = load_image(data.resolve(e.clean));

        using clock = std::chrono::steady_clock;
        auto score = [&](int m, const auto& produce) {
            const auto t0 = clock::now();
            const Image img = produce();
            rows[i][m].ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            if (!img.same_shape(truth)) {
                throw ContractError("bench: method " + std::string(kMethods[m]) + " changed the image size");
            }
            rows[i][m].psnr = psnr(img, truth);
            rows[i][m].ssim = ssim(img, truth);
        };
        score(0, [&] { return seq.frames[seq.middle_index()]; });
        score(1, [&] { return frame_average(seq); });
        FusedResult fused;
        score(2, [&] {
            fused = fuse_sequence(seq, pipeline.options.fusion);
            return clamp01(fused.fused_full);
        });
        score(3, [&] {
            const auto t0 = clock::now();
            Image img = restore_from_approx(fused.fused_approx, truth.height(), truth.width(), pipeline.d2net,
                                            pipeline.rdfdbk, pipeline.options);
            // the full pipeline includes the fusion time
            rows[i][3].ms = -std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            return img;
        });
        rows[i][3].ms = rows[i][2].ms + rows[i][3].ms;
    });

    nlohmann::json jrows = nlohmann::json::array();
    nlohmann::json aggregates = nlohmann::json::object();
    std::array<double, 4> sum_psnr{}, sum_ssim{};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int m = 0; m < 4; ++m) {
            const auto& r = rows[i][m];
            jrows.push_back({{"source_id", ids[i]},
                             {"method", kMethods[m]},
                             {"psnr", r.psnr},
                             {"ssim", r.ssim},
                             {"wall_ms", a.timing ? nlohmann::json(r.ms) : nlohmann::json(nullptr)}});
            sum_psnr[m] += r.psnr;
            sum_ssim[m] += r.ssim;
        }
    }
    const double n = static_cast<double>(rows.size());
    for (int m = 0; m < 4; ++m) {
        aggregates[kMethods[m]] = {{"mean_psnr", sum_psnr[m] / n}, {"mean_ssim", sum_ssim[m] / n}, {"count", rows.size()}};
    }
    const auto report = versioned({{"config", rc.effective()}, {"rows", jrows}, {"aggregates", aggregates}}, g.seed);

    std::string table = "source_id                       method      psnr      ssim\n";
    char line[160];
    for (const auto& r : jrows) {
        std::snprintf(line, sizeof line, "%-31s %-8s %8.4f %9.6f\n", r["source_id"].get<std::string>().c_str(),
                      r["method"].get<std::string>().c_str(), r["psnr"].get<double>(), r["ssim"].get<double>());
        table += line;
    }
    for (int m = 0; m < 4; ++m) {
        std::snprintf(line, sizeof line, "%-31s %-8s %8.4f %9.6f\n", "mean", kMethods[m], sum_psnr[m] / n,
                      sum_ssim[m] / n);
        table += line;
    }
    write_text(a.out, report.dump(2) + "\n");
    const fs::path table_path = a.table.empty() ? fs::path(a.out).replace_extension(".txt") : fs::path(a.table);
    write_text(table_path, table);
    std::cout << table;
    return 0;
}

} // namespace d3net::cli
