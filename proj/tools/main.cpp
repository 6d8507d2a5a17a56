#include "commands.hpp"

#include "d3net/imagecore.hpp"
#include "d3net/parallel.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <thread>
#include <utility>
#include <vector>

using namespace d3net::cli;

namespace {

struct Command {
    explicit Command(CLI::App* a) : app(a) {}
    CLI::App* app;
    RunConfig rc;
    std::vector<std::pair<std::string, const std::string*>> required;

    void require(const std::string& flag, const std::string& value) { required.emplace_back(flag, &value); }
    void check_required() const {
        for (const auto& [flag, value] : required) {
            if (value->empty()) {
                throw UsageError("--" + flag + " is required");
            }
        }
    }
};

void bind_common(Command& c, GlobalArgs& g, CLI::App& root) {
    c.rc.bind("seed", root.get_option("--seed"), g.seed);
    c.rc.bind("threads", root.get_option("--threads"), g.threads);
    c.rc.hide("threads");
}

void add_pipeline_options(Command& c, PipelineArgs& p) {
    c.rc.option(c.app, "d2net", p.d2net, "D2Net checkpoint (identity network if omitted)");
    c.rc.option(c.app, "rdfdbk", p.rdfdbk, "RDFDBK checkpoint (nearest-neighbour upsampling if omitted)");
    c.rc.option(c.app, "levels", p.levels, "wavelet decomposition levels");
    c.rc.option(c.app, "family", p.family, "wavelet family (haar, db2)");
    c.rc.option(c.app, "roi", p.roi, "fusion window size in pixels");
    c.rc.option(c.app, "time-steps", p.time_steps, "RDFDBK feedback iterations");
    c.rc.flag(c.app, "no-global-residual", p.no_global_residual, "D2Net checkpoint was trained without the global skip");
    c.rc.hide("d2net");
    c.rc.hide("rdfdbk");
}

nlohmann::json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw d3net::IoError("cannot read config '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config '" + path + "': " + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Turbulence mitigation: frame fusion followed by learned deblurring and super-resolution", "d3net"};
    app.set_version_flag("--version", D3NET_VERSION);
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--seed", g.seed, "master random seed")->capture_default_str();
    app.add_option("--config", g.config, "JSON file of option values; command-line flags take precedence");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware concurrency)")->capture_default_str();

    DegradeArgs degrade;
    Command cd{app.add_subcommand("degrade", "synthesise turbulence-degraded frame sequences")};
    cd.rc.option(cd.app, "clean", degrade.clean, "directory of clean images");
    cd.require("clean", degrade.clean);
    cd.rc.option(cd.app, "out", degrade.out, "output dataset directory");
    cd.require("out", degrade.out);
    cd.rc.option(cd.app, "frames", degrade.frames, "frames per clean image");
    cd.rc.option(cd.app, "tilt-sigma", degrade.tilt_sigma, "tilt displacement std-dev (pixels)");
    cd.rc.option(cd.app, "tilt-corr", degrade.tilt_corr, "tilt correlation length (pixels)");
    cd.rc.option(cd.app, "blur-sigma", degrade.blur_sigma, "blur kernel std-dev (pixels)");
    cd.rc.option(cd.app, "noise-sigma", degrade.noise_sigma, "additive Gaussian noise std-dev");
    cd.rc.hide("clean");
    cd.rc.hide("out");

    FixtureArgs fixture;
    Command cf{app.add_subcommand("fixture", "write synthetic clean scenes")};
    cf.rc.option(cf.app, "out", fixture.out, "output directory");
    cf.require("out", fixture.out);
    cf.rc.option(cf.app, "count", fixture.count, "number of scenes");
    cf.rc.option(cf.app, "size", fixture.size, "scene height (and width unless --width)");
    cf.rc.option(cf.app, "width", fixture.width, "scene width (0 = same as size)");
    cf.rc.option(cf.app, "channels", fixture.channels, "1 or 3");

    TrainArgs tr;
    Command ct{app.add_subcommand("train", "train D2Net or RDFDBK")};
    ct.rc.option(ct.app, "model", tr.model, "d2net or rdfdbk");
    ct.rc.option(ct.app, "data", tr.data, "dataset manifest.json");
    ct.require("data", tr.data);
    ct.rc.option(ct.app, "out", tr.out, "output directory");
    ct.rc.option(ct.app, "iters", tr.iters, "training iterations");
    ct.rc.option(ct.app, "patch", tr.patch, "target patch size");
    ct.rc.option(ct.app, "batch", tr.batch, "patches per iteration");
    ct.rc.option(ct.app, "checkpoint-every", tr.checkpoint_every, "intermediate checkpoint interval (0 = off)");
    ct.rc.option(ct.app, "input", tr.input, "D2Net input: frame or fused");
    ct.rc.option(ct.app, "width", tr.width, "D2Net channel width multiplier");
    ct.rc.option(ct.app, "blocks", tr.blocks, "D2Net residual blocks per scale");
    ct.rc.flag(ct.app, "no-global-residual", tr.no_global_residual, "disable the D2Net input skip");
    ct.rc.option(ct.app, "time-steps", tr.time_steps, "RDFDBK feedback iterations");
    ct.rc.option(ct.app, "features", tr.features, "RDFDBK feature channels");
    ct.rc.option(ct.app, "rdfdbk-blocks", tr.rdfdbk_blocks, "RDFDBK residual blocks");
    ct.rc.hide("data");
    ct.rc.hide("out");

    RestoreArgs rs;
    Command cr{app.add_subcommand("restore", "restore one degraded frame sequence")};
    cr.rc.option(cr.app, "frames", rs.frames, "directory of frames (sorted by name)");
    cr.require("frames", rs.frames);
    cr.rc.option(cr.app, "out", rs.out, "output image (.png or .pfm)");
    cr.require("out", rs.out);
    cr.rc.option(cr.app, "dump-intermediate", rs.dump_intermediate, "directory for intermediate images");
    add_pipeline_options(cr, rs.pipeline);

    BenchArgs bench;
    Command cb{app.add_subcommand("bench", "compare restoration methods on a dataset")};
    cb.rc.option(cb.app, "data", bench.data, "dataset manifest.json");
    cb.require("data", bench.data);
    cb.rc.option(cb.app, "out", bench.out, "JSON report path");
    cb.require("out", bench.out);
    cb.rc.option(cb.app, "table", bench.table, "plain-text table path (default: report path with .txt)");
    cb.rc.flag(cb.app, "timing", bench.timing, "record wall-clock times per method");
    add_pipeline_options(cb, bench.pipeline);
    cb.rc.hide("out");
    cb.rc.hide("table");
    cb.rc.hide("data");
    cb.rc.hide("timing");

    for (Command* c : {&cd, &cf, &ct, &cr, &cb}) {
        c->app->fallthrough();
        c->app->footer(
            "Global options (given before the command):\n"
            "  --seed UINT [0]       master random seed\n"
            "  --config FILE         JSON object of option values (keys are flag names with '_' for '-');\n"
            "                        command-line flags take precedence, unknown keys are rejected\n"
            "  --threads INT [0]     worker threads (0 = hardware concurrency)");
        bind_common(*c, g, app);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Command* active = nullptr;
        for (Command* c : {&cd, &cf, &ct, &cr, &cb}) {
            if (c->app->parsed()) active = c;
        }
        if (!g.config.empty()) {
            active->rc.apply(read_config(g.config));
        }
        active->check_required();
        if (g.threads < 0) {
            throw UsageError("--threads must be >= 0");
        }
        d3net::set_thread_count(g.threads > 0 ? g.threads : static_cast<int>(std::thread::hardware_concurrency()));

        if (active == &cd) return cmd_degrade(g, degrade, cd.rc);
        if (active == &cf) return cmd_fixture(g, fixture);
        if (active == &ct) return cmd_train(g, tr, ct.rc);
        if (active == &cr) return cmd_restore(g, rs);
        return cmd_bench(g, bench, cb.rc);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
