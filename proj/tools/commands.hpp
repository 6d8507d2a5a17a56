#pragma once

#include "run_config.hpp"

#include <cstdint>
#include <string>

namespace d3net::cli {

struct GlobalArgs {
    std::uint64_t seed = 0;
    std::string config;
    int threads = 0;
};

struct DegradeArgs {
    std::string clean;
    std::string out;
    int frames = 100;
    double tilt_sigma = 1.0;
    double tilt_corr = 8.0;
    double blur_sigma = 1.2;
    double noise_sigma = 0.01;
};

struct FixtureArgs {
    std::string out;
    int count = 10;
    int size = 128;
    int width = 0;
    int channels = 1;
};

struct TrainArgs {
    std::string model = "d2net";
    std::string data;
    std::string out = ".";
    std::uint64_t iters = 1000;
    int patch = 16;
    int batch = 32;
    std::uint64_t checkpoint_every = 0;
    std::string input = "frame";
    double width = 1.0;
    int blocks = 2;
    bool no_global_residual = false;
    int time_steps = 3;
    int features = 32;
    int rdfdbk_blocks = 4;
};

struct PipelineArgs {
    std::string d2net;
    std::string rdfdbk;
    int levels = 2;
    std::string family = "haar";
    int roi = 7;
    int time_steps = 3;
    bool no_global_residual = false;
};

struct RestoreArgs {
    std::string frames;
    std::string out;
    std::string dump_intermediate;
    PipelineArgs pipeline;
};

struct BenchArgs {
    std::string data;
    std::string out;
    std::string table;
    bool timing = false;
    PipelineArgs pipeline;
};

int cmd_degrade(const GlobalArgs& g, const DegradeArgs& a, const RunConfig& rc);
int cmd_fixture(const GlobalArgs& g, const FixtureArgs& a);
int cmd_train(const GlobalArgs& g, const TrainArgs& a, const RunConfig& rc);
int cmd_restore(const GlobalArgs& g, const RestoreArgs& a);
int cmd_bench(const GlobalArgs& g, const BenchArgs& a, const RunConfig& rc);

} // namespace d3net::cli
