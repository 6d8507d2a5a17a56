#pragma once

#include "d3net/d3net/models.hpp"
#include "d3net/fusion.hpp"
#include "d3net/turbsim.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace d3net {

enum class ModelKind { d2net, rdfdbk };
ModelKind parse_model_kind(const std::string& s);
std::string to_string(ModelKind k);

/// What d2net sees during training. `frame`: a degraded frame at full
/// resolution. `fused`: the fused half-resolution approximation of the whole
/// sequence (the pipeline's actual d2net input), against the block-mean of clean.
enum class TrainInput { frame, fused };
TrainInput parse_train_input(const std::string& s);
std::string to_string(TrainInput t);

struct TrainConfig {
    int patch_size = 16;
    int batch_size = 32;
    std::uint64_t max_iterations = 1000;
    nn::LrSchedule schedule;
    std::uint64_t seed = 0;
    std::uint64_t checkpoint_every = 0; ///< 0: only the final checkpoint
    std::uint64_t log_every = 10;
    TrainInput input = TrainInput::frame;
    FusionOptions fusion;                ///< used when input == fused

    void validate() const;
};

struct TrainLogEntry {
    std::uint64_t iter = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    nn::ParamStore<float> params;
    std::vector<TrainLogEntry> log;
    std::vector<double> losses; ///< one per iteration
};

struct ModelSpec {
    ModelKind kind = ModelKind::d2net;
    D2NetConfig d2net;
    RdfdbkConfig rdfdbk;
};

struct TrainOutputs {
    std::filesystem::path checkpoint; ///< final checkpoint; intermediate ones get a _iterNNNNNN suffix
    std::filesystem::path log;        ///< JSON lines
};

/// Aligned (input, target) images. The target is either the input's size or
/// twice it (rdfdbk); patches are cut at the same relative position.
struct TrainingPair {
    Image input;
    Image target;
};

/// Single-channel models see every channel of a colour image as its own pair.
std::vector<TrainingPair> build_training_pairs(const ModelSpec& model, const DatasetManifest& data,
                                               const TrainConfig& cfg);

TrainResult train(const ModelSpec& model, const DatasetManifest& data, const TrainConfig& cfg,
                  const std::optional<TrainOutputs>& outputs = std::nullopt);
TrainResult train(const ModelSpec& model, const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                  const std::optional<TrainOutputs>& outputs = std::nullopt);

nlohmann::json to_json(const TrainLogEntry& e);

struct RestoreOptions {
    FusionOptions fusion;
    D2NetConfig d2net;   ///< structure is inferred from the parameters; other fields are used as given
    RdfdbkConfig rdfdbk;
};

struct RestoreResult {
    Image restored;
    Image fused_approx;
    Image d2net_out;
    FusedResult fusion;
};

/// fuse -> half-resolution approximation -> reflect-pad -> d2net -> crop -> rdfdbk -> crop -> clamp.
RestoreResult restore(const FrameSequence& seq, const nn::ParamStore<float>& d2net, const nn::ParamStore<float>& rdfdbk,
                      const RestoreOptions& opts = {});

/// Runs both networks on a fused approximation (for callers that already fused).
Image restore_from_approx(const Image& approx, int out_h, int out_w, const nn::ParamStore<float>& d2net,
                          const nn::ParamStore<float>& rdfdbk, const RestoreOptions& opts, Image* d2net_out = nullptr);

/// Writes fused, approx and d2net-output PFMs plus the fusion maps.
void dump_intermediate(const RestoreResult& r, const std::filesystem::path& dir);

/// Reflects (without repeating the edge) to the next multiple of `divisor` at bottom/right.
Plane reflect_pad(const Plane& in, int divisor);

struct PairMetrics {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    std::vector<PairMetrics> pairs;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    nlohmann::json to_json() const;
};

struct EvalPair {
    std::string id;
    Image restored;
    Image truth;
};

EvalReport evaluate(const std::vector<EvalPair>& pairs);

/// Lifts planes and images into NCHW tensors and back.
nn::Tensor<float> image_to_tensor(const Image& img);
Image tensor_to_image(const nn::Tensor<float>& t, int n = 0);

} // namespace d3net
