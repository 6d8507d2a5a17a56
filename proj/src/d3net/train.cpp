#include "d3net/d3net/pipeline.hpp"

#include "d3net/parallel.hpp"
#include "d3net/random.hpp"

#include <cstdio>
#include <fstream>

namespace d3net {
namespace {

Image block_mean_image(const Image& img) {
    std::vector<Plane> planes;
    for (int c = 0; c < img.channels(); ++c) {
        planes.push_back(block_mean_downsample(img.plane(c), 1));
    }
    return Image::from_planes(planes);
}

void append_split(std::vector<TrainingPair>& out, const Image& input, const Image& target, int in_channels) {
    if (in_channels == input.channels()) {
        out.push_back({input, target});
        return;
    }
    if (in_channels != 1) {
        throw ContractError("training data has " + std::to_string(input.channels()) + " channels, model expects " +
                            std::to_string(in_channels));
    }
    for (int c = 0; c < input.channels(); ++c) {
        out.push_back({Image::from_plane(input.plane(c)), Image::from_plane(target.plane(c))});
    }
}

std::filesystem::path intermediate_path(const std::filesystem::path& final_path, std::uint64_t iter) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_iter%06llu", static_cast<unsigned long long>(iter));
    auto p = final_path;
    p.replace_filename(final_path.stem().string() + buf + final_path.extension().string());
    return p;
}

// Copies a patch of every channel into batch slot `n` of `t`.
void copy_patch(const Image& img, int y0, int x0, int size, nn::Tensor<float>& t, int n) {
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                t.at(n, c, y, x) = static_cast<float>(img.at(c, y0 + y, x0 + x));
            }
        }
    }
}

} // namespace

ModelKind parse_model_kind(const std::string& s) {
    if (s == "d2net") return ModelKind::d2net;
    if (s == "rdfdbk") return ModelKind::rdfdbk;
    throw ContractError("unknown model '" + s + "' (expected d2net or rdfdbk)");
}

std::string to_string(ModelKind k) { return k == ModelKind::d2net ? "d2net" : "rdfdbk"; }

TrainInput parse_train_input(const std::string& s) {
    if (s == "frame") return TrainInput::frame;
    if (s == "fused") return TrainInput::fused;
    throw ContractError("unknown training input '" + s + "' (expected frame or fused)");
}

std::string to_string(TrainInput t) { return t == TrainInput::frame ? "frame" : "fused"; }

void TrainConfig::validate() const {
    if (patch_size < 8 || patch_size % 2 != 0) {
        throw ContractError("train: patch_size must be even and >= 8");
    }
    if (batch_size < 1) {
        throw ContractError("train: batch_size must be >= 1");
    }
    if (log_every < 1) {
        throw ContractError("train: log_every must be >= 1");
    }
}

nlohmann::json to_json(const TrainLogEntry& e) {
    return {{"format_version", 1}, {"iter", e.iter}, {"lr", e.lr}, {"loss", e.loss}};
}

std::vector<TrainingPair> build_training_pairs(const ModelSpec& model, const DatasetManifest& data,
                                               const TrainConfig& cfg) {
    if (data.entries.empty()) {
        throw ContractError("train: dataset manifest has no entries");
    }
    const int in_c = model.kind == ModelKind::d2net ? model.d2net.in_channels : model.rdfdbk.in_channels;
    std::vector<std::vector<TrainingPair>> per_entry(data.entries.size());
    parallel_for(data.entries.size(), [&](std::size_t i) {
        const auto& e = data.entries[i];
        const Image clean = load_image(data.resolve(e.clean));
        auto& out = per_entry[i];
        if (model.kind == ModelKind::rdfdbk) {
            append_split(out, block_mean_image(clean), clean, in_c);
            return;
        }
        if (cfg.input == TrainInput::fused) {
            FrameSequence seq;
            seq.source_id = e.clean;
            for (const auto& f : e.frames) seq.frames.push_back(load_image(data.resolve(f)));
            append_split(out, fuse_sequence(seq, cfg.fusion).fused_approx, block_mean_image(clean), in_c);
            return;
        }
        for (const auto& f : e.frames) {
            const Image degraded = load_image(data.resolve(f));
            if (!degraded.same_shape(clean)) {
                throw ContractError("train: frame '" + f + "' does not match its clean image");
            }
            append_split(out, degraded, clean, in_c);
        }
    });
    std::vector<TrainingPair> pairs;
    for (auto& v : per_entry) {
        for (auto& p : v) pairs.push_back(std::move(p));
    }
    return pairs;
}

TrainResult train(const ModelSpec& model, const DatasetManifest& data, const TrainConfig& cfg,
                  const std::optional<TrainOutputs>& outputs) {
    cfg.validate();
    return train(model, build_training_pairs(model, data, cfg), cfg, outputs);
}

TrainResult train(const ModelSpec& model, const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                  const std::optional<TrainOutputs>& outputs) {
    cfg.validate();
    if (pairs.empty()) {
        throw ContractError("train: no training pairs");
    }
    const bool is_d2net = model.kind == ModelKind::d2net;
    const int in_c = is_d2net ? model.d2net.in_channels : model.rdfdbk.in_channels;
    const int scale = is_d2net ? 1 : 2;
    const int target_patch = cfg.patch_size;
    const int input_patch = target_patch / scale;
    if (is_d2net && input_patch % model.d2net.divisor() != 0) {
        throw ContractError("train: patch_size " + std::to_string(target_patch) + " is not divisible by " +
                            std::to_string(model.d2net.divisor()) + " (d2net scales)");
    }
    for (const auto& p : pairs) {
        if (p.input.channels() != in_c || p.target.channels() != in_c) {
            throw ContractError("train: pair channels do not match the model's " + std::to_string(in_c));
        }
        if (p.target.height() < target_patch || p.target.width() < target_patch || p.input.height() < input_patch ||
            p.input.width() < input_patch) {
            throw ContractError("train: patch_size " + std::to_string(target_patch) + " exceeds a " +
                                std::to_string(p.target.height()) + "x" + std::to_string(p.target.width()) +
                                " training image");
        }
    }

    TrainResult result;
    result.params = is_d2net ? init_d2net<float>(model.d2net, cfg.seed) : init_rdfdbk<float>(model.rdfdbk, cfg.seed);
    auto& params = result.params;

    std::ofstream log_file;
    if (outputs) {
        log_file.open(outputs->log, std::ios::binary | std::ios::trunc);
        if (!log_file) {
            throw IoError("cannot write training log '" + outputs->log.string() + "'");
        }
    }

    RandomStream sampler(cfg.seed, 0, 0, StreamTag::sampler);
    const int B = cfg.batch_size;
    for (std::uint64_t it = 0; it < cfg.max_iterations; ++it) {
        auto input = nn::Tensor<float>::zeros({B, in_c, input_patch, input_patch});
        auto target = nn::Tensor<float>::zeros({B, in_c, target_patch, target_patch});
        for (int b = 0; b < B; ++b) {
            const auto& p = pairs[sampler.index(pairs.size())];
            const int max_y = std::min(p.input.height() - input_patch, (p.target.height() - target_patch) / scale);
            const int max_x = std::min(p.input.width() - input_patch, (p.target.width() - target_patch) / scale);
            const int y = static_cast<int>(sampler.index(static_cast<std::uint64_t>(max_y) + 1));
            const int x = static_cast<int>(sampler.index(static_cast<std::uint64_t>(max_x) + 1));
            copy_patch(p.input, y, x, input_patch, input, b);
            copy_patch(p.target, scale * y, scale * x, target_patch, target, b);
        }

        params.zero_grad();
        const auto out =
            is_d2net ? d2net_forward(params, model.d2net, input) : rdfdbk_forward(params, model.rdfdbk, input);
        const auto loss = nn::l1_loss(out, target);
        nn::backward(loss);
        const double lr = nn::lr_at(cfg.schedule, it);
        nn::adam_step(params, lr);
        params.iteration = it + 1;

        const double loss_value = loss.item();
        result.losses.push_back(loss_value);
        if (it % cfg.log_every == 0) {
            result.log.push_back({it, lr, loss_value});
            if (outputs) {
                log_file << to_json(result.log.back()).dump() << '\n' << std::flush;
            }
        }
        if (outputs && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 &&
            it + 1 != cfg.max_iterations) {
            nn::save_checkpoint(params, intermediate_path(outputs->checkpoint, it + 1));
        }
    }
    if (outputs) {
        nn::save_checkpoint(params, outputs->checkpoint);
        if (!log_file) {
            throw IoError("write failed for training log '" + outputs->log.string() + "'");
        }
    }
    return result;
}

} // namespace d3net
