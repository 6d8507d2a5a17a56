#pragma once

#include "d3net/neuralcore.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace d3net {

struct D2NetConfig {
    int scales = 4;
    std::vector<int> channels{64, 128, 256, 512};
    double width_multiplier = 1.0;
    int residual_blocks = 2;
    bool global_residual = true;
    int in_channels = 1;

    /// round(multiplier * channels), at least 4.
    std::vector<int> effective_channels() const {
        std::vector<int> out;
        for (int c : channels) {
            out.push_back(std::max(4, static_cast<int>(std::lround(width_multiplier * c))));
        }
        return out;
    }
    int divisor() const { return 1 << (scales - 1); }

    void validate() const {
        if (scales < 1 || static_cast<int>(channels.size()) != scales) {
            throw ContractError("D2NetConfig: scales must equal the number of channel entries");
        }
        if (!(width_multiplier > 0.0 && width_multiplier <= 1.0)) {
            throw ContractError("D2NetConfig: width_multiplier must lie in (0, 1]");
        }
        if (residual_blocks < 0 || in_channels < 1) {
            throw ContractError("D2NetConfig: residual_blocks must be >= 0 and in_channels >= 1");
        }
    }
};

struct RdfdbkConfig {
    int time_steps = 3;
    int feature_channels = 32;
    int residual_blocks = 4;
    int in_channels = 1;

    void validate() const {
        if (time_steps < 1 || feature_channels < 1 || residual_blocks < 0 || in_channels < 1) {
            throw ContractError("RdfdbkConfig: time_steps, feature_channels and in_channels must be >= 1");
        }
    }
};

namespace models {

using nn::ParamStore;
using nn::Shape;
using nn::Tensor;

/// Residual branches and output heads start at zero, so a fresh model is the
/// identity (d2net with global residual) or nearest-neighbour x2 (rdfdbk).
inline constexpr double kBranchGain = 0.0;

template <typename Scalar>
void add_conv(ParamStore<Scalar>& p, const std::string& name, int out_c, int in_c, int k, double gain = 1.0) {
    p.add(name + ".w", Shape{out_c, in_c, k, k}, in_c * k * k, gain);
    p.add_zeros(name + ".b", Shape{1, 1, 1, out_c});
}

/// Transposed-conv weight layout is (in_c, out_c, k, k).
template <typename Scalar>
void add_conv_transposed(ParamStore<Scalar>& p, const std::string& name, int in_c, int out_c, int k) {
    p.add(name + ".w", Shape{in_c, out_c, k, k}, in_c);
    p.add_zeros(name + ".b", Shape{1, 1, 1, out_c});
}

template <typename Scalar>
void add_res_block(ParamStore<Scalar>& p, const std::string& name, int c) {
    add_conv(p, name + ".conv1", c, c, 3);
    add_conv(p, name + ".conv2", c, c, 3, kBranchGain);
}

template <typename Scalar>
Tensor<Scalar> conv(const ParamStore<Scalar>& p, const std::string& name, const Tensor<Scalar>& x, int stride = 1,
                    int pad = 1) {
    return nn::conv2d(x, p.get(name + ".w"), p.get(name + ".b"), stride, pad);
}

/// relu(x + conv2(relu(conv1(x))))
template <typename Scalar>
Tensor<Scalar> res_block(const ParamStore<Scalar>& p, const std::string& name, const Tensor<Scalar>& x) {
    const auto h = nn::relu(conv(p, name + ".conv1", x));
    return nn::relu(nn::add(x, conv(p, name + ".conv2", h)));
}

template <typename Scalar>
void zero_layer(ParamStore<Scalar>& p, const std::string& name) {
    p.get(name + ".w").array().setZero();
    p.get(name + ".b").array().setZero();
}

} // namespace models

template <typename Scalar>
nn::ParamStore<Scalar> init_d2net(const D2NetConfig& cfg, std::uint64_t seed) {
    using namespace models;
    cfg.validate();
    const auto ch = cfg.effective_channels();
    ParamStore<Scalar> p(seed);
    add_conv(p, "head", ch[0], cfg.in_channels, 3);
    for (int s = 0; s < cfg.scales; ++s) {
        const auto S = std::to_string(s);
        if (s > 0) {
            add_conv(p, "down" + S, ch[s], ch[s - 1], 2);
            add_conv_transposed(p, "up" + S, ch[s], ch[s - 1], 2);
        }
        for (int b = 0; b < cfg.residual_blocks; ++b) {
            add_res_block(p, "enc" + S + ".res" + std::to_string(b), ch[s]);
            if (s + 1 < cfg.scales) {
                add_res_block(p, "dec" + S + ".res" + std::to_string(b), ch[s]);
            }
        }
    }
    add_conv(p, "tail", cfg.in_channels, ch[0], 3, kBranchGain);
    return p;
}

/// U-Net: stride-2 conv downsampling, residual blocks per scale, stride-2
/// transposed-conv upsampling with additive skips, 3x3 tail, optional global residual.
template <typename Scalar>
nn::Tensor<Scalar> d2net_forward(const nn::ParamStore<Scalar>& p, const D2NetConfig& cfg, const nn::Tensor<Scalar>& x) {
    using namespace models;
    const Shape xs = x.shape();
    if (xs.c != cfg.in_channels) {
        throw ContractError("d2net: input has " + std::to_string(xs.c) + " channels, model expects " +
                            std::to_string(cfg.in_channels));
    }
    if (xs.h % cfg.divisor() != 0 || xs.w % cfg.divisor() != 0) {
        throw ContractError("d2net: input " + std::to_string(xs.h) + "x" + std::to_string(xs.w) +
                            " is not divisible by " + std::to_string(cfg.divisor()));
    }
    std::vector<Tensor<Scalar>> skips;
    auto f = nn::relu(conv(p, "head", x));
    for (int s = 0; s < cfg.scales; ++s) {
        const auto S = std::to_string(s);
        if (s > 0) {
            f = nn::relu(conv(p, "down" + S, f, 2, 0));
        }
        for (int b = 0; b < cfg.residual_blocks; ++b) {
            f = res_block(p, "enc" + S + ".res" + std::to_string(b), f);
        }
        skips.push_back(f);
    }
    for (int s = cfg.scales - 1; s > 0; --s) {
        const auto S = std::to_string(s - 1);
        const auto& upw = p.get("up" + std::to_string(s) + ".w");
        const auto& upb = p.get("up" + std::to_string(s) + ".b");
        f = nn::add(nn::relu(nn::conv2d_transposed(f, upw, upb, 2, 0)), skips[static_cast<std::size_t>(s - 1)]);
        for (int b = 0; b < cfg.residual_blocks; ++b) {
            f = res_block(p, "dec" + S + ".res" + std::to_string(b), f);
        }
    }
    auto out = conv(p, "tail", f);
    return cfg.global_residual ? nn::add(x, out) : out;
}

template <typename Scalar>
nn::ParamStore<Scalar> init_rdfdbk(const RdfdbkConfig& cfg, std::uint64_t seed) {
    using namespace models;
    cfg.validate();
    const int F = cfg.feature_channels;
    ParamStore<Scalar> p(seed);
    add_conv(p, "extract", F, cfg.in_channels, 3);
    add_conv(p, "feedback", F, F, 1);
    for (int b = 0; b < cfg.residual_blocks; ++b) {
        add_res_block(p, "body.res" + std::to_string(b), F);
    }
    add_conv_transposed(p, "up", F, F, 2);
    add_conv(p, "recon", cfg.in_channels, F, 3, kBranchGain);
    return p;
}

/// Residual feedback x2 upsampler; the same body weights are applied at every time step.
template <typename Scalar>
nn::Tensor<Scalar> rdfdbk_forward(const nn::ParamStore<Scalar>& p, const RdfdbkConfig& cfg,
                                  const nn::Tensor<Scalar>& x) {
    using namespace models;
    const Shape xs = x.shape();
    if (xs.c != cfg.in_channels) {
        throw ContractError("rdfdbk: input has " + std::to_string(xs.c) + " channels, model expects " +
                            std::to_string(cfg.in_channels));
    }
    const auto feat = nn::relu(conv(p, "extract", x));
    auto h = Tensor<Scalar>::zeros(feat.shape());
    for (int t = 0; t < cfg.time_steps; ++t) {
        h = nn::add(feat, conv(p, "feedback", h, 1, 0));
        for (int b = 0; b < cfg.residual_blocks; ++b) {
            h = res_block(p, "body.res" + std::to_string(b), h);
        }
    }
    const auto up = nn::relu(nn::conv2d_transposed(h, p.get("up.w"), p.get("up.b"), 2, 0));
    return nn::add(nn::upsample_nearest2(x), conv(p, "recon", up));
}

/// Structure recovered from parameter shapes; non-structural settings
/// (global_residual, time_steps) come from `base`.
D2NetConfig infer_d2net_config(const nn::ParamStore<float>& p, D2NetConfig base = {});
RdfdbkConfig infer_rdfdbk_config(const nn::ParamStore<float>& p, RdfdbkConfig base = {});

/// Random init with the residual head zeroed: d2net becomes the identity
/// (with global residual), rdfdbk becomes nearest-neighbour x2.
nn::ParamStore<float> identity_d2net(const D2NetConfig& cfg, std::uint64_t seed = 0);
nn::ParamStore<float> identity_rdfdbk(const RdfdbkConfig& cfg, std::uint64_t seed = 0);

} // namespace d3net
