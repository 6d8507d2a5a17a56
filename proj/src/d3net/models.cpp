#include "d3net/d3net/models.hpp"

namespace d3net {
namespace {

int count_blocks(const nn::ParamStore<float>& p, const std::string& prefix) {
    int b = 0;
    while (p.contains(prefix + std::to_string(b) + ".conv1.w")) {
        ++b;
    }
    return b;
}

void require(const nn::ParamStore<float>& p, const std::string& name, const char* model) {
    if (!p.contains(name)) {
        throw ContractError(std::string(model) + " parameters: missing '" + name + "'");
    }
}

} // namespace

D2NetConfig infer_d2net_config(const nn::ParamStore<float>& p, D2NetConfig base) {
    require(p, "head.w", "d2net");
    require(p, "tail.w", "d2net");
    D2NetConfig cfg = base;
    cfg.width_multiplier = 1.0;
    cfg.in_channels = p.get("head.w").shape().c;
    cfg.channels = {p.get("head.w").shape().n};
    while (p.contains("down" + std::to_string(cfg.channels.size()) + ".w")) {
        cfg.channels.push_back(p.get("down" + std::to_string(cfg.channels.size()) + ".w").shape().n);
    }
    cfg.scales = static_cast<int>(cfg.channels.size());
    cfg.residual_blocks = count_blocks(p, "enc0.res");
    cfg.validate();
    return cfg;
}

RdfdbkConfig infer_rdfdbk_config(const nn::ParamStore<float>& p, RdfdbkConfig base) {
    require(p, "extract.w", "rdfdbk");
    require(p, "recon.w", "rdfdbk");
    RdfdbkConfig cfg = base;
    cfg.in_channels = p.get("extract.w").shape().c;
    cfg.feature_channels = p.get("extract.w").shape().n;
    cfg.residual_blocks = count_blocks(p, "body.res");
    cfg.validate();
    return cfg;
}

nn::ParamStore<float> identity_d2net(const D2NetConfig& cfg, std::uint64_t seed) {
    auto p = init_d2net<float>(cfg, seed);
    models::zero_layer(p, "tail");
    return p;
}

nn::ParamStore<float> identity_rdfdbk(const RdfdbkConfig& cfg, std::uint64_t seed) {
    auto p = init_rdfdbk<float>(cfg, seed);
    models::zero_layer(p, "recon");
    return p;
}

} // namespace d3net
