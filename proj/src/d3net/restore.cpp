#include "d3net/d3net/pipeline.hpp"

#include "d3net/parallel.hpp"

namespace d3net {
namespace {

int reflect_index(int i, int n) {
    if (n == 1) {
        return 0;
    }
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ContractError& e) {
        throw ContractError(std::string("restore[") + name + "]: " + e.what());
    }
}

Image crop(const Image& img, int h, int w) {
    Image out(img.channels(), h, w);
    for (int c = 0; c < img.channels(); ++c) {
        out.plane(c) = img.plane(c).topLeftCorner(h, w);
    }
    return out;
}

} // namespace

nn::Tensor<float> image_to_tensor(const Image& img) {
    std::vector<float> values(img.size());
    const double* src = img.data().data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<float>(src[i]);
    }
    return nn::Tensor<float>::from({1, img.channels(), img.height(), img.width()}, std::move(values));
}

Image tensor_to_image(const nn::Tensor<float>& t, int n) {
    const nn::Shape s = t.shape();
    Image img(s.c, s.h, s.w);
    const std::size_t len = static_cast<std::size_t>(s.c) * s.h * s.w;
    const float* src = t.data().data() + static_cast<std::size_t>(n) * len;
    double* dst = img.data().data();
    for (std::size_t i = 0; i < len; ++i) {
        dst[i] = src[i];
    }
    return img;
}

Plane reflect_pad(const Plane& in, int divisor) {
    const int h = static_cast<int>(in.rows());
    const int w = static_cast<int>(in.cols());
    const int ph = (h + divisor - 1) / divisor * divisor;
    const int pw = (w + divisor - 1) / divisor * divisor;
    if (ph == h && pw == w) {
        return in;
    }
    Plane out(ph, pw);
    for (int y = 0; y < ph; ++y) {
        const int sy = reflect_index(y, h);
        for (int x = 0; x < pw; ++x) {
            out(y, x) = in(sy, reflect_index(x, w));
        }
    }
    return out;
}

Image restore_from_approx(const Image& approx, int out_h, int out_w, const nn::ParamStore<float>& d2net,
                          const nn::ParamStore<float>& rdfdbk, const RestoreOptions& opts, Image* d2net_out) {
    const auto d2cfg = stage("d2net", [&] { return infer_d2net_config(d2net, opts.d2net); });
    const auto rdcfg = stage("rdfdbk", [&] { return infer_rdfdbk_config(rdfdbk, opts.rdfdbk); });
    if (out_h > 2 * approx.height() || out_w > 2 * approx.width()) {
        throw ContractError("restore[rdfdbk]: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                            " exceeds twice the approximation size");
    }
    const int in_c = d2cfg.in_channels;
    if (rdcfg.in_channels != in_c) {
        throw ContractError("restore[rdfdbk]: model expects " + std::to_string(rdcfg.in_channels) +
                            " channels but d2net produces " + std::to_string(in_c));
    }
    // Single-channel models run on each channel independently.
    std::vector<std::vector<int>> groups;
    if (in_c == approx.channels()) {
        groups.emplace_back();
        for (int c = 0; c < in_c; ++c) groups.back().push_back(c);
    } else if (in_c == 1) {
        for (int c = 0; c < approx.channels(); ++c) groups.push_back({c});
    } else {
        throw ContractError("restore[d2net]: model expects " + std::to_string(in_c) + " channels, image has " +
                            std::to_string(approx.channels()));
    }

    const int h = approx.height();
    const int w = approx.width();
    Image restored(approx.channels(), out_h, out_w);
    Image mid(approx.channels(), h, w);
    nn::NoGradGuard no_grad;
    for (const auto& group : groups) {
        std::vector<Plane> padded;
        for (int c : group) padded.push_back(reflect_pad(approx.plane(c), d2cfg.divisor()));
        const auto x = image_to_tensor(Image::from_planes(padded));
        const Image d2 = crop(tensor_to_image(stage("d2net", [&] { return d2net_forward(d2net, d2cfg, x); })), h, w);
        const Image up = tensor_to_image(stage("rdfdbk", [&] { return rdfdbk_forward(rdfdbk, rdcfg, image_to_tensor(d2)); }));
        for (std::size_t g = 0; g < group.size(); ++g) {
            const int c = group[g];
            mid.plane(c) = d2.plane(static_cast<int>(g));
            restored.plane(c) = up.plane(static_cast<int>(g)).topLeftCorner(out_h, out_w);
        }
    }
    if (d2net_out) {
        *d2net_out = std::move(mid);
    }
    return clamp01(std::move(restored));
}

RestoreResult restore(const FrameSequence& seq, const nn::ParamStore<float>& d2net, const nn::ParamStore<float>& rdfdbk,
                      const RestoreOptions& opts) {
    stage("input", [&] {
        seq.validate();
        return 0;
    });
    RestoreResult r;
    r.fusion = stage("fusion", [&] { return fuse_sequence(seq, opts.fusion); });
    r.fused_approx = r.fusion.fused_approx;
    const Image& first = seq.frames.front();
    r.restored = restore_from_approx(r.fused_approx, first.height(), first.width(), d2net, rdfdbk, opts, &r.d2net_out);
    return r;
}

void dump_intermediate(const RestoreResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_pfm(r.fusion.fused_full, dir / "fused.pfm");
    save_pfm(r.fused_approx, dir / "approx.pfm");
    save_pfm(r.d2net_out, dir / "d2net.pfm");
    dump_fusion(r.fusion, dir / "fusion");
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : pairs) {
        rows.push_back({{"id", p.id}, {"psnr", p.psnr}, {"ssim", p.ssim}});
    }
    return {{"format_version", 1}, {"pairs", rows}, {"mean_psnr", mean_psnr}, {"mean_ssim", mean_ssim}};
}

EvalReport evaluate(const std::vector<EvalPair>& pairs) {
    if (pairs.empty()) {
        throw ContractError("evaluate: no pairs");
    }
    EvalReport report;
    report.pairs.resize(pairs.size());
    for (const auto& p : pairs) {
        if (!p.restored.same_shape(p.truth)) {
            throw ContractError("evaluate: pair '" + p.id + "' has mismatched dimensions");
        }
    }
    parallel_for(pairs.size(), [&](std::size_t i) {
        report.pairs[i] = {pairs[i].id, psnr(pairs[i].restored, pairs[i].truth), ssim(pairs[i].restored, pairs[i].truth)};
    });
    for (const auto& m : report.pairs) {
        report.mean_psnr += m.psnr;
        report.mean_ssim += m.ssim;
    }
    report.mean_psnr /= static_cast<double>(pairs.size());
    report.mean_ssim /= static_cast<double>(pairs.size());
    return report;
}

} // namespace d3net
