#include "d3net/fusion.hpp"

#include "d3net/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace d3net {
namespace {

void check_same_dims(std::span<const Plane> fields, const char* what) {
    for (const auto& f : fields) {
        if (f.rows() != fields.front().rows() || f.cols() != fields.front().cols()) {
            throw ContractError(std::string(what) + ": field dimensions differ");
        }
    }
}

// Largest |shift| apply_shift accepts for a band, with a pixel of margin.
double max_shift(const Plane& p) { return std::min(p.rows(), p.cols()) / 2.0 - 1.0; }

} // namespace

Plane temporal_median(std::span<const Plane> frames) {
    if (frames.empty()) {
        throw ContractError("temporal_median: no frames");
    }
    check_same_dims(frames, "temporal_median");
    const Eigen::Index n = frames.front().size();
    Plane out(frames.front().rows(), frames.front().cols());
    std::vector<double> values(frames.size());
    const std::size_t mid = frames.size() / 2;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < frames.size(); ++k) {
            values[k] = frames[k].data()[i];
        }
        std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
        double m = values[mid];
        if (frames.size() % 2 == 0) {
            m = 0.5 * (m + *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid)));
        }
        out.data()[i] = m;
    }
    return out;
}

Plane box_mean(const Plane& field, int roi_size) {
    const Eigen::Index h = field.rows();
    const Eigen::Index w = field.cols();
    const int r = roi_size / 2;
    // summed-area table with a zero border row/column
    Plane sat = Plane::Zero(h + 1, w + 1);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            sat(y + 1, x + 1) = field(y, x) + sat(y, x + 1) + sat(y + 1, x) - sat(y, x);
        }
    }
    Plane out(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        const Eigen::Index y0 = std::max<Eigen::Index>(0, y - r);
        const Eigen::Index y1 = std::min<Eigen::Index>(h, y + r + 1);
        for (Eigen::Index x = 0; x < w; ++x) {
            const Eigen::Index x0 = std::max<Eigen::Index>(0, x - r);
            const Eigen::Index x1 = std::min<Eigen::Index>(w, x + r + 1);
            const double sum = sat(y1, x1) - sat(y0, x1) - sat(y1, x0) + sat(y0, x0);
            out(y, x) = sum / static_cast<double>((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

Plane local_detail_energy(const Plane& frame, int roi_size) {
    const auto pyr = dwt2_forward(frame, 1, WaveletFamily::haar);
    const Plane energy = pyr.detail(1, Orientation::LH).cwiseAbs2() + pyr.detail(1, Orientation::HL).cwiseAbs2() +
                         pyr.detail(1, Orientation::HH).cwiseAbs2();
    Plane full(frame.rows(), frame.cols());
    for (Eigen::Index y = 0; y < full.rows(); ++y) {
        for (Eigen::Index x = 0; x < full.cols(); ++x) {
            full(y, x) = energy(y / 2, x / 2);
        }
    }
    return box_mean(full, roi_size);
}

std::vector<Plane> compute_similarity(std::span<const Plane> frames, const Plane& reference_stat, int roi_size,
                                      double sigma) {
    if (roi_size < 3 || roi_size % 2 == 0) {
        throw ContractError("compute_similarity: roi_size must be odd and >= 3");
    }
    if (!(sigma > 0.0)) {
        throw ContractError("compute_similarity: sigma must be positive");
    }
    if (frames.empty()) {
        return {};
    }
    check_same_dims(frames, "compute_similarity");
    const Eigen::Index h = frames.front().rows();
    const Eigen::Index w = frames.front().cols();
    if (reference_stat.rows() != h || reference_stat.cols() != w) {
        throw ContractError("compute_similarity: reference statistic dimensions differ");
    }
    if (frames.size() < 2) {
        return std::vector<Plane>(frames.size(), Plane::Ones(h, w));
    }

    std::vector<Plane> deviation(frames.size());
    std::vector<Plane> energy(frames.size());
    parallel_for(frames.size(), [&](std::size_t k) {
        deviation[k] = box_mean((frames[k] - reference_stat).cwiseAbs(), roi_size);
        energy[k] = local_detail_energy(frames[k], roi_size);
    });

    Plane max_energy = energy.front();
    for (const auto& e : energy) {
        max_energy = max_energy.cwiseMax(e);
    }

    std::vector<Plane> similarity(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        Plane s(h, w);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double m = max_energy.data()[i];
            const double sharp = m > 0.0 ? energy[k].data()[i] / m : 1.0;
            s.data()[i] = std::exp(-deviation[k].data()[i] / sigma) * sharp;
        }
        similarity[k] = std::move(s);
    }
    return similarity;
}

std::vector<Plane> compute_boundary(std::span<const ShiftEstimate> shifts, std::span<const Plane> masks) {
    if (!shifts.empty() && shifts.size() != masks.size()) {
        throw ContractError("compute_boundary: one shift per mask expected");
    }
    check_same_dims(masks, "compute_boundary");
    std::vector<Plane> out;
    out.reserve(masks.size());
    for (const auto& mask : masks) {
        const Eigen::Index h = mask.rows();
        const Eigen::Index w = mask.cols();
        Plane eroded = Plane::Zero(h, w);
        for (Eigen::Index y = 1; y + 1 < h; ++y) {
            for (Eigen::Index x = 1; x + 1 < w; ++x) {
                eroded(y, x) = mask.block(y - 1, x - 1, 3, 3).minCoeff() > 0.0 ? 1.0 : 0.0;
            }
        }
        out.push_back(std::move(eroded));
    }
    return out;
}

PriorityResult compute_priority(std::span<const Plane> similarity, std::span<const Plane> boundary) {
    if (similarity.size() != boundary.size() || similarity.empty()) {
        throw ContractError("compute_priority: need one boundary field per similarity field");
    }
    check_same_dims(similarity, "compute_priority");
    check_same_dims(boundary, "compute_priority");
    if (similarity.front().rows() != boundary.front().rows() || similarity.front().cols() != boundary.front().cols()) {
        throw ContractError("compute_priority: similarity and boundary dimensions differ");
    }

    const std::size_t n = similarity.size();
    PriorityResult result;
    for (std::size_t k = 0; k < n; ++k) {
        result.priority.push_back(similarity[k].cwiseProduct(boundary[k]));
        result.weights.emplace_back(similarity[k].rows(), similarity[k].cols());
    }
    const Eigen::Index size = similarity.front().size();
    for (Eigen::Index i = 0; i < size; ++i) {
        double sum = 0.0;
        int valid = 0;
        for (std::size_t k = 0; k < n; ++k) {
            sum += result.priority[k].data()[i];
            valid += boundary[k].data()[i] > 0.0 ? 1 : 0;
        }
        for (std::size_t k = 0; k < n; ++k) {
            double w;
            if (sum > 1e-12) {
                w = result.priority[k].data()[i] / sum;
            } else if (valid > 0) {
                w = boundary[k].data()[i] > 0.0 ? 1.0 / valid : 0.0;
            } else {
                w = 1.0 / static_cast<double>(n);
            }
            result.weights[k].data()[i] = w;
        }
    }
    return result;
}

Plane block_mean_downsample(const Plane& field, int level) {
    if (level == 0) {
        return field;
    }
    const Eigen::Index block = Eigen::Index{1} << level;
    const Eigen::Index h = field.rows();
    const Eigen::Index w = field.cols();
    Plane out(band_extent(static_cast<int>(h), level), band_extent(static_cast<int>(w), level));
    for (Eigen::Index by = 0; by < out.rows(); ++by) {
        const Eigen::Index y0 = by * block;
        const Eigen::Index bh = std::min(block, h - y0);
        for (Eigen::Index bx = 0; bx < out.cols(); ++bx) {
            const Eigen::Index x0 = bx * block;
            const Eigen::Index bw = std::min(block, w - x0);
            out(by, bx) = field.block(y0, x0, bh, bw).mean();
        }
    }
    return out;
}

WaveletPyramid<double> fuse_pyramids(std::span<const WaveletPyramid<double>> pyramids, std::span<const Plane> weights) {
    if (pyramids.empty() || pyramids.size() != weights.size()) {
        throw ContractError("fuse_pyramids: need one weight field per pyramid");
    }
    const auto& first = pyramids.front();
    for (const auto& p : pyramids) {
        validate_pyramid(p);
        if (p.levels != first.levels || p.source_rows != first.source_rows || p.source_cols != first.source_cols ||
            p.family != first.family) {
            throw ContractError("fuse_pyramids: pyramid structures differ");
        }
    }
    for (const auto& w : weights) {
        if (w.rows() != first.source_rows || w.cols() != first.source_cols) {
            throw ContractError("fuse_pyramids: weight field dimensions differ from the source");
        }
    }

    WaveletPyramid<double> fused = first;
    fused.approx.setZero();
    for (auto& d : fused.details) {
        d.coeffs.setZero();
    }
    for (std::size_t k = 0; k < pyramids.size(); ++k) {
        for (int level = 1; level <= first.levels; ++level) {
            const Plane wl = block_mean_downsample(weights[k], level);
            for (int o = 0; o < 3; ++o) {
                const auto orient = static_cast<Orientation>(o);
                fused.detail(level, orient) += wl.cwiseProduct(pyramids[k].detail(level, orient));
            }
            if (level == first.levels) {
                fused.approx += wl.cwiseProduct(pyramids[k].approx);
            }
        }
    }
    return fused;
}

FusedResult fuse_sequence(const FrameSequence& seq, const FusionOptions& options) {
    seq.validate();
    const std::size_t n = seq.frames.size();
    const std::size_t ref_index = seq.middle_index();
    const int channels = seq.frames.front().channels();

    FusedResult result;
    result.shifts.resize(n);
    result.registered.resize(n);

    std::vector<Plane> luma(n);
    std::vector<Plane> masks(n);
    const Plane ref_luma = seq.frames[ref_index].luminance();

    // register every frame onto the middle one
    parallel_for(n, [&](std::size_t k) {
        const Image& frame = seq.frames[k];
        ShiftEstimate est;
        if (options.register_frames && k != ref_index) {
            est = estimate_shift(ref_luma, frame.luminance());
            const double limit = max_shift(ref_luma);
            if (std::abs(est.dy) > limit || std::abs(est.dx) > limit) {
                est = {};
            }
        }
        Image reg(channels, frame.height(), frame.width());
        Plane mask = Plane::Ones(frame.height(), frame.width());
        for (int c = 0; c < channels; ++c) {
            auto shifted = apply_shift(frame.plane(c), est.dy, est.dx);
            reg.plane(c) = shifted.values;
            if (c == 0) {
                mask = std::move(shifted.mask);
            }
        }
        result.shifts[k] = est;
        luma[k] = reg.luminance();
        masks[k] = std::move(mask);
        result.registered[k] = std::move(reg);
    });

    FusionMaps& maps = result.maps;
    maps.roi_size = options.roi_size;
    const Plane median = temporal_median(luma);
    maps.similarity = compute_similarity(luma, median, options.roi_size, options.similarity_sigma);
    maps.boundary = compute_boundary(result.shifts, masks);
    auto priority = compute_priority(maps.similarity, maps.boundary);
    maps.priority = std::move(priority.priority);
    maps.weights = std::move(priority.weights);
    if (options.weight_hook) {
        options.weight_hook(maps);
    }

    std::vector<Plane> full_planes(static_cast<std::size_t>(channels));
    std::vector<Plane> approx_planes(static_cast<std::size_t>(channels));
    result.fused_pyramids.resize(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        std::vector<WaveletPyramid<double>> pyramids(n);
        parallel_for(n, [&](std::size_t k) {
            pyramids[k] = dwt2_forward(result.registered[k].plane(c), options.levels, options.family);
        });
        auto fused = fuse_pyramids(pyramids, maps.weights);
        full_planes[static_cast<std::size_t>(c)] = dwt2_inverse(fused);
        // The level-1 approximation carries a DC gain of 2 for both families.
        approx_planes[static_cast<std::size_t>(c)] = (0.5 * dwt2_reconstruct_to(fused, 1)).cwiseMax(0.0).cwiseMin(1.0);
        result.fused_pyramids[static_cast<std::size_t>(c)] = std::move(fused);
    }
    result.fused_full = Image::from_planes(full_planes);
    result.fused_approx = Image::from_planes(approx_planes);
    return result;
}

Image frame_average(const FrameSequence& seq) {
    seq.validate();
    Image out = seq.frames.front();
    for (std::size_t k = 1; k < seq.frames.size(); ++k) {
        out.data() += seq.frames[k].data();
    }
    out.data() /= static_cast<double>(seq.frames.size());
    return out;
}

void dump_fusion(const FusedResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& maps = result.maps;
    for (std::size_t k = 0; k < maps.weights.size(); ++k) {
        const std::string idx = std::to_string(k);
        save_pfm(Image::from_plane(maps.similarity[k]), dir / ("similarity_" + idx + ".pfm"));
        save_pfm(Image::from_plane(maps.boundary[k]), dir / ("boundary_" + idx + ".pfm"));
        save_pfm(Image::from_plane(maps.priority[k]), dir / ("priority_" + idx + ".pfm"));
        save_pfm(Image::from_plane(maps.weights[k]), dir / ("weight_" + idx + ".pfm"));
    }
    for (std::size_t c = 0; c < result.fused_pyramids.size(); ++c) {
        const auto& pyr = result.fused_pyramids[c];
        const std::string ch = "c" + std::to_string(c);
        save_pfm(Image::from_plane(pyr.approx), dir / ("band_" + ch + "_approx.pfm"));
        for (const auto& d : pyr.details) {
            save_pfm(Image::from_plane(d.coeffs),
                     dir / ("band_" + ch + "_L" + std::to_string(d.level) + "_" + to_string(d.orientation) + ".pfm"));
        }
    }
}

} // namespace d3net
