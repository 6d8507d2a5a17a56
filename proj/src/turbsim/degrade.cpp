#include "d3net/turbsim.hpp"

#include "d3net/random.hpp"

#include <algorithm>
#include <cmath>

namespace d3net {
namespace {

Plane white_noise(Eigen::Index h, Eigen::Index w, RandomStream& rng) {
    Plane p(h, w);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p.data()[i] = rng.normal();
    }
    return p;
}

// "Valid" separable correlation: output shrinks by 2r in both directions.
Plane convolve_valid(const Plane& in, const std::vector<double>& k) {
    const auto taps = static_cast<Eigen::Index>(k.size());
    const Eigen::Map<const Eigen::VectorXd> kern(k.data(), taps);
    const Eigen::Index oh = in.rows() - taps + 1;
    const Eigen::Index ow = in.cols() - taps + 1;
    Plane horiz(in.rows(), ow);
    for (Eigen::Index x = 0; x < ow; ++x) {
        horiz.col(x) = in.middleCols(x, taps) * kern;
    }
    Plane out(oh, ow);
    for (Eigen::Index y = 0; y < oh; ++y) {
        out.row(y) = kern.transpose() * horiz.middleRows(y, taps);
    }
    return out;
}

double bilinear_clamped(const Eigen::Ref<const Plane>& src, double y, double x) {
    const Eigen::Index h = src.rows();
    const Eigen::Index w = src.cols();
    const double fy0 = std::floor(y);
    const double fx0 = std::floor(x);
    const double fy = y - fy0;
    const double fx = x - fx0;
    auto cy = [h](double v) { return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(v), 0, h - 1); };
    auto cx = [w](double v) { return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(v), 0, w - 1); };
    const Eigen::Index y0 = cy(fy0), y1 = cy(fy0 + 1);
    const Eigen::Index x0 = cx(fx0), x1 = cx(fx0 + 1);
    return (1.0 - fy) * ((1.0 - fx) * src(y0, x0) + fx * src(y0, x1)) +
           fy * ((1.0 - fx) * src(y1, x0) + fx * src(y1, x1));
}

} // namespace

void DegradationParams::validate() const {
    if (!(tilt_sigma >= 0.0) || !(blur_sigma >= 0.0) || !(noise_sigma >= 0.0)) {
        throw ContractError("degradation params: sigmas must be >= 0");
    }
    if (!(tilt_corr >= 1.0)) {
        throw ContractError("degradation params: tilt_corr must be >= 1");
    }
    if (frames < 1) {
        throw ContractError("degradation params: frames must be >= 1");
    }
}

void to_json(nlohmann::json& j, const DegradationParams& p) {
    j = nlohmann::json{{"tilt_sigma", p.tilt_sigma}, {"tilt_corr", p.tilt_corr}, {"blur_sigma", p.blur_sigma},
                       {"noise_sigma", p.noise_sigma}, {"frames", p.frames},       {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, DegradationParams& p) {
    p.tilt_sigma = j.at("tilt_sigma").get<double>();
    p.tilt_corr = j.at("tilt_corr").get<double>();
    p.blur_sigma = j.at("blur_sigma").get<double>();
    p.noise_sigma = j.at("noise_sigma").get<double>();
    p.frames = j.at("frames").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) {
        return {1.0};
    }
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (auto& v : k) {
        v /= sum;
    }
    return k;
}

Plane gaussian_blur(const Plane& in, double sigma) {
    if (!(sigma > 0.0)) {
        return in;
    }
    const auto k = gaussian_kernel(sigma);
    const auto r = static_cast<Eigen::Index>(k.size() / 2);
    const Eigen::Index h = in.rows();
    const Eigen::Index w = in.cols();
    Plane padded(h + 2 * r, w + 2 * r);
    for (Eigen::Index y = 0; y < padded.rows(); ++y) {
        const Eigen::Index sy = std::clamp<Eigen::Index>(y - r, 0, h - 1);
        for (Eigen::Index x = 0; x < padded.cols(); ++x) {
            padded(y, x) = in(sy, std::clamp<Eigen::Index>(x - r, 0, w - 1));
        }
    }
    return convolve_valid(padded, k);
}

TiltField sample_tilt_field(int h, int w, const DegradationParams& params, std::uint64_t frame_index) {
    params.validate();
    TiltField field{Plane::Zero(h, w), Plane::Zero(h, w)};
    if (params.tilt_sigma == 0.0) {
        return field;
    }
    // Noise is drawn on a padded domain so the valid convolution is stationary
    // up to the border; the kernel's L2 norm fixes the output variance.
    const auto k = gaussian_kernel(params.tilt_corr);
    const auto r = static_cast<Eigen::Index>(k.size() / 2);
    double k2 = 0.0;
    for (double v : k) {
        k2 += v * v;
    }
    const double scale = params.tilt_sigma / k2; // 2-D kernel norm is k2 (outer product)

    RandomStream ry(params.seed, frame_index, 0, StreamTag::tilt_y);
    RandomStream rx(params.seed, frame_index, 0, StreamTag::tilt_x);
    field.dy = scale * convolve_valid(white_noise(h + 2 * r, w + 2 * r, ry), k);
    field.dx = scale * convolve_valid(white_noise(h + 2 * r, w + 2 * r, rx), k);
    return field;
}

Image degrade_frame(const Image& clean, const DegradationParams& params, std::uint64_t frame_index) {
    params.validate();
    Image out = clean;
    const int h = clean.height();
    const int w = clean.width();

    if (params.tilt_sigma > 0.0) {
        const auto tilt = sample_tilt_field(h, w, params, frame_index);
        for (int c = 0; c < clean.channels(); ++c) {
            const auto src = clean.plane(c);
            auto dst = out.plane(c);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    dst(y, x) = bilinear_clamped(src, y + tilt.dy(y, x), x + tilt.dx(y, x));
                }
            }
        }
    }
    if (params.blur_sigma > 0.0) {
        for (int c = 0; c < out.channels(); ++c) {
            out.plane(c) = gaussian_blur(out.plane(c), params.blur_sigma);
        }
    }
    if (params.noise_sigma > 0.0) {
        RandomStream rng(params.seed, frame_index, 0, StreamTag::noise);
        for (Eigen::Index i = 0; i < out.data().size(); ++i) {
            out.data().data()[i] += params.noise_sigma * rng.normal();
        }
    }
    return clamp01(std::move(out));
}

std::uint64_t image_seed(std::uint64_t seed, std::uint64_t image_index) {
    return mix_key({seed, image_index});
}

DegradationParams jitter_params(const DegradationParams& base, std::uint64_t image_index, std::uint64_t variation) {
    RandomStream rng(base.seed, image_index, variation, StreamTag::jitter);
    DegradationParams p = base;
    p.tilt_sigma *= rng.uniform(0.5, 1.5);
    p.blur_sigma *= rng.uniform(0.5, 1.5);
    p.noise_sigma *= rng.uniform(0.5, 1.5);
    p.seed = image_seed(base.seed, image_index);
    return p;
}

Image synthesize_scene(int h, int w, std::uint64_t seed, int channels) {
    RandomStream rng(seed, 0, 0, StreamTag::scene);
    Plane base(h, w);
    const double b0 = rng.uniform(0.6, 0.8);
    const double gy = rng.uniform(-0.15, 0.15);
    const double gx = rng.uniform(-0.15, 0.15);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            base(y, x) = b0 + gy * (y / static_cast<double>(h) - 0.5) + gx * (x / static_cast<double>(w) - 0.5);
        }
    }

    // soft blobs
    const int blobs = 4 + static_cast<int>(rng.index(5));
    for (int i = 0; i < blobs; ++i) {
        const double cy = rng.uniform(0, h);
        const double cx = rng.uniform(0, w);
        const double radius = rng.uniform(3.0, std::max(4.0, std::min(h, w) / 5.0));
        const double amp = rng.uniform(-0.25, 0.25);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (radius * radius);
                if (d2 < 1.0) {
                    base(y, x) += amp * (1.0 - d2);
                }
            }
        }
    }

    // lines of glyph-like strokes
    const int cell = std::max(6, std::min(h, w) / 12);
    for (int row = cell / 2; row + cell < h; row += cell + cell / 2) {
        for (int col = cell / 2; col + cell < w; col += cell) {
            if (rng.uniform() < 0.2) {
                continue; // word gap
            }
            const double ink = rng.uniform(0.05, 0.3);
            const int strokes = 2 + static_cast<int>(rng.index(3));
            for (int s = 0; s < strokes; ++s) {
                const bool horizontal = rng.uniform() < 0.5;
                const int thick = 1 + static_cast<int>(rng.index(2));
                const int off = static_cast<int>(rng.index(static_cast<std::uint64_t>(cell - thick)));
                const int len0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(cell / 2)));
                const int len1 = cell - 1 - static_cast<int>(rng.index(static_cast<std::uint64_t>(cell / 3)));
                for (int a = len0; a <= len1; ++a) {
                    for (int t = 0; t < thick; ++t) {
                        const int y = row + (horizontal ? off + t : a);
                        const int x = col + (horizontal ? a : off + t);
                        if (y < h && x < w) {
                            base(y, x) = ink;
                        }
                    }
                }
            }
        }
    }

    Image img(channels, h, w);
    for (int c = 0; c < channels; ++c) {
        const double tint = channels == 1 ? 1.0 : rng.uniform(0.85, 1.1);
        img.plane(c) = (tint * base).cwiseMax(0.0).cwiseMin(1.0);
    }
    return img;
}

} // namespace d3net
