#include "d3net/imagecore.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace d3net {
namespace {

struct Taps {
    std::array<int, 4> index{};
    std::array<double, 4> weight{};
    int count = 0;
};

double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) {
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    }
    if (t < 2.0) {
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    }
    return 0.0;
}

// 1-D sampling plan for every output coordinate, half-pixel-centre aligned.
std::vector<Taps> plan_axis(int in, int out, ResampleKernel kernel) {
    std::vector<Taps> plan(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    auto clamp = [in](int i) { return std::clamp(i, 0, in - 1); };
    for (int o = 0; o < out; ++o) {
        Taps& t = plan[static_cast<std::size_t>(o)];
        if (kernel == ResampleKernel::nearest) {
            t.index[0] = clamp(static_cast<int>(std::floor((o + 0.5) * scale)));
            t.weight[0] = 1.0;
            t.count = 1;
            continue;
        }
        const double src = (o + 0.5) * scale - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double frac = src - base;
        if (kernel == ResampleKernel::bilinear) {
            t.index = {clamp(base), clamp(base + 1), 0, 0};
            t.weight = {1.0 - frac, frac, 0.0, 0.0};
            t.count = 2;
        } else {
            for (int k = 0; k < 4; ++k) {
                t.index[k] = clamp(base - 1 + k);
                t.weight[k] = cubic_weight(frac - (k - 1));
            }
            t.count = 4;
        }
    }
    return plan;
}

} // namespace

Image resample(const Image& img, int new_h, int new_w, ResampleKernel kernel) {
    if (new_h < 1 || new_w < 1) {
        throw ContractError("resample: output dimensions must be positive");
    }
    const auto rows = plan_axis(img.height(), new_h, kernel);
    const auto cols = plan_axis(img.width(), new_w, kernel);

    Image out(img.channels(), new_h, new_w);
    for (int c = 0; c < img.channels(); ++c) {
        const Plane src = img.plane(c);
        Plane horiz(img.height(), new_w);
        for (int x = 0; x < new_w; ++x) {
            const Taps& t = cols[static_cast<std::size_t>(x)];
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(img.height());
            for (int k = 0; k < t.count; ++k) {
                acc += t.weight[k] * src.col(t.index[k]);
            }
            horiz.col(x) = acc;
        }
        auto dst = out.plane(c);
        for (int y = 0; y < new_h; ++y) {
            const Taps& t = rows[static_cast<std::size_t>(y)];
            Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(new_w);
            for (int k = 0; k < t.count; ++k) {
                acc += t.weight[k] * horiz.row(t.index[k]);
            }
            dst.row(y) = acc;
        }
    }
    return out;
}

} // namespace d3net
