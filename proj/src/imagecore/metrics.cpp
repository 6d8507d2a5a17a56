#include "d3net/imagecore.hpp"

#include <cmath>

namespace d3net {
namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

Eigen::VectorXd gaussian_window() {
    Eigen::VectorXd g(kSsimWindow);
    const int r = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - r;
        g(i) = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    }
    return g / g.sum();
}

// Separable "valid" correlation: output is (H-10) x (W-10).
Plane filter_valid(const Plane& src, const Eigen::VectorXd& g) {
    const Eigen::Index k = g.size();
    const Eigen::Index oh = src.rows() - k + 1;
    const Eigen::Index ow = src.cols() - k + 1;
    Plane horiz(src.rows(), ow);
    for (Eigen::Index x = 0; x < ow; ++x) {
        horiz.col(x) = src.middleCols(x, k) * g;
    }
    Plane out(oh, ow);
    for (Eigen::Index y = 0; y < oh; ++y) {
        out.row(y) = g.transpose() * horiz.middleRows(y, k);
    }
    return out;
}

} // namespace

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw ContractError("psnr: image dimensions differ");
    }
    const double mse = (a.data() - b.data()).squaredNorm() / static_cast<double>(a.size());
    if (mse < 1e-12) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw ContractError("ssim: image dimensions differ");
    }
    if (std::min(a.height(), a.width()) < kSsimWindow) {
        throw ContractError("ssim: image smaller than the 11x11 window");
    }
    const Plane x = a.luminance();
    const Plane y = b.luminance();
    const auto g = gaussian_window();

    const Plane mu_x = filter_valid(x, g);
    const Plane mu_y = filter_valid(y, g);
    const Plane xx = filter_valid(x.cwiseProduct(x), g);
    const Plane yy = filter_valid(y.cwiseProduct(y), g);
    const Plane xy = filter_valid(x.cwiseProduct(y), g);

    const double c1 = kSsimK1 * kSsimK1;
    const double c2 = kSsimK2 * kSsimK2;

    const auto mxx = mu_x.array().square();
    const auto myy = mu_y.array().square();
    const auto mxy = mu_x.array() * mu_y.array();
    const auto var_x = xx.array() - mxx;
    const auto var_y = yy.array() - myy;
    const auto cov = xy.array() - mxy;

    const Eigen::ArrayXXd map = ((2.0 * mxy + c1) * (2.0 * cov + c2)) /
                                ((mxx + myy + c1) * (var_x + var_y + c2));
    return map.mean();
}

} // namespace d3net
