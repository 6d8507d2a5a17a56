#include "d3net/wavelet.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>

namespace d3net {
namespace {

using ComplexBand = Band<std::complex<double>>;

ComplexBand fft2(const ComplexBand& in, bool inverse) {
    Eigen::FFT<double> fft;
    ComplexBand out(in.rows(), in.cols());
    Eigen::VectorXcd src, dst;
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
        src = in.row(r).transpose();
        if (inverse) {
            fft.inv(dst, src);
        } else {
            fft.fwd(dst, src);
        }
        out.row(r) = dst.transpose();
    }
    for (Eigen::Index c = 0; c < in.cols(); ++c) {
        src = out.col(c);
        if (inverse) {
            fft.inv(dst, src);
        } else {
            fft.fwd(dst, src);
        }
        out.col(c) = dst;
    }
    return out;
}

double principal(double v, Eigen::Index n) {
    const double nd = static_cast<double>(n);
    while (v > nd / 2.0) v -= nd;
    while (v < -nd / 2.0) v += nd;
    return v;
}

} // namespace

WaveletFamily parse_wavelet_family(const std::string& name) {
    if (name == "haar") return WaveletFamily::haar;
    if (name == "db2") return WaveletFamily::db2;
    throw ContractError("unknown wavelet family '" + name + "' (expected haar or db2)");
}

std::string to_string(WaveletFamily family) {
    return family == WaveletFamily::haar ? "haar" : "db2";
}

std::string to_string(Orientation orientation) {
    switch (orientation) {
    case Orientation::LH: return "LH";
    case Orientation::HL: return "HL";
    case Orientation::HH: return "HH";
    }
    return "?";
}

ShiftEstimate estimate_shift(const Plane& reference, const Plane& moving) {
    if (reference.rows() != moving.rows() || reference.cols() != moving.cols()) {
        throw ContractError("estimate_shift: band dimensions differ");
    }
    if (std::min(reference.rows(), reference.cols()) < 8) {
        throw ContractError("estimate_shift: bands must be at least 8x8");
    }
    const Eigen::Index h = reference.rows();
    const Eigen::Index w = reference.cols();

    const Plane ref = reference.array() - reference.mean();
    const Plane mov = moving.array() - moving.mean();
    if (ref.squaredNorm() < 1e-20 || mov.squaredNorm() < 1e-20) {
        return {};
    }

    const ComplexBand f_ref = fft2(ref.cast<std::complex<double>>(), false);
    const ComplexBand f_mov = fft2(mov.cast<std::complex<double>>(), false);
    ComplexBand cross = f_mov.cwiseProduct(f_ref.conjugate());
    const double max_mag = cross.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < cross.size(); ++i) {
        const double mag = std::abs(cross.data()[i]);
        cross.data()[i] = mag > 1e-12 * max_mag ? cross.data()[i] / mag : std::complex<double>(0.0);
    }
    const Plane corr = fft2(cross, true).real();

    Eigen::Index py = 0, px = 0;
    const double peak = corr.maxCoeff(&py, &px);
    const double energy = corr.norm();
    if (!(energy > 0.0) || !(peak > 0.0)) {
        return {};
    }

    // 3x3 centroid with circular neighbours. Sidelobes far below the peak are
    // numerical noise and would perturb exact integer shifts.
    double sum = 0.0, sy = 0.0, sx = 0.0;
    for (int oy = -1; oy <= 1; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
            const Eigen::Index y = (py + oy + h) % h;
            const Eigen::Index x = (px + ox + w) % w;
            double v = corr(y, x);
            if (v < 1e-6 * peak) {
                v = 0.0;
            }
            sum += v;
            sy += v * oy;
            sx += v * ox;
        }
    }

    ShiftEstimate est;
    est.dy = principal(static_cast<double>(py) + sy / sum, h);
    est.dx = principal(static_cast<double>(px) + sx / sum, w);
    est.confidence = std::clamp(peak / energy, 0.0, 1.0);
    return est;
}

ShiftedBand apply_shift(const Plane& channel, double dy, double dx) {
    const Eigen::Index h = channel.rows();
    const Eigen::Index w = channel.cols();
    if (std::abs(dy) >= std::min(h, w) / 2.0 || std::abs(dx) >= std::min(h, w) / 2.0) {
        throw ContractError("apply_shift: shift exceeds half the band size");
    }
    ShiftedBand out{Plane(h, w), Plane(h, w)};

    auto axis = [](double src, Eigen::Index n, Eigen::Index& i0, Eigen::Index& i1, double& frac, bool& inside) {
        const double base = std::floor(src);
        frac = src - base;
        const auto b = static_cast<Eigen::Index>(base);
        inside = b >= 0 && b < n && (frac == 0.0 || b + 1 < n);
        i0 = std::clamp<Eigen::Index>(b, 0, n - 1);
        i1 = std::clamp<Eigen::Index>(b + 1, 0, n - 1);
    };

    for (Eigen::Index y = 0; y < h; ++y) {
        Eigen::Index y0, y1;
        double fy;
        bool in_y;
        axis(static_cast<double>(y) + dy, h, y0, y1, fy, in_y);
        for (Eigen::Index x = 0; x < w; ++x) {
            Eigen::Index x0, x1;
            double fx;
            bool in_x;
            axis(static_cast<double>(x) + dx, w, x0, x1, fx, in_x);
            const double top = (1.0 - fx) * channel(y0, x0) + fx * channel(y0, x1);
            const double bottom = (1.0 - fx) * channel(y1, x0) + fx * channel(y1, x1);
            out.values(y, x) = (1.0 - fy) * top + fy * bottom;
            out.mask(y, x) = (in_y && in_x) ? 1.0 : 0.0;
        }
    }
    return out;
}

Plane circshift(const Plane& in, int dy, int dx) {
    const Eigen::Index h = in.rows();
    const Eigen::Index w = in.cols();
    Plane out(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        const Eigen::Index sy = ((y - dy) % h + h) % h;
        for (Eigen::Index x = 0; x < w; ++x) {
            out(y, x) = in(sy, ((x - dx) % w + w) % w);
        }
    }
    return out;
}

} // namespace d3net
