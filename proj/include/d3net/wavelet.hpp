#pragma once

#include "d3net/imagecore.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace d3net {

enum class WaveletFamily { haar, db2 };

/// LH: low-pass along rows, high-pass along columns (horizontal edges).
/// HL: high-pass along rows, low-pass along columns (vertical edges).
/// HH: high-pass along both.
enum class Orientation { LH, HL, HH };

WaveletFamily parse_wavelet_family(const std::string& name);
std::string to_string(WaveletFamily family);
std::string to_string(Orientation orientation);

template <typename Scalar>
struct DetailBand {
    int level = 1;
    Orientation orientation = Orientation::LH;
    Band<Scalar> coeffs;
};

/// Multi-level 2-D decomposition. Details are ordered by level (finest first),
/// then LH, HL, HH inside each level.
template <typename Scalar>
struct WaveletPyramid {
    int levels = 0;
    Band<Scalar> approx;
    std::vector<DetailBand<Scalar>> details;
    WaveletFamily family = WaveletFamily::haar;
    int source_rows = 0;
    int source_cols = 0;

    Band<Scalar>& detail(int level, Orientation o) {
        return details[static_cast<std::size_t>(3 * (level - 1) + static_cast<int>(o))].coeffs;
    }
    const Band<Scalar>& detail(int level, Orientation o) const {
        return details[static_cast<std::size_t>(3 * (level - 1) + static_cast<int>(o))].coeffs;
    }
};

/// Band extent at `level` for a source extent: ceil(n / 2^level).
inline int band_extent(int n, int level) {
    for (int l = 0; l < level; ++l) {
        n = (n + 1) / 2;
    }
    return n;
}

namespace detail {

inline std::span<const double> lowpass_taps(WaveletFamily family) {
    static const std::array<double, 2> haar = {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0};
    static const std::array<double, 4> db2 = [] {
        const double s3 = std::sqrt(3.0);
        const double norm = 4.0 * std::numbers::sqrt2;
        return std::array<double, 4>{(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm,
                                     (1.0 - s3) / norm};
    }();
    if (family == WaveletFamily::haar) {
        return haar;
    }
    return db2;
}

// Quadrature mirror: g[n] = (-1)^n h[L-1-n].
inline std::vector<double> highpass_taps(std::span<const double> h) {
    std::vector<double> g(h.size());
    for (std::size_t n = 0; n < h.size(); ++n) {
        const double sign = (n % 2 == 0) ? 1.0 : -1.0;
        g[n] = sign * h[h.size() - 1 - n];
    }
    return g;
}

// One analysis step along each row. Odd widths are first extended by one
// half-sample-symmetric column (x[N] = x[N-1]); the even-length signal is then
// transformed with periodic wrap, which keeps the step orthonormal.
template <typename Scalar>
void analyze_rows(const Band<Scalar>& in, WaveletFamily family, Band<Scalar>& lo, Band<Scalar>& hi) {
    const auto h = lowpass_taps(family);
    const auto g = highpass_taps(h);
    const Eigen::Index rows = in.rows();
    const Eigen::Index n = in.cols();
    const Eigen::Index padded = n + (n % 2);
    const Eigen::Index half = padded / 2;
    lo.setZero(rows, half);
    hi.setZero(rows, half);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index k = 0; k < half; ++k) {
            Scalar a(0);
            Scalar d(0);
            for (std::size_t t = 0; t < h.size(); ++t) {
                Eigen::Index idx = (2 * k + static_cast<Eigen::Index>(t)) % padded;
                if (idx >= n) {
                    idx = n - 1;
                }
                const Scalar v = in(r, idx);
                a += static_cast<Scalar>(h[t]) * v;
                d += static_cast<Scalar>(g[t]) * v;
            }
            lo(r, k) = a;
            hi(r, k) = d;
        }
    }
}

// Adjoint of analyze_rows on the padded periodic signal, cropped to `n` columns.
template <typename Scalar>
Band<Scalar> synthesize_rows(const Band<Scalar>& lo, const Band<Scalar>& hi, WaveletFamily family, Eigen::Index n) {
    const auto h = lowpass_taps(family);
    const auto g = highpass_taps(h);
    const Eigen::Index rows = lo.rows();
    const Eigen::Index half = lo.cols();
    const Eigen::Index padded = 2 * half;
    Band<Scalar> full = Band<Scalar>::Zero(rows, padded);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index k = 0; k < half; ++k) {
            const Scalar a = lo(r, k);
            const Scalar d = hi(r, k);
            for (std::size_t t = 0; t < h.size(); ++t) {
                const Eigen::Index idx = (2 * k + static_cast<Eigen::Index>(t)) % padded;
                full(r, idx) += static_cast<Scalar>(h[t]) * a + static_cast<Scalar>(g[t]) * d;
            }
        }
    }
    return full.leftCols(n);
}

} // namespace detail

/// Orthonormal separable 2-D DWT with `levels` decomposition steps.
template <typename Derived>
WaveletPyramid<typename Derived::Scalar> dwt2_forward(const Eigen::MatrixBase<Derived>& channel, int levels,
                                                       WaveletFamily family) {
    using Scalar = typename Derived::Scalar;
    const auto rows = static_cast<int>(channel.rows());
    const auto cols = static_cast<int>(channel.cols());
    if (levels < 1) {
        throw ContractError("dwt2_forward: levels must be >= 1");
    }
    if (levels > 30 || std::min(rows, cols) < (1 << levels)) {
        throw ContractError("dwt2_forward: " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " band too small for " + std::to_string(levels) + " levels");
    }

    WaveletPyramid<Scalar> pyr;
    pyr.levels = levels;
    pyr.family = family;
    pyr.source_rows = rows;
    pyr.source_cols = cols;
    pyr.details.reserve(static_cast<std::size_t>(3 * levels));

    Band<Scalar> current = channel;
    for (int level = 1; level <= levels; ++level) {
        Band<Scalar> lo_r, hi_r;
        detail::analyze_rows<Scalar>(current, family, lo_r, hi_r);
        // Column pass through the transpose.
        Band<Scalar> ll_t, lh_t, hl_t, hh_t;
        detail::analyze_rows<Scalar>(lo_r.transpose(), family, ll_t, lh_t);
        detail::analyze_rows<Scalar>(hi_r.transpose(), family, hl_t, hh_t);
        pyr.details.push_back({level, Orientation::LH, lh_t.transpose()});
        pyr.details.push_back({level, Orientation::HL, hl_t.transpose()});
        pyr.details.push_back({level, Orientation::HH, hh_t.transpose()});
        current = ll_t.transpose();
    }
    pyr.approx = std::move(current);
    return pyr;
}

template <typename Scalar>
void validate_pyramid(const WaveletPyramid<Scalar>& pyr) {
    if (pyr.levels < 1 || pyr.details.size() != static_cast<std::size_t>(3 * pyr.levels)) {
        throw ContractError("wavelet pyramid: expected 3 detail bands per level");
    }
    auto check = [&](const Band<Scalar>& b, int level, const char* what) {
        if (b.rows() != band_extent(pyr.source_rows, level) || b.cols() != band_extent(pyr.source_cols, level)) {
            throw ContractError(std::string("wavelet pyramid: inconsistent ") + what + " dimensions at level " +
                                std::to_string(level));
        }
    };
    check(pyr.approx, pyr.levels, "approx");
    for (std::size_t i = 0; i < pyr.details.size(); ++i) {
        const auto& d = pyr.details[i];
        if (d.level != static_cast<int>(i / 3) + 1 || static_cast<int>(d.orientation) != static_cast<int>(i % 3)) {
            throw ContractError("wavelet pyramid: detail bands out of order");
        }
        check(d.coeffs, d.level, "detail");
    }
}

/// Reconstruct the approximation at `stop_level` (0 = full resolution).
template <typename Scalar>
Band<Scalar> dwt2_reconstruct_to(const WaveletPyramid<Scalar>& pyr, int stop_level) {
    validate_pyramid(pyr);
    if (stop_level < 0 || stop_level > pyr.levels) {
        throw ContractError("dwt2_reconstruct_to: stop level out of range");
    }
    Band<Scalar> current = pyr.approx;
    for (int level = pyr.levels; level > stop_level; --level) {
        const Eigen::Index out_rows = band_extent(pyr.source_rows, level - 1);
        const Eigen::Index out_cols = band_extent(pyr.source_cols, level - 1);
        const Band<Scalar> lo_r_t = detail::synthesize_rows<Scalar>(
            current.transpose(), pyr.detail(level, Orientation::LH).transpose(), pyr.family, out_rows);
        const Band<Scalar> hi_r_t = detail::synthesize_rows<Scalar>(
            pyr.detail(level, Orientation::HL).transpose(), pyr.detail(level, Orientation::HH).transpose(),
            pyr.family, out_rows);
        current = detail::synthesize_rows<Scalar>(lo_r_t.transpose(), hi_r_t.transpose(), pyr.family, out_cols);
    }
    return current;
}

template <typename Scalar>
Band<Scalar> dwt2_inverse(const WaveletPyramid<Scalar>& pyr) {
    return dwt2_reconstruct_to(pyr, 0);
}

/// Sum of squared coefficients over every band.
template <typename Scalar>
Scalar pyramid_energy(const WaveletPyramid<Scalar>& pyr) {
    Scalar e = pyr.approx.squaredNorm();
    for (const auto& d : pyr.details) {
        e += d.coeffs.squaredNorm();
    }
    return e;
}

// Registration.

struct ShiftEstimate {
    double dy = 0.0;
    double dx = 0.0;
    double confidence = 0.0;
};

/// Global translation of `moving` relative to `reference` by phase correlation:
/// moving(y, x) ~ reference(y - dy, x - dx).
ShiftEstimate estimate_shift(const Plane& reference, const Plane& moving);

struct ShiftedBand {
    Plane values;
    Plane mask; ///< 1 where every contributing bilinear tap is inside the source
};

/// Warp `channel` so that a frame displaced by (dy, dx) lands on the reference grid:
/// out(y, x) = channel(y + dy, x + dx), bilinear, edge-clamped.
ShiftedBand apply_shift(const Plane& channel, double dy, double dx);

/// Circular shift: out(y, x) = in((y - dy) mod H, (x - dx) mod W).
Plane circshift(const Plane& in, int dy, int dx);

} // namespace d3net
