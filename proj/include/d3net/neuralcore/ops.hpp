#pragma once

#include "d3net/neuralcore/tensor.hpp"

#include <Eigen/Core>

#include <cmath>

namespace d3net::nn {

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Geometry of a cross-correlation from an (in_h, in_w) grid.
struct ConvGeometry {
    int channels;
    int in_h, in_w;
    int kh, kw;
    int stride, pad;
    int out_h, out_w;

    Eigen::Index patch() const { return static_cast<Eigen::Index>(channels) * kh * kw; }
    Eigen::Index positions() const { return static_cast<Eigen::Index>(out_h) * out_w; }
};

/// Lowers one (C, H, W) image into a (C*kh*kw) x (out_h*out_w) matrix.
template <typename Scalar>
void im2col(const Scalar* image, const ConvGeometry& g, RowMatrix<Scalar>& cols) {
    cols.resize(g.patch(), g.positions());
    for (int c = 0; c < g.channels; ++c) {
        for (int i = 0; i < g.kh; ++i) {
            for (int j = 0; j < g.kw; ++j) {
                Scalar* row = cols.row((static_cast<Eigen::Index>(c) * g.kh + i) * g.kw + j).data();
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int y = oy * g.stride - g.pad + i;
                    Scalar* dst = row + static_cast<std::ptrdiff_t>(oy) * g.out_w;
                    if (y < 0 || y >= g.in_h) {
                        std::fill(dst, dst + g.out_w, Scalar(0));
                        continue;
                    }
                    const Scalar* src = image + (static_cast<std::ptrdiff_t>(c) * g.in_h + y) * g.in_w;
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int x = ox * g.stride - g.pad + j;
                        dst[ox] = (x >= 0 && x < g.in_w) ? src[x] : Scalar(0);
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-adds columns back into a (C, H, W) image.
template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Scalar* image) {
    for (int c = 0; c < g.channels; ++c) {
        for (int i = 0; i < g.kh; ++i) {
            for (int j = 0; j < g.kw; ++j) {
                const Scalar* row = cols.row((static_cast<Eigen::Index>(c) * g.kh + i) * g.kw + j).data();
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int y = oy * g.stride - g.pad + i;
                    if (y < 0 || y >= g.in_h) {
                        continue;
                    }
                    Scalar* dst = image + (static_cast<std::ptrdiff_t>(c) * g.in_h + y) * g.in_w;
                    const Scalar* src = row + static_cast<std::ptrdiff_t>(oy) * g.out_w;
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int x = ox * g.stride - g.pad + j;
                        if (x >= 0 && x < g.in_w) {
                            dst[x] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

template <typename Scalar>
void check_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw ContractError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

template <typename Scalar>
void check_bias(const Tensor<Scalar>& bias, int channels, const char* op) {
    if (bias.defined() && bias.numel() != static_cast<std::size_t>(channels)) {
        throw ContractError(std::string(op) + ": bias must hold one value per output channel");
    }
}

} // namespace detail

/// Cross-correlation with zero padding. weight: (out_c, in_c, kh, kw); bias: out_c values (optional).
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias, int stride = 1,
                      int pad = 0) {
    using Mat = detail::RowMatrix<Scalar>;
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    if (ws.c != xs.c) {
        throw ContractError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                            std::to_string(ws.c));
    }
    if (stride < 1 || pad < 0) {
        throw ContractError("conv2d: stride must be >= 1 and pad >= 0");
    }
    detail::check_bias(bias, ws.n, "conv2d");
    detail::ConvGeometry g{xs.c, xs.h, xs.w, ws.h, ws.w, stride, pad, 0, 0};
    g.out_h = (xs.h + 2 * pad - ws.h) / stride + 1;
    g.out_w = (xs.w + 2 * pad - ws.w) / stride + 1;
    if (xs.h + 2 * pad < ws.h || xs.w + 2 * pad < ws.w) {
        throw ContractError("conv2d: kernel larger than padded input");
    }

    const Shape os{xs.n, ws.n, g.out_h, g.out_w};
    auto out = bias.defined() ? detail::make_output(os, {&x, &weight, &bias}) : detail::make_output(os, {&x, &weight});
    const Eigen::Map<const Mat> wmat(weight.data().data(), ws.n, g.patch());
    const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    const std::size_t out_stride = static_cast<std::size_t>(ws.n) * g.positions();
    Mat cols;
    for (int n = 0; n < xs.n; ++n) {
        detail::im2col(x.data().data() + n * in_stride, g, cols);
        Eigen::Map<Mat> o(out->value.data() + n * out_stride, ws.n, g.positions());
        o.noalias() = wmat * cols;
        if (bias.defined()) {
            const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> b(bias.data().data(), ws.n);
            o.colwise() += b;
        }
    }

    if (out->requires_grad) {
        auto* self = out.get();
        auto xn = x.node();
        auto wn = weight.node();
        auto bn = bias.defined() ? bias.node() : nullptr;
        out->backward = [self, xn, wn, bn, g, in_stride, out_stride, batch = xs.n, oc = ws.n] {
            const Eigen::Map<const Mat> wmat(wn->value.data(), oc, g.patch());
            Mat cols;
            Mat dcols;
            for (int n = 0; n < batch; ++n) {
                const Eigen::Map<const Mat> dout(self->grad.data() + n * out_stride, oc, g.positions());
                if (wn->requires_grad) {
                    detail::im2col(xn->value.data() + n * in_stride, g, cols);
                    Eigen::Map<Mat> dw(wn->ensure_grad(), oc, g.patch());
                    dw.noalias() += dout * cols.transpose();
                }
                if (bn && bn->requires_grad) {
                    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> db(bn->ensure_grad(), oc);
                    db += dout.rowwise().sum();
                }
                if (xn->requires_grad) {
                    dcols.noalias() = wmat.transpose() * dout;
                    detail::col2im_add(dcols, g, xn->ensure_grad() + n * in_stride);
                }
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

/// Transposed convolution (adjoint of conv2d with the same weight).
/// weight: (in_c, out_c, kh, kw); output extent (H-1)*stride - 2*pad + kh.
template <typename Scalar>
Tensor<Scalar> conv2d_transposed(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                                 int stride = 1, int pad = 0) {
    using Mat = detail::RowMatrix<Scalar>;
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    if (ws.n != xs.c) {
        throw ContractError("conv2d_transposed: input has " + std::to_string(xs.c) + " channels, weight expects " +
                            std::to_string(ws.n));
    }
    if (stride < 1 || pad < 0) {
        throw ContractError("conv2d_transposed: stride must be >= 1 and pad >= 0");
    }
    detail::check_bias(bias, ws.c, "conv2d_transposed");
    const int out_h = (xs.h - 1) * stride - 2 * pad + ws.h;
    const int out_w = (xs.w - 1) * stride - 2 * pad + ws.w;
    if (out_h < 1 || out_w < 1) {
        throw ContractError("conv2d_transposed: empty output");
    }
    // The forward conv that maps the output grid back onto the input grid.
    const detail::ConvGeometry g{ws.c, out_h, out_w, ws.h, ws.w, stride, pad, xs.h, xs.w};

    const Shape os{xs.n, ws.c, out_h, out_w};
    auto out = bias.defined() ? detail::make_output(os, {&x, &weight, &bias}) : detail::make_output(os, {&x, &weight});
    const Eigen::Map<const Mat> wmat(weight.data().data(), ws.n, g.patch());
    const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    const std::size_t out_stride = static_cast<std::size_t>(ws.c) * out_h * out_w;
    Mat cols;
    for (int n = 0; n < xs.n; ++n) {
        const Eigen::Map<const Mat> xin(x.data().data() + n * in_stride, xs.c, g.positions());
        cols.noalias() = wmat.transpose() * xin;
        Scalar* dst = out->value.data() + n * out_stride;
        detail::col2im_add(cols, g, dst);
        if (bias.defined()) {
            Eigen::Map<Mat> o(dst, ws.c, static_cast<Eigen::Index>(out_h) * out_w);
            const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> b(bias.data().data(), ws.c);
            o.colwise() += b;
        }
    }

    if (out->requires_grad) {
        auto* self = out.get();
        auto xn = x.node();
        auto wn = weight.node();
        auto bn = bias.defined() ? bias.node() : nullptr;
        out->backward = [self, xn, wn, bn, g, in_stride, out_stride, batch = xs.n, ic = ws.n, oc = ws.c] {
            const Eigen::Map<const Mat> wmat(wn->value.data(), ic, g.patch());
            Mat cols;
            for (int n = 0; n < batch; ++n) {
                const Scalar* dout = self->grad.data() + n * out_stride;
                detail::im2col(dout, g, cols);
                if (wn->requires_grad) {
                    const Eigen::Map<const Mat> xin(xn->value.data() + n * in_stride, ic, g.positions());
                    Eigen::Map<Mat> dw(wn->ensure_grad(), ic, g.patch());
                    dw.noalias() += xin * cols.transpose();
                }
                if (bn && bn->requires_grad) {
                    const Eigen::Map<const Mat> d(dout, oc, static_cast<Eigen::Index>(g.in_h) * g.in_w);
                    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> db(bn->ensure_grad(), oc);
                    db += d.rowwise().sum();
                }
                if (xn->requires_grad) {
                    Eigen::Map<Mat> dx(xn->ensure_grad() + n * in_stride, ic, g.positions());
                    dx.noalias() += wmat * cols;
                }
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

/// max(0, x); derivative at 0 is 0.
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
    auto out = detail::make_output(x.shape(), {&x});
    Eigen::Map<typename Tensor<Scalar>::Array> o(out->value.data(), static_cast<Eigen::Index>(out->value.size()));
    o = x.array().max(Scalar(0));
    if (out->requires_grad) {
        auto* self = out.get();
        auto xn = x.node();
        out->backward = [self, xn] {
            Scalar* dx = xn->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) {
                if (xn->value[i] > Scalar(0)) {
                    dx[i] += self->grad[i];
                }
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    detail::check_same_shape(a, b, "add");
    auto out = detail::make_output(a.shape(), {&a, &b});
    Eigen::Map<typename Tensor<Scalar>::Array> o(out->value.data(), static_cast<Eigen::Index>(out->value.size()));
    o = a.array() + b.array();
    if (out->requires_grad) {
        auto* self = out.get();
        auto an = a.node();
        auto bn = b.node();
        out->backward = [self, an, bn] {
            const auto n = static_cast<Eigen::Index>(self->grad.size());
            const Eigen::Map<const typename Tensor<Scalar>::Array> g(self->grad.data(), n);
            for (const auto& in : {an, bn}) {
                if (in->requires_grad) {
                    Eigen::Map<typename Tensor<Scalar>::Array>(in->ensure_grad(), n) += g;
                }
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

/// Elementwise product.
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    detail::check_same_shape(a, b, "mul");
    auto out = detail::make_output(a.shape(), {&a, &b});
    Eigen::Map<typename Tensor<Scalar>::Array> o(out->value.data(), static_cast<Eigen::Index>(out->value.size()));
    o = a.array() * b.array();
    if (out->requires_grad) {
        auto* self = out.get();
        auto an = a.node();
        auto bn = b.node();
        out->backward = [self, an, bn] {
            using Arr = typename Tensor<Scalar>::Array;
            const auto n = static_cast<Eigen::Index>(self->grad.size());
            const Eigen::Map<const Arr> g(self->grad.data(), n);
            if (an->requires_grad) {
                Eigen::Map<Arr>(an->ensure_grad(), n) += g * Eigen::Map<const Arr>(bn->value.data(), n);
            }
            if (bn->requires_grad) {
                Eigen::Map<Arr>(bn->ensure_grad(), n) += g * Eigen::Map<const Arr>(an->value.data(), n);
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

/// Sum of all elements as a (1,1,1,1) tensor.
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
    auto out = detail::make_output(Shape{1, 1, 1, 1}, {&x});
    out->value[0] = x.array().sum();
    if (out->requires_grad) {
        auto* self = out.get();
        auto xn = x.node();
        out->backward = [self, xn] {
            Eigen::Map<typename Tensor<Scalar>::Array>(xn->ensure_grad(), static_cast<Eigen::Index>(xn->value.size())) +=
                self->grad[0];
        };
    }
    return Tensor<Scalar>(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    const Shape as = a.shape();
    const Shape bs = b.shape();
    if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
        throw ContractError("concat_channels: shape mismatch " + as.str() + " vs " + bs.str());
    }
    auto out = detail::make_output(Shape{as.n, as.c + bs.c, as.h, as.w}, {&a, &b});
    const std::size_t plane = static_cast<std::size_t>(as.h) * as.w;
    const std::size_t a_len = as.c * plane;
    const std::size_t b_len = bs.c * plane;
    for (int n = 0; n < as.n; ++n) {
        Scalar* dst = out->value.data() + n * (a_len + b_len);
        std::copy_n(a.data().data() + n * a_len, a_len, dst);
        std::copy_n(b.data().data() + n * b_len, b_len, dst + a_len);
    }
    if (out->requires_grad) {
        auto* self = out.get();
        auto an = a.node();
        auto bn = b.node();
        out->backward = [self, an, bn, a_len, b_len, batch = as.n] {
            for (int n = 0; n < batch; ++n) {
                const Scalar* g = self->grad.data() + n * (a_len + b_len);
                if (an->requires_grad) {
                    Scalar* da = an->ensure_grad() + n * a_len;
                    for (std::size_t i = 0; i < a_len; ++i) da[i] += g[i];
                }
                if (bn->requires_grad) {
                    Scalar* db = bn->ensure_grad() + n * b_len;
                    for (std::size_t i = 0; i < b_len; ++i) db[i] += g[a_len + i];
                }
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

/// Mean absolute error; the subgradient of |.| at 0 is 0.
template <typename Scalar>
Tensor<Scalar> l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
    detail::check_same_shape(pred, target, "l1_loss");
    auto out = detail::make_output(Shape{1, 1, 1, 1}, {&pred, &target});
    const auto count = static_cast<Scalar>(pred.numel());
    out->value[0] = (pred.array() - target.array()).abs().sum() / count;
    if (out->requires_grad) {
        auto* self = out.get();
        auto pn = pred.node();
        auto tn = target.node();
        out->backward = [self, pn, tn, count] {
            const Scalar scale = self->grad[0] / count;
            Scalar* dp = pn->requires_grad ? pn->ensure_grad() : nullptr;
            Scalar* dt = tn->requires_grad ? tn->ensure_grad() : nullptr;
            for (std::size_t i = 0; i < pn->value.size(); ++i) {
                const Scalar d = pn->value[i] - tn->value[i];
                const Scalar s = d > Scalar(0) ? scale : (d < Scalar(0) ? -scale : Scalar(0));
                if (dp) dp[i] += s;
                if (dt) dt[i] -= s;
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

/// Nearest-neighbour x2 upsampling (pixel replication).
template <typename Scalar>
Tensor<Scalar> upsample_nearest2(const Tensor<Scalar>& x) {
    const Shape xs = x.shape();
    auto out = detail::make_output(Shape{xs.n, xs.c, 2 * xs.h, 2 * xs.w}, {&x});
    const std::size_t planes = static_cast<std::size_t>(xs.n) * xs.c;
    for (std::size_t p = 0; p < planes; ++p) {
        const Scalar* src = x.data().data() + p * xs.h * xs.w;
        Scalar* dst = out->value.data() + p * 4 * xs.h * xs.w;
        for (int y = 0; y < 2 * xs.h; ++y) {
            for (int xx = 0; xx < 2 * xs.w; ++xx) {
                dst[static_cast<std::size_t>(y) * 2 * xs.w + xx] = src[static_cast<std::size_t>(y / 2) * xs.w + xx / 2];
            }
        }
    }
    if (out->requires_grad) {
        auto* self = out.get();
        auto xn = x.node();
        out->backward = [self, xn, xs, planes] {
            Scalar* dx = xn->ensure_grad();
            for (std::size_t p = 0; p < planes; ++p) {
                const Scalar* g = self->grad.data() + p * 4 * xs.h * xs.w;
                Scalar* d = dx + p * xs.h * xs.w;
                for (int y = 0; y < 2 * xs.h; ++y) {
                    for (int xx = 0; xx < 2 * xs.w; ++xx) {
                        d[static_cast<std::size_t>(y / 2) * xs.w + xx / 2] += g[static_cast<std::size_t>(y) * 2 * xs.w + xx];
                    }
                }
            }
        };
    }
    return Tensor<Scalar>(std::move(out));
}

} // namespace d3net::nn
