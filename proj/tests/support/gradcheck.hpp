#pragma once

#include "d3net/neuralcore.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace d3net::testing {

using TensorD = nn::Tensor<double>;

inline TensorD random_tensor(nn::Shape s, std::uint64_t seed, bool requires_grad = true, double lo = -1.0,
                             double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(s.numel());
    for (auto& x : v) x = dist(rng);
    return TensorD::from(s, std::move(v), requires_grad);
}

struct GradCheck {
    double worst_relative = 0.0; // over all checked tensors
    std::size_t checked = 0;
};

/// Compares backward() with central differences for every input tensor.
/// The relative error of a tensor is ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-10);
/// `max_entries` caps how many coordinates per tensor are perturbed (evenly strided).
inline GradCheck gradcheck(const std::function<TensorD()>& loss_fn, std::vector<TensorD> inputs, double step = 1e-4,
                           std::size_t max_entries = 0) {
    for (auto& t : inputs) t.zero_grad();
    const TensorD loss = loss_fn();
    nn::backward(loss);
    GradCheck result;
    for (auto& t : inputs) {
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        const std::size_t n = t.numel();
        const std::size_t stride = (max_entries == 0 || n <= max_entries) ? 1 : (n + max_entries - 1) / max_entries;
        double diff2 = 0, a2 = 0, n2 = 0;
        for (std::size_t i = 0; i < n; i += stride) {
            const double orig = t.data()[i];
            double numeric;
            {
                nn::NoGradGuard guard;
                t.data()[i] = orig + step;
                const double up = loss_fn().item();
                t.data()[i] = orig - step;
                const double down = loss_fn().item();
                t.data()[i] = orig;
                numeric = (up - down) / (2 * step);
            }
            diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
            a2 += analytic[i] * analytic[i];
            n2 += numeric * numeric;
            ++result.checked;
        }
        const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-10});
        result.worst_relative = std::max(result.worst_relative, rel);
    }
    return result;
}

} // namespace d3net::testing
