#pragma once

#include "d3net/neuralcore/tensor.hpp"
#include "d3net/random.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace d3net::nn {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

template <typename Scalar>
struct ParamEntry {
    Tensor<Scalar> param;
    std::vector<Scalar> m;
    std::vector<Scalar> v;
};

/// Named parameters plus ADAM state. Iteration order is the name order, so
/// serialization and parameter updates are deterministic.
template <typename Scalar>
class ParamStore {
public:
    ParamStore() = default;
    explicit ParamStore(std::uint64_t rng_seed) : rng_seed(rng_seed) {}

    /// He-uniform init with bound gain * sqrt(6 / fan_in), seeded per name.
    Tensor<Scalar>& add(const std::string& name, Shape shape, int fan_in, double gain = 1.0) {
        std::vector<Scalar> values(shape.numel());
        RandomStream rng(rng_seed, fnv1a(name), 0, StreamTag::init);
        const double bound = gain * std::sqrt(6.0 / std::max(1, fan_in));
        for (auto& v : values) {
            v = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
        return insert(name, Tensor<Scalar>::from(shape, std::move(values), true));
    }

    Tensor<Scalar>& add_zeros(const std::string& name, Shape shape) {
        return insert(name, Tensor<Scalar>::zeros(shape, true));
    }

    Tensor<Scalar>& insert(const std::string& name, Tensor<Scalar> t) {
        if (entries_.count(name)) {
            throw ContractError("ParamStore: duplicate parameter '" + name + "'");
        }
        ParamEntry<Scalar> e;
        e.m.assign(t.numel(), Scalar(0));
        e.v.assign(t.numel(), Scalar(0));
        e.param = std::move(t);
        return entries_.emplace(name, std::move(e)).first->second.param;
    }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    const Tensor<Scalar>& get(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw ContractError("ParamStore: no parameter '" + name + "'");
        }
        return it->second.param;
    }
    Tensor<Scalar>& get(const std::string& name) {
        return const_cast<Tensor<Scalar>&>(std::as_const(*this).get(name));
    }

    std::map<std::string, ParamEntry<Scalar>>& entries() { return entries_; }
    const std::map<std::string, ParamEntry<Scalar>>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, e] : entries_) {
            n += e.param.numel();
        }
        return n;
    }

    void zero_grad() {
        for (auto& [name, e] : entries_) {
            e.param.zero_grad();
        }
    }

    /// Copy with every tensor converted to another scalar type.
    template <typename To>
    ParamStore<To> cast() const {
        ParamStore<To> out(rng_seed);
        out.t = t;
        out.iteration = iteration;
        for (const auto& [name, e] : entries_) {
            const auto src = e.param.data();
            std::vector<To> values(src.begin(), src.end());
            out.insert(name, Tensor<To>::from(e.param.shape(), std::move(values), true));
            auto& oe = out.entries().at(name);
            oe.m.assign(e.m.begin(), e.m.end());
            oe.v.assign(e.v.begin(), e.v.end());
        }
        return out;
    }

    std::uint64_t rng_seed = 0;
    std::uint64_t t = 0;         // ADAM step count
    std::uint64_t iteration = 0; // training iterations completed

private:
    std::map<std::string, ParamEntry<Scalar>> entries_;
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected ADAM update over every parameter; increments t once.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& store, double lr, const AdamOptions& opt = {}) {
    for (const auto& [name, e] : store.entries()) {
        if (!e.param.has_grad()) {
            throw ContractError("adam_step: parameter '" + name + "' has no gradient");
        }
    }
    store.t += 1;
    const double t = static_cast<double>(store.t);
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    for (auto& [name, e] : store.entries()) {
        auto values = e.param.data();
        const auto grads = e.param.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grads[i];
            const double m = opt.beta1 * static_cast<double>(e.m[i]) + (1.0 - opt.beta1) * g;
            const double v = opt.beta2 * static_cast<double>(e.v[i]) + (1.0 - opt.beta2) * g * g;
            e.m[i] = static_cast<Scalar>(m);
            e.v[i] = static_cast<Scalar>(v);
            const double mhat = m / c1;
            const double vhat = v / c2;
            values[i] = static_cast<Scalar>(static_cast<double>(values[i]) - lr * mhat / (std::sqrt(vhat) + opt.eps));
        }
    }
}

/// Stepwise decay: max(floor, base_lr - decrement * floor(t / interval)).
struct LrSchedule {
    double base_lr = 0.0004;
    double decrement = 0.00005;
    std::uint64_t interval = 1000;
    double floor = 0.00005;
};

/// Evaluated on an integer grid of 1e-12 so decimal settings give the
/// correctly rounded decimal result (0.0004 - 2 * 0.00005 == 0.0003).
inline double lr_at(const LrSchedule& s, std::uint64_t t) {
    constexpr double kGrid = 1e12;
    const std::int64_t base = std::llround(s.base_lr * kGrid);
    const std::int64_t dec = std::llround(s.decrement * kGrid);
    auto steps = static_cast<std::int64_t>(std::min<std::uint64_t>(t / s.interval, INT32_MAX));
    if (dec > 0) {
        steps = std::min(steps, base / dec + 1);
    }
    return std::max(s.floor, static_cast<double>(base - dec * steps) / kGrid);
}

/// Binary checkpoint: "D3NC", u32 version, parameters as f32, ADAM state,
/// iteration and seed; all little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore<float>& store, const std::filesystem::path& file);
ParamStore<float> load_checkpoint(const std::filesystem::path& file);

} // namespace d3net::nn
