#include "d3net/neuralcore/optim.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace d3net::nn {
namespace {

class Writer {
public:
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::string_view s) { bytes_.append(s); }
    const std::string& bytes() const { return bytes_; }

private:
    template <typename U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    std::string bytes_;
};

class Reader {
public:
    Reader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }
    [[noreturn]] void fail(const std::string& what) const {
        throw IoError("checkpoint '" + name_ + "': " + what);
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            fail("truncated");
        }
    }
    template <typename U>
    U le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

constexpr std::string_view kMagic = "D3NC";
constexpr std::string_view kAdamMagic = "ADAM";

} // namespace

void save_checkpoint(const ParamStore<float>& store, const std::filesystem::path& file) {
    Writer w;
    w.raw(kMagic);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, e] : store.entries()) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.raw(name);
        const Shape s = e.param.shape();
        w.u32(4);
        for (int d : {s.n, s.c, s.h, s.w}) {
            w.u32(static_cast<std::uint32_t>(d));
        }
        for (float v : e.param.data()) {
            w.f32(v);
        }
    }
    w.raw(kAdamMagic);
    w.u64(store.t);
    for (const auto& [name, e] : store.entries()) {
        for (float v : e.m) w.f32(v);
        for (float v : e.v) w.f32(v);
    }
    w.u64(store.iteration);
    w.u64(store.rng_seed);

    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write checkpoint '" + file.string() + "'");
    }
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) {
        throw IoError("write failed for checkpoint '" + file.string() + "'");
    }
}

ParamStore<float> load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint '" + file.string() + "'");
    }
    Reader r(std::string(std::istreambuf_iterator<char>(in), {}), file.string());
    if (r.raw(4) != kMagic) {
        r.fail("bad magic");
    }
    if (const auto version = r.u32(); version != kCheckpointVersion) {
        r.fail("unsupported version " + std::to_string(version));
    }
    ParamStore<float> store;
    const std::uint32_t count = r.u32();
    std::vector<std::string> order;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32();
        std::string name = r.raw(len);
        if (r.u32() != 4) {
            r.fail("parameter '" + name + "' is not rank 4");
        }
        Shape s;
        s.n = static_cast<int>(r.u32());
        s.c = static_cast<int>(r.u32());
        s.h = static_cast<int>(r.u32());
        s.w = static_cast<int>(r.u32());
        if (s.numel() > (std::size_t{1} << 30)) {
            r.fail("parameter '" + name + "' is implausibly large");
        }
        std::vector<float> values(s.numel());
        for (auto& v : values) v = r.f32();
        if (store.contains(name)) {
            r.fail("duplicate parameter '" + name + "'");
        }
        store.insert(name, Tensor<float>::from(s, std::move(values), true));
        order.push_back(std::move(name));
    }
    if (r.raw(4) != kAdamMagic) {
        r.fail("missing ADAM section");
    }
    store.t = r.u64();
    // Entries were written in name order; the map restores that order.
    for (auto& [name, e] : store.entries()) {
        for (auto& v : e.m) v = r.f32();
        for (auto& v : e.v) v = r.f32();
    }
    store.iteration = r.u64();
    store.rng_seed = r.u64();
    if (!r.done()) {
        r.fail("trailing bytes");
    }
    if (!std::is_sorted(order.begin(), order.end())) {
        r.fail("parameters out of order");
    }
    return store;
}

} // namespace d3net::nn
