#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace d3net {

/// Raised when a caller violates an operation's preconditions.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for unreadable/unwritable files and malformed file contents.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major dense 2-D field. Used for single image channels, wavelet bands,
/// masks and fusion weights.
template <typename Scalar>
using Band = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Plane = Band<double>;

/// Planar floating-point raster. Samples are stored channel-major as a
/// (channels*height) x width matrix, so channel c is rows [c*H, (c+1)*H).
class Image {
public:
    Image() = default;
    Image(int channels, int height, int width, double fill = 0.0);

    /// Single-channel image wrapping a copy of `plane`.
    static Image from_plane(const Plane& plane);
    static Image from_planes(const std::vector<Plane>& planes);

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
    bool empty() const { return data_.size() == 0; }

    auto plane(int c) { return data_.middleRows(static_cast<Eigen::Index>(c) * height_, height_); }
    auto plane(int c) const { return data_.middleRows(static_cast<Eigen::Index>(c) * height_, height_); }

    double& at(int c, int y, int x) { return data_(static_cast<Eigen::Index>(c) * height_ + y, x); }
    double at(int c, int y, int x) const { return data_(static_cast<Eigen::Index>(c) * height_ + y, x); }

    /// Whole planar buffer, (channels*height) x width.
    Plane& data() { return data_; }
    const Plane& data() const { return data_; }

    bool same_shape(const Image& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }

    /// Rec. 601 luma for RGB, the single plane for grayscale.
    Plane luminance() const;

    bool all_finite() const { return data_.allFinite(); }

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    Plane data_;
};

/// Ordered frames of one scene; all frames share channels/height/width.
struct FrameSequence {
    std::vector<Image> frames;
    std::string source_id;

    void validate() const;
    std::size_t middle_index() const { return frames.size() / 2; }
};

enum class ResampleKernel { nearest, bilinear, bicubic };

ResampleKernel parse_resample_kernel(const std::string& name);

// I/O. PNG is 8-bit gray/RGB; PFM is 32-bit float ("Pf" gray, "PF" RGB).
Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);
Image load_pfm(const std::filesystem::path& path);
void save_pfm(const Image& img, const std::filesystem::path& path);

/// 8-bit quantization used by the PNG writer: clamp to [0,1], then round half up.
unsigned char quantize_u8(double v);

// Metrics.
inline constexpr double kPsnrCap = 99.0;

double psnr(const Image& a, const Image& b);
double ssim(const Image& a, const Image& b);

Image resample(const Image& img, int new_h, int new_w, ResampleKernel kernel);

/// Clamp every sample to [0,1].
Image clamp01(Image img);

} // namespace d3net
