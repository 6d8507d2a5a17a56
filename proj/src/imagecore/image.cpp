#include "d3net/imagecore.hpp"

#include <algorithm>

namespace d3net {

Image::Image(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
    if (channels != 1 && channels != 3) {
        throw ContractError("Image: channels must be 1 or 3, got " + std::to_string(channels));
    }
    if (height < 1 || width < 1) {
        throw ContractError("Image: dimensions must be positive");
    }
    data_ = Plane::Constant(static_cast<Eigen::Index>(channels) * height, width, fill);
}

Image Image::from_plane(const Plane& plane) {
    Image img(1, static_cast<int>(plane.rows()), static_cast<int>(plane.cols()));
    img.data_ = plane;
    return img;
}

Image Image::from_planes(const std::vector<Plane>& planes) {
    if (planes.empty()) {
        throw ContractError("Image::from_planes: no planes");
    }
    const auto h = static_cast<int>(planes.front().rows());
    const auto w = static_cast<int>(planes.front().cols());
    Image img(static_cast<int>(planes.size()), h, w);
    for (std::size_t c = 0; c < planes.size(); ++c) {
        if (planes[c].rows() != h || planes[c].cols() != w) {
            throw ContractError("Image::from_planes: plane dimensions differ");
        }
        img.plane(static_cast<int>(c)) = planes[c];
    }
    return img;
}

Plane Image::luminance() const {
    if (channels_ == 1) {
        return plane(0);
    }
    return 0.299 * plane(0) + 0.587 * plane(1) + 0.114 * plane(2);
}

void FrameSequence::validate() const {
    if (frames.empty()) {
        throw ContractError("FrameSequence '" + source_id + "': no frames");
    }
    for (const auto& f : frames) {
        if (!f.same_shape(frames.front())) {
            throw ContractError("FrameSequence '" + source_id + "': frame dimensions differ");
        }
    }
}

ResampleKernel parse_resample_kernel(const std::string& name) {
    if (name == "nearest") return ResampleKernel::nearest;
    if (name == "bilinear") return ResampleKernel::bilinear;
    if (name == "bicubic") return ResampleKernel::bicubic;
    throw ContractError("unknown resample kernel '" + name + "'");
}

Image clamp01(Image img) {
    img.data() = img.data().cwiseMax(0.0).cwiseMin(1.0);
    return img;
}

} // namespace d3net
