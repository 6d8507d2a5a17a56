#pragma once

#include "d3net/imagecore.hpp"
#include "d3net/wavelet.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace d3net {

/// Per-frame weight fields over the reference grid. `weights` sum to one at
/// every pixel and vanish wherever the frame's boundary field is zero (unless
/// no frame is valid there, in which case they are uniform).
struct FusionMaps {
    std::vector<Plane> similarity;
    std::vector<Plane> boundary;
    std::vector<Plane> priority;
    std::vector<Plane> weights;
    int roi_size = 7;
};

struct FusionOptions {
    int levels = 2;
    WaveletFamily family = WaveletFamily::haar;
    int roi_size = 7;
    double similarity_sigma = 0.1;
    /// Skip phase-correlation registration (frames are already aligned).
    bool register_frames = true;
    /// Called after the weights are computed and before fusion; tests use it
    /// to force particular weight fields.
    std::function<void(FusionMaps&)> weight_hook;
};

struct FusedResult {
    Image fused_approx;  ///< level-1 approximation of the fused pyramid, DC gain removed, clamped to [0,1]
    Image fused_full;    ///< full-resolution inverse transform of the fused pyramid
    FusionMaps maps;
    std::vector<ShiftEstimate> shifts;
    std::vector<Image> registered;
    std::vector<WaveletPyramid<double>> fused_pyramids; ///< one per channel
};

/// Per-pixel temporal median (mean of the two middle values for even counts).
Plane temporal_median(std::span<const Plane> frames);

/// Mean of `field` over the roi x roi window centred on each pixel, restricted
/// to in-image pixels.
Plane box_mean(const Plane& field, int roi_size);

/// Local detail-band energy from a one-level Haar transform, box-averaged over
/// the roi and replicated back to full resolution.
Plane local_detail_energy(const Plane& frame, int roi_size);

std::vector<Plane> compute_similarity(std::span<const Plane> frames, const Plane& reference_stat, int roi_size,
                                      double sigma = 0.1);

/// Erodes each validity mask with a 3x3 structuring element (outside counts as invalid).
std::vector<Plane> compute_boundary(std::span<const ShiftEstimate> shifts, std::span<const Plane> masks);

struct PriorityResult {
    std::vector<Plane> priority;
    std::vector<Plane> weights;
};

PriorityResult compute_priority(std::span<const Plane> similarity, std::span<const Plane> boundary);

/// Mean of `field` over 2^level x 2^level blocks; partial edge blocks average
/// only the pixels they contain.
Plane block_mean_downsample(const Plane& field, int level);

/// Per-coefficient weighted average of every band. Weights are full-resolution
/// fields, block-mean downsampled to each band's level.
WaveletPyramid<double> fuse_pyramids(std::span<const WaveletPyramid<double>> pyramids, std::span<const Plane> weights);

FusedResult fuse_sequence(const FrameSequence& seq, const FusionOptions& options = {});

/// Unregistered per-pixel mean of all frames.
Image frame_average(const FrameSequence& seq);

/// Writes maps (per frame) and fused bands (per channel) as PFM files.
void dump_fusion(const FusedResult& result, const std::filesystem::path& dir);

} // namespace d3net
