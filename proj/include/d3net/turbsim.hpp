#pragma once

#include "d3net/imagecore.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace d3net {

/// Settings of the simplified turbulence model: smooth random tilt, Gaussian
/// PSF and additive Gaussian noise. `frames` is the number of degraded
/// variations produced per clean image.
struct DegradationParams {
    double tilt_sigma = 1.0;  ///< std-dev of per-pixel displacement (pixels)
    double tilt_corr = 8.0;   ///< Gaussian smoothing length of the tilt field (pixels)
    double blur_sigma = 1.2;  ///< PSF std-dev (pixels)
    double noise_sigma = 0.01;
    int frames = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const DegradationParams& p);
void from_json(const nlohmann::json& j, DegradationParams& p);

struct TiltField {
    Plane dy;
    Plane dx;
};

/// Sampled 1-D Gaussian truncated at ceil(3 sigma) and normalized to unit sum.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge-clamped borders.
Plane gaussian_blur(const Plane& in, double sigma);

TiltField sample_tilt_field(int h, int w, const DegradationParams& params, std::uint64_t frame_index);

/// Warp by the tilt field, blur with the PSF, add noise, clamp to [0,1].
Image degrade_frame(const Image& clean, const DegradationParams& params, std::uint64_t frame_index);

/// Per-variation parameters: each sigma scaled by an independent U[0.5, 1.5] draw.
DegradationParams jitter_params(const DegradationParams& base, std::uint64_t image_index, std::uint64_t variation);

/// Seed of the degradation stream for the image at `image_index`.
std::uint64_t image_seed(std::uint64_t seed, std::uint64_t image_index);

/// Deterministic procedural scene (text-like strokes, blobs and a shading
/// gradient) used as clean benchmark and training content.
Image synthesize_scene(int h, int w, std::uint64_t seed, int channels = 1);

struct ManifestEntry {
    std::string clean;                ///< relative to the manifest directory
    std::vector<std::string> frames;  ///< relative to the manifest directory
    DegradationParams params;
    std::vector<DegradationParams> frame_params;
};

struct DatasetManifest {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir; ///< directory holding the manifest file
    nlohmann::json config;          ///< optional echo of the generating run's settings

    std::size_t frame_count() const;
    std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j, std::filesystem::path base_dir);

    void save(const std::filesystem::path& file) const;
    static DatasetManifest load(const std::filesystem::path& file);
};

/// Sorted list of .png/.pfm files in `dir`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Degrades every image of `clean_dir` `variations` times into `out_dir` and
/// writes `out_dir/manifest.json`.
DatasetManifest generate_dataset(const std::filesystem::path& clean_dir, const std::filesystem::path& out_dir,
                                 const DegradationParams& params, int variations,
                                 const nlohmann::json& run_config = nullptr);

} // namespace d3net
