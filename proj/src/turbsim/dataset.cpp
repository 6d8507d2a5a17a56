#include "d3net/turbsim.hpp"

#include "d3net/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace d3net {
namespace fs = std::filesystem;

namespace {

std::string frame_name(std::size_t v, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04zu", v);
    return buf + ext;
}

std::string entry_dir(std::size_t i, const fs::path& source) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu_", i);
    return buf + source.stem().string();
}

} // namespace

std::size_t DatasetManifest::frame_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) {
        n += e.frames.size();
    }
    return n;
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json entries_json = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json ej;
        ej["clean"] = e.clean;
        ej["frames"] = e.frames;
        ej["params"] = e.params;
        if (!e.frame_params.empty()) {
            ej["frame_params"] = e.frame_params;
        }
        entries_json.push_back(std::move(ej));
    }
    nlohmann::json j{{"format_version", format_version}, {"entries", std::move(entries_json)}};
    if (!config.is_null()) {
        j["config"] = config;
    }
    return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j, fs::path base_dir) {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kFormatVersion) {
        throw IoError("dataset manifest: unsupported format_version " + std::to_string(m.format_version));
    }
    m.base_dir = std::move(base_dir);
    for (const auto& ej : j.at("entries")) {
        ManifestEntry e;
        e.clean = ej.at("clean").get<std::string>();
        e.frames = ej.at("frames").get<std::vector<std::string>>();
        e.params = ej.at("params").get<DegradationParams>();
        if (ej.contains("frame_params")) {
            e.frame_params = ej.at("frame_params").get<std::vector<DegradationParams>>();
        }
        m.entries.push_back(std::move(e));
    }
    if (j.contains("config")) {
        m.config = j.at("config");
    }
    return m;
}

void DatasetManifest::save(const fs::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw IoError("cannot write manifest '" + file.string() + "'");
    }
    out << to_json().dump(2) << '\n';
    if (!out) {
        throw IoError("write failed for manifest '" + file.string() + "'");
    }
}

DatasetManifest DatasetManifest::load(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open manifest '" + file.string() + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
        return from_json(j, file.parent_path());
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest '" + file.string() + "': " + e.what());
    }
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw IoError("'" + dir.string() + "' is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".pfm") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

DatasetManifest generate_dataset(const fs::path& clean_dir, const fs::path& out_dir, const DegradationParams& params,
                                 int variations, const nlohmann::json& run_config) {
    params.validate();
    if (variations < 1) {
        throw ContractError("generate_dataset: variations must be >= 1");
    }
    const auto sources = list_images(clean_dir);
    if (sources.empty()) {
        throw IoError("no .png/.pfm images in '" + clean_dir.string() + "'");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
    }

    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    manifest.config = run_config;
    manifest.entries.resize(sources.size());

    for (std::size_t i = 0; i < sources.size(); ++i) {
        const Image clean = load_image(sources[i]);
        const std::string dir = entry_dir(i, sources[i]);
        const std::string ext = sources[i].extension().string() == ".pfm" ? ".pfm" : ".png";
        fs::create_directories(out_dir / dir / "frames", ec);
        if (ec) {
            throw IoError("cannot create '" + (out_dir / dir / "frames").string() + "': " + ec.message());
        }

        ManifestEntry& entry = manifest.entries[i];
        entry.clean = dir + "/clean" + ext;
        entry.params = params;
        entry.params.frames = variations;
        entry.frames.resize(static_cast<std::size_t>(variations));
        entry.frame_params.resize(static_cast<std::size_t>(variations));
        save_image(clean, out_dir / entry.clean);

        parallel_for(static_cast<std::size_t>(variations), [&](std::size_t v) {
            const auto p = jitter_params(params, i, v);
            const Image degraded = degrade_frame(clean, p, v);
            entry.frames[v] = dir + "/frames/" + frame_name(v, ext);
            entry.frame_params[v] = p;
            save_image(degraded, out_dir / entry.frames[v]);
        });
    }
    manifest.save(out_dir / "manifest.json");
    return manifest;
}

} // namespace d3net
