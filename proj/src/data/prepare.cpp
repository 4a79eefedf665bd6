#include "data/prepare.hpp"

#include <fstream>
#include <iostream>

#include "common/errors.hpp"
#include "common/png_io.hpp"

namespace cf2net {

namespace fs = std::filesystem;

nlohmann::json PrepareOptions::to_json() const {
    return {{"source", source},
            {"real_root", real_root.string()},
            {"count", count},
            {"size", size},
            {"seed", seed},
            {"edge_radius", edge_radius},
            {"superpixels", superpixels},
            {"superpixel",
             {{"k", spx.k},
              {"compactness", spx.compactness},
              {"iterations", spx.iterations},
              {"min_size", spx.min_size}}}};
}

namespace {

std::string fnv1a_hex(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Fraction of pixels away from both 0 and 1; large values indicate a file
// that is not a segmentation mask.
double nonbinary_fraction(const Plane& p) {
    long bad = 0;
    for (float v : p.v)
        if (v > 0.1f && v < 0.9f) ++bad;
    return static_cast<double>(bad) / static_cast<double>(p.size());
}

}  // namespace

nlohmann::json read_manifest(const fs::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw IoError("no manifest.json in " + dir.string() + "; run prepare first");
    nlohmann::json j;
    is >> j;
    return j;
}

PrepareResult prepare_dataset(const PrepareOptions& options) {
    if (options.size <= 0 || options.size % 16 != 0)
        throw ConfigError("prepare: size must be a positive multiple of 16");
    if (options.out_dir.empty()) throw ConfigError("prepare: out_dir is required");

    PrepareResult result;
    result.dir = options.out_dir;
    result.param_hash = fnv1a_hex(options.to_json().dump());

    // Idempotence: an existing manifest with the same parameter hash wins.
    if (fs::exists(options.out_dir / "manifest.json")) {
        nlohmann::json manifest = read_manifest(options.out_dir);
        if (manifest.value("param_hash", "") == result.param_hash) {
            result.count = manifest.value("count", 0);
            result.reused = true;
            return result;
        }
    }

    fs::create_directories(options.out_dir / "images");
    fs::create_directories(options.out_dir / "masks");
    fs::create_directories(options.out_dir / "edges");
    if (options.superpixels) fs::create_directories(options.out_dir / "superpixels");

    struct RawEntry {
        std::string id;
        fs::path image, mask;  // empty for synthetic
        uint64_t synth_index = 0;
    };
    std::vector<RawEntry> raw;

    if (options.source == "real") {
        DatasetIndex index = load_dataset(options.real_root);
        result.orphans = index.orphans;
        for (const auto& e : index.entries) raw.push_back({e.id, e.image, e.mask, 0});
    } else if (options.source == "synthetic") {
        if (options.count < 1) throw ConfigError("prepare: synthetic count must be >= 1");
        for (int i = 0; i < options.count; ++i)
            raw.push_back({synthetic_id(static_cast<uint64_t>(i)), {}, {},
                           static_cast<uint64_t>(i)});
    } else {
        throw ConfigError("prepare: unknown source '" + options.source + "'");
    }

    std::vector<std::string> ids;
    for (const auto& entry : raw) {
        Plane image, mask;
        if (options.source == "real") {
            image = read_png_gray(entry.image);
            mask = read_png_gray(entry.mask);
            if (!image.same_shape(mask)) {
                result.warnings.push_back(entry.id + ": image/mask shape mismatch, skipped");
                continue;
            }
            if (nonbinary_fraction(mask) > 0.05) {
                result.warnings.push_back(entry.id + ": mask is not binary, skipped");
                continue;
            }
            threshold_binarize(mask, 0.5f);
        } else {
            SyntheticPair pair = synthetic_sample(options.size, options.seed, entry.synth_index);
            image = std::move(pair.image);
            mask = std::move(pair.mask);
        }

        bool constant = false;
        Sample s = preprocess_sample(image, mask, options.size, options.edge_radius, &constant);
        if (constant)
            result.warnings.push_back(entry.id + ": constant image normalized to zeros");
        s.id = entry.id;

        write_png_gray(options.out_dir / "images" / (entry.id + ".png"), s.image);
        write_png_gray(options.out_dir / "masks" / (entry.id + ".png"), s.mask);
        write_png_gray(options.out_dir / "edges" / (entry.id + ".png"), s.edge);
        if (options.superpixels) {
            // The channel is rendered from the stored 8-bit image so training
            // and prediction see exactly the same input.
            Plane stored = read_png_gray(options.out_dir / "images" / (entry.id + ".png"));
            Plane channel = superpixel_channel(stored, options.spx);
            write_png_gray(options.out_dir / "superpixels" / (entry.id + ".png"), channel);
        }
        ids.push_back(entry.id);
    }
    if (ids.empty()) throw ConfigError("prepare: no usable samples");

    nlohmann::json manifest = {{"param_hash", result.param_hash},
                               {"count", ids.size()},
                               {"size", options.size},
                               {"source", options.source},
                               {"superpixels", options.superpixels},
                               {"options", options.to_json()},
                               {"ids", ids},
                               {"orphans", result.orphans},
                               {"warnings", result.warnings}};
    std::ofstream(options.out_dir / "manifest.json") << manifest.dump(2) << "\n";
    result.count = static_cast<int>(ids.size());
    return result;
}

std::vector<Sample> load_prepared(const fs::path& dir) {
    nlohmann::json manifest = read_manifest(dir);
    const int size = manifest.at("size").get<int>();
    const bool spx = manifest.value("superpixels", false);
    std::vector<Sample> samples;
    for (const auto& id_json : manifest.at("ids")) {
        const std::string id = id_json.get<std::string>();
        Sample s;
        s.id = id;
        s.size = size;
        s.image = read_png_gray(dir / "images" / (id + ".png"));
        s.mask = read_png_gray(dir / "masks" / (id + ".png"));
        s.edge = read_png_gray(dir / "edges" / (id + ".png"));
        threshold_binarize(s.mask, 0.5f);
        threshold_binarize(s.edge, 0.5f);
        if (spx) s.superpixel = read_png_gray(dir / "superpixels" / (id + ".png"));
        if (s.image.h != size || s.mask.h != size)
            throw IoError("prepared sample " + id + " does not match the manifest size");
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace cf2net
