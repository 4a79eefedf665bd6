#include "train/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "common/errors.hpp"

namespace cf2net {

namespace {

constexpr char kMagic[8] = {'C', 'F', '2', 'N', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Cf2Net& model,
                     const nn::Optimizer* optimizer, const nlohmann::json& meta) {
    nlohmann::json header;
    header["model"] = model.config().to_json();
    header["meta"] = meta;

    uint64_t offset = 0;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& p : model.graph().params()) {
        tensors.push_back({{"name", p->name},
                           {"shape", p->shape},
                           {"offset", offset},
                           {"count", p->count()},
                           {"trainable", p->trainable}});
        offset += p->count();
    }
    header["tensors"] = tensors;

    nlohmann::json opt = nlohmann::json::object();
    if (optimizer) {
        opt["kind"] = optimizer->kind();
        nlohmann::json entries = nlohmann::json::array();
        // Sorted for a stable file layout.
        std::vector<const std::string*> names;
        auto& state = const_cast<nn::Optimizer*>(optimizer)->state();
        for (const auto& [name, buf] : state) names.push_back(&name);
        std::sort(names.begin(), names.end(),
                  [](const std::string* a, const std::string* b) { return *a < *b; });
        for (const auto* name : names) {
            entries.push_back({{"name", *name}, {"offset", offset}, {"count", state[*name].size()}});
            offset += state[*name].size();
        }
        opt["entries"] = entries;
    }
    header["optimizer"] = opt;

    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint: " + path.string());

    const std::string header_text = header.dump();
    os.write(kMagic, sizeof(kMagic));
    write_u64(os, header_text.size());
    os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& p : model.graph().params())
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(p->count() * sizeof(float)));
    if (optimizer) {
        auto& state = const_cast<nn::Optimizer*>(optimizer)->state();
        for (const auto& entry : opt["entries"]) {
            const auto& buf = state[entry["name"].get<std::string>()];
            os.write(reinterpret_cast<const char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
    }
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    uint64_t header_len = read_u64(is);
    std::string header_text(header_len, '\0');
    is.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!is) throw IoError("truncated checkpoint header: " + path.string());
    nlohmann::json header = nlohmann::json::parse(header_text);

    LoadedCheckpoint out;
    out.config = ModelConfig::from_json(header.at("model"));
    out.meta = header.value("meta", nlohmann::json::object());
    uint64_t init_seed = out.meta.value("seed", 0ull);
    out.model = std::make_unique<Cf2Net>(out.config, init_seed);

    const std::streampos payload_start = is.tellg();
    auto read_block = [&](uint64_t offset, float* dst, size_t count) {
        is.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(float)));
        is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(float)));
        if (!is) throw IoError("truncated checkpoint payload: " + path.string());
    };

    for (const auto& t : header.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        nn::Param* p = out.model->graph().find_param(name);
        if (!p) throw ConfigError("checkpoint parameter not in model: " + name);
        if (p->count() != t.at("count").get<size_t>())
            throw ConfigError("checkpoint parameter size mismatch: " + name);
        read_block(t.at("offset").get<uint64_t>(), p->value.data(), p->count());
    }
    // Every model parameter must have been covered.
    size_t expected = out.model->graph().params().size();
    if (header.at("tensors").size() != expected)
        throw ConfigError("checkpoint does not cover all model parameters");

    const auto& opt = header.at("optimizer");
    if (opt.contains("kind")) {
        out.optimizer_kind = opt.at("kind").get<std::string>();
        for (const auto& entry : opt.at("entries")) {
            std::vector<float> buf(entry.at("count").get<size_t>());
            read_block(entry.at("offset").get<uint64_t>(), buf.data(), buf.size());
            out.optim_state[entry.at("name").get<std::string>()] = std::move(buf);
        }
    }
    return out;
}

}  // namespace cf2net
