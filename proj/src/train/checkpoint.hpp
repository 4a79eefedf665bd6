#pragma once

#include <filesystem>
#include <memory>

#include "model/cf2net.hpp"
#include "nn/optim.hpp"

namespace cf2net {

// Single-file archive: a JSON header (model config, free-form metadata,
// tensor index) followed by raw little-endian float32 payloads. Parameter
// keys follow the hierarchical naming of the graph builder and are stable
// across versions.
void save_checkpoint(const std::filesystem::path& path, const Cf2Net& model,
                     const nn::Optimizer* optimizer, const nlohmann::json& meta);

struct LoadedCheckpoint {
    ModelConfig config;
    nlohmann::json meta;
    std::string optimizer_kind;  // empty when no optimizer state was saved
    nn::OptimState optim_state;
    std::unique_ptr<Cf2Net> model;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cf2net
