#pragma once

#include <filesystem>
#include <string>

#include "data/prepare.hpp"
#include "train/selftest.hpp"
#include "train/trainer.hpp"

namespace cf2net {

// Declarative experiment description. A run's fully resolved configuration
// is persisted next to its outputs; flag > file > default precedence is the
// caller's responsibility (merge order).
class ExperimentConfig {
 public:
    static ExperimentConfig defaults();
    static ExperimentConfig from_json(const nlohmann::json& j);  // defaults + overrides
    static ExperimentConfig load_file(const std::filesystem::path& path);

    // Deep merge: objects merge recursively, scalars and arrays replace.
    void merge(const nlohmann::json& overrides);
    // Dotted-path override, e.g. set("model.base_width", "16").
    void set(const std::string& dotted_key, const std::string& value);

    const nlohmann::json& json() const { return j_; }
    std::string dump(int indent = 2) const { return j_.dump(indent); }

    TrainConfig train_config() const;
    PrepareOptions prepare_options() const;
    OverfitOptions overfit_options() const;
    std::filesystem::path out_dir() const;
    std::filesystem::path prepared_dir() const;
    std::vector<std::string> ablation_variants() const;

    void persist(const std::filesystem::path& dir) const;  // writes config.json

 private:
    nlohmann::json j_;
};

}  // namespace cf2net
