#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "losses/losses.hpp"
#include "metrics/metrics.hpp"
#include "model/cf2net.hpp"

namespace cf2net {

struct TrainConfig {
    ModelConfig model;
    LossWeights loss;
    std::string optimizer = "adagrad";
    double lr = 6e-4;
    double momentum = 0.0;   // only used by sgd_momentum
    double grad_clip = 0.0;  // 0 disables clipping
    int batch_size = 4;
    int epochs = 500;
    int folds = 4;
    uint64_t seed = 42;
    int threads = 0;  // 0 = hardware
    bool flip_augment = false;
    std::filesystem::path out_dir = "runs/default";

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0;
    double loss_fusion = 0;
    double loss_aux = 0;
    double loss_edge = 0;
    double val_dsc = 0;
    double seconds = 0;
};

struct TrainHistory {
    std::vector<EpochRecord> records;
    std::set<std::string> train_ids;  // every id that appeared in a training batch
};

struct FoldArtifacts {
    int fold = 0;
    std::filesystem::path best_checkpoint;
    std::filesystem::path final_checkpoint;
    std::filesystem::path history_log;
    int best_epoch = 0;
    double best_val_dsc = 0;
    TrainHistory history;
};

// Trains on every fold except fold_id and validates on fold_id each epoch.
// Persists best-by-validation-DSC and final checkpoints plus an append-only
// history log under out_dir/fold<id>/.
FoldArtifacts train_fold(const TrainConfig& config, const std::vector<Sample>& samples,
                         const FoldSplit& folds, int fold_id);

// Full k-fold protocol: train each fold, evaluate its best checkpoint on the
// held-out fold, aggregate. Writes report.json/report.txt under out_dir.
MetricsReport cross_validate(const TrainConfig& config, const std::vector<Sample>& samples);

// Per-image metrics of a checkpointed model over a set of samples.
std::vector<ImageMetrics> evaluate_samples(Cf2Net& model, const std::vector<Sample>& samples,
                                           const std::vector<size_t>& indices, int fold_id,
                                           int batch_size);

// Stepwise ablation grid. Variant names: unet, unetw, cf2c, cf2c_aspp,
// cf2c_aspp_ec, cf2net_full.
extern const std::vector<std::string> kAblationVariants;
TrainConfig apply_variant(const TrainConfig& base, const std::string& variant);
nlohmann::json run_ablation(const TrainConfig& base, const std::vector<std::string>& variants,
                            const std::vector<Sample>& samples);
std::string ablation_table(const nlohmann::json& ablation);

// Assembles the network input batch for the given sample indices.
nn::Tensor make_batch(const std::vector<Sample>& samples, const std::vector<size_t>& indices,
                      size_t first, size_t count, bool use_superpixel);

}  // namespace cf2net
