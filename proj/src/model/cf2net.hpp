#pragma once

#include <array>
#include <memory>

#include "model/config.hpp"
#include "nn/graph.hpp"

namespace cf2net {

// The three output heads plus the per-scale edge features. Pointers are null
// when the corresponding unit is disabled.
struct PredictionSet {
    const nn::Tensor* fusion = nullptr;          // P^F, S x S in [0,1]
    const nn::Tensor* aux = nullptr;             // P^U
    const nn::Tensor* edge = nullptr;            // P^e
    std::array<const nn::Tensor*, 4> em{};       // Em^i, index 0 = scale 1

    // Map used for the final segmentation: fusion when present, else aux.
    const nn::Tensor& primary() const { return fusion ? *fusion : *aux; }
};

// Coarse-to-fine fusion network: a U-shaped backbone whose encoder/decoder
// features feed a fusion stream of per-scale modules (ASPP, cascade fusion,
// edge constraint, tiny U-Net), with fusion/auxiliary/edge sigmoid heads.
class Cf2Net {
 public:
    Cf2Net(const ModelConfig& config, uint64_t init_seed);

    // batch must be N x input_channels x S x S with S a multiple of 16.
    void forward(const nn::Tensor& batch, bool training);

    // Seeds are dL/d(head output); null pointers skip absent heads.
    void backward(const nn::Tensor* d_fusion, const nn::Tensor* d_aux,
                  const nn::Tensor* d_edge);

    PredictionSet predictions() const;

    bool has_fusion_head() const { return fusion_ != nullptr; }
    bool has_edge_head() const { return edge_ != nullptr; }

    // Intermediate features, mainly for shape checks.
    const nn::Tensor& encoder_features(int scale) const;  // E^i, pre-pooling
    const nn::Tensor& middle_features() const;            // M
    const nn::Tensor& decoder_features(int scale) const;  // D^i
    const nn::Tensor& fsp_features(int scale) const;      // L^i

    nn::Graph& graph() { return *graph_; }
    const nn::Graph& graph() const { return *graph_; }
    const ModelConfig& config() const { return config_; }
    size_t parameter_count() const { return graph_->parameter_count(); }

 private:
    void build();

    ModelConfig config_;
    std::unique_ptr<nn::Graph> graph_;
    nn::Node* input_ = nullptr;
    std::array<nn::Node*, 4> enc_{};   // E^1..E^4 (pre-pooling)
    nn::Node* mid_ = nullptr;          // M
    std::array<nn::Node*, 4> dec_{};   // D^1..D^4
    std::array<nn::Node*, 4> fsp_{};   // L^1..L^4
    std::array<nn::Node*, 4> em_{};    // Em^1..Em^4
    nn::Node* fusion_ = nullptr;       // sigmoid head on L^1
    nn::Node* aux_ = nullptr;          // sigmoid head on D^1
    nn::Node* edge_ = nullptr;         // sigmoid edge head
};

}  // namespace cf2net
