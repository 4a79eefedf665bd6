#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "common/rng.hpp"
#include "nn/tensor.hpp"

namespace cf2net::nn {

class Graph;

// Learnable array (or batch-norm running buffer when trainable is false).
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;
    bool trainable = true;

    size_t count() const { return value.size(); }
};

class Node {
 public:
    virtual ~Node() = default;
    const Tensor& out() const { return out_; }
    Tensor& grad() { return grad_; }
    int channels() const { return channels_; }
    const std::string& name() const { return name_; }
    virtual void forward(bool training) = 0;
    virtual void backward() {}

 protected:
    friend class Graph;
    Graph* g_ = nullptr;
    std::string name_;
    std::vector<Node*> in_;
    int channels_ = 0;
    Tensor out_;
    Tensor grad_;
};

// Static computation graph. Nodes are executed in creation order, which is
// required to be topological (builders only reference existing nodes).
class Graph {
 public:
    explicit Graph(uint64_t init_seed);
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Node* input(int channels, const std::string& name = "input");
    // Same-padded convolution; he_normal weights, zero bias.
    Node* conv(Node* x, int out_channels, int ksize, int dilation, const std::string& pname);
    Node* bn(Node* x, const std::string& pname);
    Node* relu(Node* x);
    Node* sigmoid(Node* x);
    Node* maxpool2(Node* x);
    Node* upsample(Node* x, int rate);
    Node* concat(const std::vector<Node*>& xs);
    Node* add(const std::vector<Node*>& xs);

    void set_input(Node* input_node, const Tensor& value);
    void forward(bool training);
    // Seeds are (head node, dL/d out) pairs; gradients flow to every param.
    void backward(const std::vector<std::pair<Node*, const Tensor*>>& seeds);

    Param* add_param(const std::string& name, std::vector<int> shape, bool trainable);
    Param* find_param(const std::string& name) const;
    const std::vector<std::unique_ptr<Param>>& params() const { return params_; }
    std::vector<Param*> trainable_params() const;
    size_t parameter_count() const;  // trainable scalars
    void zero_param_grads();

    bool grads_finite() const;

    std::vector<float>& scratch(size_t count);
    Rng& init_rng() { return rng_; }

 private:
    template <typename T, typename... Args>
    T* emplace(Args&&... args);

    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<std::unique_ptr<Param>> params_;
    std::unordered_map<std::string, Param*> param_index_;
    std::vector<float> scratch_;
    Rng rng_;
};

}  // namespace cf2net::nn
