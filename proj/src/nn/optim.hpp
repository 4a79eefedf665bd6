#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "nn/graph.hpp"

namespace cf2net::nn {

// Per-parameter optimizer state, serialized into checkpoints.
using OptimState = std::unordered_map<std::string, std::vector<float>>;

class Optimizer {
 public:
    virtual ~Optimizer() = default;
    virtual void step(const std::vector<Param*>& params) = 0;
    virtual const char* kind() const = 0;
    virtual OptimState& state() = 0;
};

// Adaptive gradient method: accumulates squared gradients and scales each
// update by 1/sqrt(accumulator).
class Adagrad : public Optimizer {
 public:
    explicit Adagrad(double lr, double eps = 1e-7) : lr_(lr), eps_(eps) {}
    void step(const std::vector<Param*>& params) override;
    const char* kind() const override { return "adagrad"; }
    OptimState& state() override { return accum_; }

 private:
    double lr_;
    double eps_;
    OptimState accum_;
};

class SgdMomentum : public Optimizer {
 public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
    void step(const std::vector<Param*>& params) override;
    const char* kind() const override { return "sgd_momentum"; }
    OptimState& state() override { return velocity_; }

 private:
    double lr_;
    double momentum_;
    OptimState velocity_;
};

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr,
                                          double momentum);

// Scales all gradients so their global L2 norm is at most max_norm.
void clip_grad_norm(const std::vector<Param*>& params, double max_norm);

}  // namespace cf2net::nn
