#include "nn/optim.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace cf2net::nn {

void Adagrad::step(const std::vector<Param*>& params) {
    for (Param* p : params) {
        auto& acc = accum_[p->name];
        if (acc.size() != p->count()) acc.assign(p->count(), 0.f);
        const float lr = static_cast<float>(lr_);
        const float eps = static_cast<float>(eps_);
        for (size_t i = 0; i < p->count(); ++i) {
            float g = p->grad[i];
            acc[i] += g * g;
            p->value[i] -= lr * g / (std::sqrt(acc[i]) + eps);
        }
    }
}

void SgdMomentum::step(const std::vector<Param*>& params) {
    for (Param* p : params) {
        auto& vel = velocity_[p->name];
        if (vel.size() != p->count()) vel.assign(p->count(), 0.f);
        const float lr = static_cast<float>(lr_);
        const float mom = static_cast<float>(momentum_);
        for (size_t i = 0; i < p->count(); ++i) {
            vel[i] = mom * vel[i] - lr * p->grad[i];
            p->value[i] += vel[i];
        }
    }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr,
                                          double momentum) {
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    if (name == "adagrad") return std::make_unique<Adagrad>(lr);
    if (name == "sgd_momentum") return std::make_unique<SgdMomentum>(lr, momentum);
    throw ConfigError("unknown optimizer: " + name);
}

void clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
    if (max_norm <= 0) return;
    double sq = 0;
    for (const Param* p : params)
        for (float g : p->grad) sq += static_cast<double>(g) * g;
    double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const float scale = static_cast<float>(max_norm / norm);
    for (Param* p : params)
        for (float& g : p->grad) g *= scale;
}

}  // namespace cf2net::nn
