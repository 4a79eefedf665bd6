#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "common/errors.hpp"

namespace cf2net {

// Coefficients and switches for the weighted-balanced loss family.
//   lambda1..3  weight the fusion, auxiliary and edge terms of the total loss
//   mu1, mu2    weight dice vs cross entropy inside each region loss
//   weighted    false selects the plain (unweighted) dice + bce baseline loss
//   invert_balance      uses 1-w instead of w as the foreground dice weight
//   paper_literal_dice  keeps the printed form of the weighted dice, which
//                       drops the factor 2 from both numerators
struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 0.1;
    double mu1 = 1.0;
    double mu2 = 1.0;
    bool weighted = true;
    bool invert_balance = false;
    bool paper_literal_dice = false;
    double epsilon = 1e-6;

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || mu1 < 0 || mu2 < 0)
            throw ConfigError("loss weights must be non-negative");
        if (epsilon <= 0) throw ConfigError("loss epsilon must be positive");
    }
};

template <typename T>
struct BalanceWeight {
    T w = 0;      // N1 / (N1 + N0), or 1 - that when inverted
    long n1 = 0;  // foreground pixels
    long n0 = 0;  // background pixels
};

// Exact foreground-fraction weight of a binary map.
template <typename T>
BalanceWeight<T> balance_weight(std::span<const T> y, bool invert = false) {
    BalanceWeight<T> b;
    for (T v : y) {
        if (v != T(0))
            ++b.n1;
        else
            ++b.n0;
    }
    long n = b.n1 + b.n0;
    b.w = n > 0 ? T(b.n1) / T(n) : T(0);
    if (invert) b.w = T(1) - b.w;
    return b;
}

// Two-sided dice loss with the balance weight w on the foreground ratio and
// 1-w on the background ratio. `literal` drops the factor 2 from both
// numerators. Optional `dp` receives dL/dp (same length as p).
template <typename T>
T weighted_dice(std::span<const T> p, std::span<const T> y, T w, T eps, bool literal,
                std::span<T> dp = {}) {
    if (p.size() != y.size()) throw ShapeError("weighted_dice: shape mismatch");
    const T c = literal ? T(1) : T(2);
    T fg_num = 0, fg_den = 0, bg_num = 0, bg_den = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        fg_num += p[i] * y[i];
        fg_den += p[i] + y[i];
        bg_num += (T(1) - p[i]) * (T(1) - y[i]);
        bg_den += T(2) - p[i] - y[i];
    }
    const T a = c * fg_num + eps;
    const T b = fg_den + eps;
    const T u = c * bg_num + eps;
    const T v = bg_den + eps;
    T loss = T(1) - w * a / b - (T(1) - w) * u / v;
    if (!dp.empty()) {
        if (dp.size() != p.size()) throw ShapeError("weighted_dice: bad gradient buffer");
        const T inv_b2 = T(1) / (b * b);
        const T inv_v2 = T(1) / (v * v);
        for (size_t i = 0; i < p.size(); ++i) {
            // d(a/b) = (c*y*b - a) / b^2 ; d(u/v) = (-c*(1-y)*v + u) / v^2
            T d_fg = (c * y[i] * b - a) * inv_b2;
            T d_bg = (-c * (T(1) - y[i]) * v + u) * inv_v2;
            dp[i] = -w * d_fg - (T(1) - w) * d_bg;
        }
    }
    return loss;
}

// Plain foreground dice loss, 1 - (2*sum(py)+eps)/(sum(p)+sum(y)+eps).
template <typename T>
T dice_plain(std::span<const T> p, std::span<const T> y, T eps, std::span<T> dp = {}) {
    if (p.size() != y.size()) throw ShapeError("dice_plain: shape mismatch");
    T num = 0, den = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        num += p[i] * y[i];
        den += p[i] + y[i];
    }
    const T a = T(2) * num + eps;
    const T b = den + eps;
    if (!dp.empty()) {
        const T inv_b2 = T(1) / (b * b);
        for (size_t i = 0; i < p.size(); ++i) dp[i] = -(T(2) * y[i] * b - a) * inv_b2;
    }
    return T(1) - a / b;
}

// Mean binary cross entropy, -(1/N) sum[y log p + (1-y) log(1-p)],
// with p clamped to [eps, 1-eps].
template <typename T>
T bce(std::span<const T> p, std::span<const T> y, T eps, std::span<T> dp = {}) {
    if (p.size() != y.size()) throw ShapeError("bce: shape mismatch");
    const T n = T(p.size());
    T loss = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        T pc = std::clamp(p[i], eps, T(1) - eps);
        loss -= y[i] * std::log(pc) + (T(1) - y[i]) * std::log(T(1) - pc);
        if (!dp.empty()) dp[i] = -(y[i] / pc - (T(1) - y[i]) / (T(1) - pc)) / n;
    }
    return loss / n;
}

// Class-weighted cross entropy for the edge map, normalized by total pixel
// count: (1/N) * [-w sum_{y=1} log p - (1-w) sum_{y=0} log(1-p)].
template <typename T>
T weighted_edge_bce(std::span<const T> p, std::span<const T> y, T w, T eps,
                    std::span<T> dp = {}) {
    if (p.size() != y.size()) throw ShapeError("weighted_edge_bce: shape mismatch");
    const T n = T(p.size());
    T loss = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        T pc = std::clamp(p[i], eps, T(1) - eps);
        if (y[i] != T(0)) {
            loss -= w * std::log(pc);
            if (!dp.empty()) dp[i] = -w / pc / n;
        } else {
            loss -= (T(1) - w) * std::log(T(1) - pc);
            if (!dp.empty()) dp[i] = (T(1) - w) / (T(1) - pc) / n;
        }
    }
    return loss / n;
}

// mu1 * dice + mu2 * bce for one image; the balance weight is computed from y.
// In unweighted mode the dice term is the plain foreground dice.
template <typename T>
T region_loss(std::span<const T> p, std::span<const T> y, const LossWeights& lw,
              std::span<T> dp = {}) {
    const T eps = T(lw.epsilon);
    std::vector<T> dd, dc;
    std::span<T> dds, dcs;
    if (!dp.empty()) {
        dd.resize(p.size());
        dc.resize(p.size());
        dds = dd;
        dcs = dc;
    }
    T ld;
    if (lw.weighted) {
        auto bw = balance_weight(y, lw.invert_balance);
        ld = weighted_dice(p, y, bw.w, eps, lw.paper_literal_dice, dds);
    } else {
        ld = dice_plain(p, y, eps, dds);
    }
    T lc = bce(p, y, eps, dcs);
    if (!dp.empty())
        for (size_t i = 0; i < p.size(); ++i)
            dp[i] = T(lw.mu1) * dd[i] + T(lw.mu2) * dc[i];
    return T(lw.mu1) * ld + T(lw.mu2) * lc;
}

// Per-image components of the total loss; edge term present only when the
// edge head exists.
template <typename T>
struct TotalLossParts {
    T total = 0;
    T fusion = 0;
    T aux = 0;
    T edge = 0;
};

// lambda1 * L(p_fusion) + lambda2 * L(p_aux) + lambda3 * L_edge(p_edge), for
// one image. Null spans mean the head is absent and its term is omitted.
template <typename T>
TotalLossParts<T> total_loss(std::span<const T> p_fusion, std::span<const T> p_aux,
                             std::span<const T> p_edge, std::span<const T> y_region,
                             std::span<const T> y_edge, const LossWeights& lw,
                             std::span<T> d_fusion = {}, std::span<T> d_aux = {},
                             std::span<T> d_edge = {}) {
    TotalLossParts<T> parts;
    if (!p_fusion.empty()) {
        parts.fusion = region_loss(p_fusion, y_region, lw, d_fusion);
        if (!d_fusion.empty())
            for (auto& g : d_fusion) g *= T(lw.lambda1);
    }
    if (!p_aux.empty()) {
        parts.aux = region_loss(p_aux, y_region, lw, d_aux);
        if (!d_aux.empty())
            for (auto& g : d_aux) g *= T(lw.lambda2);
    }
    if (!p_edge.empty()) {
        auto bw = balance_weight(y_edge, lw.invert_balance);
        parts.edge = weighted_edge_bce(p_edge, y_edge, bw.w, T(lw.epsilon), d_edge);
        if (!d_edge.empty())
            for (auto& g : d_edge) g *= T(lw.lambda3);
    }
    parts.total = T(lw.lambda1) * parts.fusion + T(lw.lambda2) * parts.aux +
                  T(lw.lambda3) * parts.edge;
    return parts;
}

}  // namespace cf2net
