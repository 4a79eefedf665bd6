#include "train/selftest.hpp"

#include <cmath>
#include <iostream>

#include "common/rng.hpp"
#include "data/dataset.hpp"
#include "metrics/metrics.hpp"
#include "model/cf2net.hpp"
#include "nn/gemm.hpp"
#include "nn/optim.hpp"
#include "superpixel/slic.hpp"
#include "train/trainer.hpp"

namespace cf2net {

OverfitOptions OverfitOptions::tiny() {
    OverfitOptions o;
    o.model.base_width = 8;
    o.model.fsp_width = 32;
    o.model.size = 64;
    o.model.use_superpixel = false;
    return o;
}

OverfitResult overfit_smoke_test(const OverfitOptions& options) {
    options.model.validate();
    options.loss.validate();
    nn::set_gemm_threads(options.threads);

    const int S = options.model.size;
    const size_t plane = static_cast<size_t>(S) * S;
    const int n = 4;

    std::vector<Sample> samples;
    for (int i = 0; i < n; ++i) {
        SyntheticPair pair = synthetic_sample(S, options.seed, static_cast<uint64_t>(i));
        Sample s;
        s.id = synthetic_id(static_cast<uint64_t>(i));
        s.size = S;
        s.image = std::move(pair.image);
        s.mask = std::move(pair.mask);
        s.edge = make_edge_target(s.mask, 5);
        if (options.model.use_superpixel) {
            SuperpixelParams spx;
            s.superpixel = superpixel_channel(s.image, spx);
        }
        samples.push_back(std::move(s));
    }

    Cf2Net model(options.model, Rng::derive(options.seed, 0x0F17));
    auto optimizer = nn::make_optimizer(options.optimizer, options.lr, 0.9);
    auto trainable = model.graph().trainable_params();

    std::vector<size_t> indices(n);
    for (int i = 0; i < n; ++i) indices[i] = static_cast<size_t>(i);
    nn::Tensor batch = make_batch(samples, indices, 0, n, options.model.use_superpixel);

    const bool use_fusion = model.has_fusion_head();
    const bool use_edge = model.has_edge_head();
    nn::Tensor d_fusion, d_aux, d_edge;

    OverfitResult result;
    for (int step = 0; step < options.max_steps; ++step) {
        model.forward(batch, true);
        PredictionSet preds = model.predictions();

        if (use_fusion) {
            d_fusion.resize(n, 1, S, S);
            d_fusion.zero();
        }
        d_aux.resize(n, 1, S, S);
        d_aux.zero();
        if (use_edge) {
            d_edge.resize(n, 1, S, S);
            d_edge.zero();
        }

        double total = 0;
        for (int b = 0; b < n; ++b) {
            std::span<const float> pf, pe;
            std::span<float> df, de;
            if (use_fusion) {
                pf = {preds.fusion->at(b), plane};
                df = {d_fusion.at(b), plane};
            }
            if (use_edge) {
                pe = {preds.edge->at(b), plane};
                de = {d_edge.at(b), plane};
            }
            std::span<const float> pu{preds.aux->at(b), plane};
            std::span<float> du{d_aux.at(b), plane};
            std::span<const float> ys{samples[b].mask.v.data(), plane};
            std::span<const float> ye{samples[b].edge.v.data(), plane};
            total += total_loss<float>(pf, pu, pe, ys, ye, options.loss, df, du, de).total;
        }
        total /= n;
        const float inv_b = 1.f / n;
        for (auto* t : {&d_fusion, &d_aux, &d_edge})
            for (float& g : t->v) g *= inv_b;

        result.losses.push_back(total);
        if (step == 0) result.initial_loss = total;
        result.final_loss = total;
        result.steps_run = step + 1;
        if (!std::isfinite(total)) {
            result.grads_finite = false;
            break;
        }

        model.backward(use_fusion ? &d_fusion : nullptr, &d_aux, use_edge ? &d_edge : nullptr);
        if (!model.graph().grads_finite()) {
            result.grads_finite = false;
            break;
        }
        optimizer->step(trainable);

        if (options.early_stop && total < 0.1 * result.initial_loss) break;
    }
    result.passed = result.grads_finite && result.final_loss < 0.1 * result.initial_loss;
    return result;
}

namespace {

// Independent scalar finite-difference check of the loss gradients.
bool gradient_selfcheck(std::string& detail) {
    Rng rng(0xC0FFEE);
    const int n = 16;
    bool ok = true;
    for (int trial = 0; trial < 8 && ok; ++trial) {
        std::vector<double> p(n), y(n);
        for (int i = 0; i < n; ++i) {
            p[i] = rng.uniform(0.02, 0.98);
            y[i] = rng.next_double() < 0.5 ? 0.0 : 1.0;
        }
        LossWeights lw;
        lw.paper_literal_dice = trial % 2 == 1;
        std::vector<double> grad(n);
        region_loss<double>(p, y, lw, grad);
        for (int i = 0; i < n && ok; ++i) {
            const double h = 1e-6;
            std::vector<double> pp = p, pm = p;
            pp[i] += h;
            pm[i] -= h;
            double fd = (region_loss<double>(pp, y, lw) - region_loss<double>(pm, y, lw)) /
                        (2 * h);
            double denom = std::max({1.0, std::abs(fd), std::abs(grad[i])});
            if (std::abs(fd - grad[i]) / denom > 1e-4) {
                detail = "region_loss gradient mismatch at element " + std::to_string(i);
                ok = false;
            }
        }
    }
    return ok;
}

// Metric identities on random masks.
bool metric_selfcheck(std::string& detail) {
    Rng rng(0xBEEF);
    for (int trial = 0; trial < 100; ++trial) {
        Plane a(8, 8), b(8, 8);
        for (size_t i = 0; i < a.size(); ++i) {
            a.v[i] = rng.next_double() < 0.4 ? 1.f : 0.f;
            b.v[i] = rng.next_double() < 0.4 ? 1.f : 0.f;
        }
        auto c = confusion_counts(a, b);
        if (c.total() != 64) {
            detail = "confusion counts do not partition the grid";
            return false;
        }
        double d = dsc(c), s = sen(c), p = ppv(c);
        if (d < 0 || d > 1 || s < 0 || s > 1 || p < 0 || p > 1) {
            detail = "metric out of range";
            return false;
        }
        if (s > 0 && p > 0) {
            double harmonic = 2 * s * p / (s + p);
            if (std::abs(harmonic - d) > 1e-12) {
                detail = "dsc is not the harmonic mean of sen and ppv";
                return false;
            }
        }
    }
    return true;
}

}  // namespace

nlohmann::json run_selftest(const OverfitOptions& options) {
    nlohmann::json report;
    std::string detail;

    bool grad_ok = gradient_selfcheck(detail);
    report["gradient_check"] = {{"passed", grad_ok}, {"detail", grad_ok ? "ok" : detail}};

    detail.clear();
    bool metric_ok = metric_selfcheck(detail);
    report["metric_check"] = {{"passed", metric_ok}, {"detail", metric_ok ? "ok" : detail}};

    OverfitResult overfit = overfit_smoke_test(options);
    report["overfit"] = {{"passed", overfit.passed},
                         {"initial_loss", overfit.initial_loss},
                         {"final_loss", overfit.final_loss},
                         {"steps", overfit.steps_run},
                         {"grads_finite", overfit.grads_finite}};

    report["passed"] = grad_ok && metric_ok && overfit.passed;
    return report;
}

}  // namespace cf2net
