#include "train/trainer.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "common/rng.hpp"
#include "nn/gemm.hpp"
#include "nn/optim.hpp"
#include "train/checkpoint.hpp"

namespace cf2net {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    model.validate();
    loss.validate();
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (lr <= 0) throw ConfigError("train: learning rate must be positive");
    if (folds < 2) throw ConfigError("train: fold count must be >= 2");
}

namespace {

void apply_threads(int threads) {
    nn::set_gemm_threads(threads);
    if (threads > 0) omp_set_num_threads(threads);
}

void check_samples(const TrainConfig& config, const std::vector<Sample>& samples) {
    for (const auto& s : samples) {
        if (s.size != config.model.size)
            throw ConfigError("sample " + s.id + " has size " + std::to_string(s.size) +
                              " but the model expects " + std::to_string(config.model.size));
        if (config.model.use_superpixel && s.superpixel.size() != s.image.size())
            throw ConfigError("sample " + s.id +
                              " has no superpixel channel; run prepare with superpixels "
                              "enabled or disable use_superpixel");
    }
}

// Horizontal flip of one plane.
Plane hflip(const Plane& p) {
    Plane out(p.h, p.w);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) out.at(y, x) = p.at(y, p.w - 1 - x);
    return out;
}

struct BatchTargets {
    std::vector<const Plane*> mask;
    std::vector<const Plane*> edge;
    std::vector<Plane> owned;  // backing storage for augmented planes
};

}  // namespace

nn::Tensor make_batch(const std::vector<Sample>& samples, const std::vector<size_t>& indices,
                      size_t first, size_t count, bool use_superpixel) {
    const int S = samples[indices[first]].size;
    nn::Tensor batch(static_cast<int>(count), use_superpixel ? 2 : 1, S, S);
    for (size_t b = 0; b < count; ++b) {
        const Sample& s = samples[indices[first + b]];
        std::copy(s.image.v.begin(), s.image.v.end(), batch.at(static_cast<int>(b), 0));
        if (use_superpixel)
            std::copy(s.superpixel.v.begin(), s.superpixel.v.end(),
                      batch.at(static_cast<int>(b), 1));
    }
    return batch;
}

FoldArtifacts train_fold(const TrainConfig& config, const std::vector<Sample>& samples,
                         const FoldSplit& folds, int fold_id) {
    config.validate();
    if (fold_id < 0 || fold_id >= folds.k) throw ConfigError("train_fold: invalid fold id");
    check_samples(config, samples);
    apply_threads(config.threads);

    const int S = config.model.size;
    const bool spx = config.model.use_superpixel;
    const auto train_idx_base = folds.train_indices(fold_id);
    const auto val_idx = folds.fold_indices(fold_id);
    if (train_idx_base.empty() || val_idx.empty())
        throw ConfigError("train_fold: empty train or validation split");

    Cf2Net model(config.model, Rng::derive(config.seed, 0x90DE1 + fold_id));
    auto optimizer = nn::make_optimizer(config.optimizer, config.lr, config.momentum);
    auto trainable = model.graph().trainable_params();

    FoldArtifacts art;
    art.fold = fold_id;
    fs::path fold_dir = config.out_dir / ("fold" + std::to_string(fold_id));
    fs::create_directories(fold_dir);
    art.best_checkpoint = fold_dir / "best.ckpt";
    art.final_checkpoint = fold_dir / "final.ckpt";
    art.history_log = fold_dir / "history.jsonl";
    art.best_val_dsc = -1.0;

    std::ofstream history_stream(art.history_log, std::ios::trunc);
    Rng shuffle_rng(Rng::derive(config.seed, 0x5FF1E + fold_id));

    const size_t plane = static_cast<size_t>(S) * S;
    nn::Tensor d_fusion, d_aux, d_edge;
    const bool use_edge = model.has_edge_head();
    const bool use_fusion = model.has_fusion_head();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<size_t> order = train_idx_base;
        shuffle_rng.shuffle(order);

        double sum_total = 0, sum_f = 0, sum_u = 0, sum_e = 0;
        size_t seen = 0;

        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t bsz = std::min<size_t>(config.batch_size, order.size() - start);

            std::vector<Plane> aug;  // flipped planes live for the whole step
            nn::Tensor batch;
            std::vector<const Plane*> masks(bsz), edges(bsz);
            if (config.flip_augment) {
                aug.reserve(bsz * 4);
                batch.resize(static_cast<int>(bsz), spx ? 2 : 1, S, S);
                for (size_t b = 0; b < bsz; ++b) {
                    const Sample& s = samples[order[start + b]];
                    bool flip = shuffle_rng.next_double() < 0.5;
                    const Plane* img = &s.image;
                    const Plane* sp = &s.superpixel;
                    masks[b] = &s.mask;
                    edges[b] = &s.edge;
                    if (flip) {
                        aug.push_back(hflip(s.image));
                        img = &aug.back();
                        if (spx) {
                            aug.push_back(hflip(s.superpixel));
                            sp = &aug.back();
                        }
                        aug.push_back(hflip(s.mask));
                        masks[b] = &aug.back();
                        aug.push_back(hflip(s.edge));
                        edges[b] = &aug.back();
                    }
                    std::copy(img->v.begin(), img->v.end(), batch.at(static_cast<int>(b), 0));
                    if (spx) std::copy(sp->v.begin(), sp->v.end(), batch.at(static_cast<int>(b), 1));
                }
            } else {
                batch = make_batch(samples, order, start, bsz, spx);
                for (size_t b = 0; b < bsz; ++b) {
                    masks[b] = &samples[order[start + b]].mask;
                    edges[b] = &samples[order[start + b]].edge;
                }
            }
            for (size_t b = 0; b < bsz; ++b)
                art.history.train_ids.insert(samples[order[start + b]].id);

            model.forward(batch, true);
            PredictionSet preds = model.predictions();

            if (use_fusion) {
                d_fusion.resize(static_cast<int>(bsz), 1, S, S);
                d_fusion.zero();
            }
            d_aux.resize(static_cast<int>(bsz), 1, S, S);
            d_aux.zero();
            if (use_edge) {
                d_edge.resize(static_cast<int>(bsz), 1, S, S);
                d_edge.zero();
            }

            double batch_total = 0, batch_f = 0, batch_u = 0, batch_e = 0;
            for (size_t b = 0; b < bsz; ++b) {
                std::span<const float> pf, pe;
                std::span<float> df, de;
                if (use_fusion) {
                    pf = {preds.fusion->at(static_cast<int>(b)), plane};
                    df = {d_fusion.at(static_cast<int>(b)), plane};
                }
                std::span<const float> pu{preds.aux->at(static_cast<int>(b)), plane};
                std::span<float> du{d_aux.at(static_cast<int>(b)), plane};
                if (use_edge) {
                    pe = {preds.edge->at(static_cast<int>(b)), plane};
                    de = {d_edge.at(static_cast<int>(b)), plane};
                }
                std::span<const float> ys{masks[b]->v.data(), plane};
                std::span<const float> ye{edges[b]->v.data(), plane};

                auto parts = total_loss<float>(pf, pu, pe, ys, ye, config.loss, df, du, de);
                batch_total += parts.total;
                batch_f += parts.fusion;
                batch_u += parts.aux;
                batch_e += parts.edge;
            }
            // Batch mean.
            const float inv_b = 1.f / static_cast<float>(bsz);
            for (auto* t : {&d_fusion, &d_aux, &d_edge})
                for (float& g : t->v) g *= inv_b;

            auto check = [&](double v, const char* component) {
                if (!std::isfinite(v))
                    throw NumericError("non-finite " + std::string(component) +
                                       " loss at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(start / config.batch_size) + " (fold " +
                                       std::to_string(fold_id) + ")");
            };
            check(batch_f, "fusion");
            check(batch_u, "auxiliary");
            check(batch_e, "edge");

            model.backward(use_fusion ? &d_fusion : nullptr, &d_aux,
                           use_edge ? &d_edge : nullptr);
            if (config.grad_clip > 0) nn::clip_grad_norm(trainable, config.grad_clip);
            optimizer->step(trainable);

            sum_total += batch_total;
            sum_f += batch_f;
            sum_u += batch_u;
            sum_e += batch_e;
            seen += bsz;
        }

        // Validation on the held-out fold.
        auto val_metrics = evaluate_samples(model, samples, val_idx, fold_id, config.batch_size);
        double val_dsc = 0;
        for (const auto& m : val_metrics) val_dsc += m.dsc;
        val_dsc /= val_metrics.size();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = sum_total / seen;
        rec.loss_fusion = sum_f / seen;
        rec.loss_aux = sum_u / seen;
        rec.loss_edge = sum_e / seen;
        rec.val_dsc = val_dsc;
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        art.history.records.push_back(rec);

        history_stream << nlohmann::json({{"epoch", rec.epoch},
                                          {"loss", rec.loss},
                                          {"loss_fusion", rec.loss_fusion},
                                          {"loss_aux", rec.loss_aux},
                                          {"loss_edge", rec.loss_edge},
                                          {"val_dsc", rec.val_dsc},
                                          {"seconds", rec.seconds}})
                              .dump()
                       << "\n";
        history_stream.flush();

        nlohmann::json meta = {{"epoch", epoch},
                               {"fold", fold_id},
                               {"seed", config.seed},
                               {"val_dsc", val_dsc},
                               {"selection", "best_val_dsc"}};
        if (val_dsc > art.best_val_dsc) {
            art.best_val_dsc = val_dsc;
            art.best_epoch = epoch;
            save_checkpoint(art.best_checkpoint, model, optimizer.get(), meta);
        }
        if (epoch == config.epochs)
            save_checkpoint(art.final_checkpoint, model, optimizer.get(), meta);
    }
    return art;
}

std::vector<ImageMetrics> evaluate_samples(Cf2Net& model, const std::vector<Sample>& samples,
                                           const std::vector<size_t>& indices, int fold_id,
                                           int batch_size) {
    const int S = model.config().size;
    const bool spx = model.config().use_superpixel;
    std::vector<ImageMetrics> out;
    for (size_t start = 0; start < indices.size(); start += batch_size) {
        const size_t bsz = std::min<size_t>(batch_size, indices.size() - start);
        nn::Tensor batch = make_batch(samples, indices, start, bsz, spx);
        model.forward(batch, false);
        const nn::Tensor& prob = model.predictions().primary();
        for (size_t b = 0; b < bsz; ++b) {
            const Sample& s = samples[indices[start + b]];
            Plane pred(S, S);
            const float* p = prob.at(static_cast<int>(b));
            for (size_t i = 0; i < pred.size(); ++i) pred.v[i] = p[i] > 0.5f ? 1.f : 0.f;
            auto c = confusion_counts(pred, s.mask);
            out.push_back({s.id, fold_id, dsc(c), sen(c), ppv(c)});
        }
    }
    return out;
}

MetricsReport cross_validate(const TrainConfig& config, const std::vector<Sample>& samples) {
    config.validate();
    check_samples(config, samples);
    FoldSplit folds = make_folds(samples.size(), config.folds, config.seed);

    std::vector<ImageMetrics> per_image;
    for (int fold = 0; fold < folds.k; ++fold) {
        FoldArtifacts art = train_fold(config, samples, folds, fold);
        auto loaded = load_checkpoint(art.best_checkpoint);
        auto metrics =
            evaluate_samples(*loaded.model, samples, folds.fold_indices(fold), fold,
                             config.batch_size);
        per_image.insert(per_image.end(), metrics.begin(), metrics.end());
        std::cerr << "[cf2net] fold " << fold << " done, best epoch " << art.best_epoch
                  << ", best val DSC " << art.best_val_dsc << "\n";
    }

    MetricsReport report = aggregate_report(per_image);
    fs::create_directories(config.out_dir);
    std::ofstream(config.out_dir / "report.json") << report_to_json(report).dump(2) << "\n";
    std::ofstream(config.out_dir / "report.txt") << report_table(report, "cf2net");
    return report;
}

const std::vector<std::string> kAblationVariants = {"unet",         "unetw",
                                                    "cf2c",         "cf2c_aspp",
                                                    "cf2c_aspp_ec", "cf2net_full"};

TrainConfig apply_variant(const TrainConfig& base, const std::string& variant) {
    TrainConfig c = base;
    auto& m = c.model;
    if (variant == "unet") {
        m.use_fsp = m.use_aspp = m.use_ec = m.use_superpixel = false;
        m.backbone_skips = true;
        c.loss.weighted = false;
    } else if (variant == "unetw") {
        m.use_fsp = m.use_aspp = m.use_ec = m.use_superpixel = false;
        m.backbone_skips = true;
        c.loss.weighted = true;
    } else if (variant == "cf2c") {
        m.use_fsp = true;
        m.use_aspp = m.use_ec = m.use_superpixel = false;
        m.backbone_skips = false;
        c.loss.weighted = true;
    } else if (variant == "cf2c_aspp") {
        m.use_fsp = m.use_aspp = true;
        m.use_ec = m.use_superpixel = false;
        m.backbone_skips = false;
        c.loss.weighted = true;
    } else if (variant == "cf2c_aspp_ec") {
        m.use_fsp = m.use_aspp = m.use_ec = true;
        m.use_superpixel = false;
        m.backbone_skips = false;
        c.loss.weighted = true;
    } else if (variant == "cf2net_full") {
        m.use_fsp = m.use_aspp = m.use_ec = m.use_superpixel = true;
        m.backbone_skips = false;
        c.loss.weighted = true;
    } else {
        throw ConfigError("unknown ablation variant: " + variant);
    }
    c.out_dir = base.out_dir / variant;
    return c;
}

nlohmann::json run_ablation(const TrainConfig& base, const std::vector<std::string>& variants,
                            const std::vector<Sample>& samples) {
    if (variants.empty()) throw ConfigError("run_ablation: no variants given");
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& name : variants) {
        TrainConfig cfg = apply_variant(base, name);
        std::cerr << "[cf2net] ablation variant " << name << "\n";
        MetricsReport report = cross_validate(cfg, samples);
        rows.push_back({{"variant", name}, {"report", report_to_json(report)}});
    }
    nlohmann::json out = {{"rows", rows}};
    fs::create_directories(base.out_dir);
    std::ofstream(base.out_dir / "ablation.json") << out.dump(2) << "\n";
    std::ofstream(base.out_dir / "ablation.txt") << ablation_table(out);
    return out;
}

std::string ablation_table(const nlohmann::json& ablation) {
    std::string out;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-16s %-16s %-16s %-16s\n", "", "DSC(%)", "SEN(%)",
                  "PPV(%)");
    out += buf;
    for (const auto& row : ablation.at("rows")) {
        MetricsReport r = report_from_json(row.at("report"));
        std::snprintf(buf, sizeof(buf), "%-16s %-16s %-16s %-16s\n",
                      row.at("variant").get<std::string>().c_str(),
                      format_percent(r.dsc).c_str(), format_percent(r.sen).c_str(),
                      format_percent(r.ppv).c_str());
        out += buf;
    }
    return out;
}

}  // namespace cf2net
