#include "cf2net/cf2net.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "common/errors.hpp"
#include "common/png_io.hpp"
#include "config/experiment.hpp"
#include "data/prepare.hpp"
#include "train/checkpoint.hpp"
#include "train/predict.hpp"
#include "train/selftest.hpp"
#include "train/trainer.hpp"

using namespace cf2net;

struct cf2n_config {
    ExperimentConfig cfg;
};

struct cf2n_model {
    LoadedCheckpoint ck;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void set_out(char** out, const std::string& s) {
    if (out) *out = dup_string(s);
}

// Runs `fn`, translating exceptions to status codes.
template <typename Fn>
cf2n_status guarded(Fn&& fn) {
    try {
        fn();
        return CF2N_OK;
    } catch (const ConfigError& e) {
        g_last_error = e.what();
        return CF2N_ERR_CONFIG;
    } catch (const IoError& e) {
        g_last_error = e.what();
        return CF2N_ERR_IO;
    } catch (const NumericError& e) {
        g_last_error = e.what();
        return CF2N_ERR_NUMERIC;
    } catch (const ShapeError& e) {
        g_last_error = e.what();
        return CF2N_ERR_CONFIG;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CF2N_ERR_INTERNAL;
    }
}

cf2n_status bad_argument(const char* what) {
    g_last_error = what;
    return CF2N_ERR_INVALID_ARGUMENT;
}

// Loads the prepared dataset a config points at.
std::vector<Sample> load_samples(const ExperimentConfig& cfg) {
    return load_prepared(cfg.prepared_dir());
}

}  // namespace

extern "C" {

const char* cf2n_version(void) { return "0.1.0"; }

const char* cf2n_last_error(void) { return g_last_error.c_str(); }

void cf2n_string_free(char* s) { std::free(s); }

cf2n_status cf2n_config_create(cf2n_config** out) {
    if (!out) return bad_argument("null out pointer");
    return guarded([&] { *out = new cf2n_config{ExperimentConfig::defaults()}; });
}

cf2n_status cf2n_config_from_json(const char* json_text, cf2n_config** out) {
    if (!out || !json_text) return bad_argument("null argument");
    return guarded([&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("invalid config JSON: ") + e.what());
        }
        *out = new cf2n_config{ExperimentConfig::from_json(j)};
    });
}

cf2n_status cf2n_config_load_file(const char* path, cf2n_config** out) {
    if (!out || !path) return bad_argument("null argument");
    return guarded([&] { *out = new cf2n_config{ExperimentConfig::load_file(path)}; });
}

cf2n_status cf2n_config_merge_json(cf2n_config* cfg, const char* json_text) {
    if (!cfg || !json_text) return bad_argument("null argument");
    return guarded([&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("invalid override JSON: ") + e.what());
        }
        cfg->cfg.merge(j);
    });
}

cf2n_status cf2n_config_set(cf2n_config* cfg, const char* dotted_key, const char* value) {
    if (!cfg || !dotted_key || !value) return bad_argument("null argument");
    return guarded([&] { cfg->cfg.set(dotted_key, value); });
}

cf2n_status cf2n_config_to_json(const cf2n_config* cfg, char** out_json) {
    if (!cfg || !out_json) return bad_argument("null argument");
    return guarded([&] { set_out(out_json, cfg->cfg.dump()); });
}

void cf2n_config_destroy(cf2n_config* cfg) { delete cfg; }

cf2n_status cf2n_prepare(const cf2n_config* cfg, char** out_manifest_json) {
    if (!cfg) return bad_argument("null config");
    return guarded([&] {
        PrepareResult r = prepare_dataset(cfg->cfg.prepare_options());
        nlohmann::json j = {{"dir", r.dir.string()},
                            {"count", r.count},
                            {"param_hash", r.param_hash},
                            {"reused", r.reused},
                            {"orphans", r.orphans},
                            {"warnings", r.warnings}};
        set_out(out_manifest_json, j.dump(2));
    });
}

cf2n_status cf2n_train(const cf2n_config* cfg, char** out_report_json) {
    if (!cfg) return bad_argument("null config");
    return guarded([&] {
        TrainConfig tc = cfg->cfg.train_config();
        cfg->cfg.persist(tc.out_dir);
        auto samples = load_samples(cfg->cfg);
        MetricsReport report = cross_validate(tc, samples);
        set_out(out_report_json, report_to_json(report).dump(2));
    });
}

cf2n_status cf2n_evaluate(const cf2n_config* cfg, char** out_report_json) {
    if (!cfg) return bad_argument("null config");
    return guarded([&] {
        const auto& j = cfg->cfg.json();
        std::string ckpt = j.at("eval").value("checkpoint", std::string(""));
        if (ckpt.empty()) throw ConfigError("eval.checkpoint is required");
        auto loaded = load_checkpoint(ckpt);
        auto samples = load_samples(cfg->cfg);

        TrainConfig tc = cfg->cfg.train_config();
        int fold = j.at("eval").value("fold", -1);
        if (fold < 0) fold = loaded.meta.value("fold", -1);

        std::vector<size_t> indices;
        if (fold >= 0) {
            FoldSplit folds = make_folds(samples.size(), tc.folds,
                                         loaded.meta.value("seed", tc.seed));
            indices = folds.fold_indices(fold);
            if (indices.empty()) throw ConfigError("eval: fold has no samples");
        } else {
            for (size_t i = 0; i < samples.size(); ++i) indices.push_back(i);
            fold = 0;
        }
        auto metrics =
            evaluate_samples(*loaded.model, samples, indices, fold, tc.batch_size);
        MetricsReport report = aggregate_report(metrics);
        std::filesystem::create_directories(tc.out_dir);
        std::ofstream(tc.out_dir / "eval_report.json") << report_to_json(report).dump(2) << "\n";
        set_out(out_report_json, report_to_json(report).dump(2));
    });
}

cf2n_status cf2n_ablate(const cf2n_config* cfg, char** out_table_json) {
    if (!cfg) return bad_argument("null config");
    return guarded([&] {
        TrainConfig tc = cfg->cfg.train_config();
        cfg->cfg.persist(tc.out_dir);
        auto samples = load_samples(cfg->cfg);
        nlohmann::json table = run_ablation(tc, cfg->cfg.ablation_variants(), samples);
        set_out(out_table_json, table.dump(2));
    });
}

cf2n_status cf2n_selftest(const cf2n_config* cfg, char** out_report_json) {
    if (!cfg) return bad_argument("null config");
    return guarded([&] {
        nlohmann::json report = run_selftest(cfg->cfg.overfit_options());
        set_out(out_report_json, report.dump(2));
    });
}

cf2n_status cf2n_report_render_table(const char* report_json, char** out_text) {
    if (!report_json || !out_text) return bad_argument("null argument");
    return guarded([&] {
        nlohmann::json j = nlohmann::json::parse(report_json);
        if (j.contains("rows")) {
            set_out(out_text, ablation_table(j));
        } else {
            MetricsReport r = report_from_json(j);
            set_out(out_text, report_table(r, "model"));
        }
    });
}

cf2n_status cf2n_model_open(const char* checkpoint_path, cf2n_model** out) {
    if (!checkpoint_path || !out) return bad_argument("null argument");
    return guarded([&] { *out = new cf2n_model{load_checkpoint(checkpoint_path)}; });
}

int cf2n_model_input_size(const cf2n_model* model) {
    return model ? model->ck.config.size : -1;
}

cf2n_status cf2n_model_config(const cf2n_model* model, char** out_json) {
    if (!model || !out_json) return bad_argument("null argument");
    return guarded([&] { set_out(out_json, model->ck.config.to_json().dump(2)); });
}

cf2n_status cf2n_model_override(cf2n_model* model, const char* key, const char* value) {
    if (!model || !key || !value) return bad_argument("null argument");
    return guarded([&] {
        const std::string k = key;
        if (k == "use_superpixel") {
            const bool want = std::string(value) == "true" || std::string(value) == "1";
            if (want != model->ck.config.use_superpixel)
                throw ConfigError(
                    "checkpoint was trained with use_superpixel=" +
                    std::string(model->ck.config.use_superpixel ? "true" : "false") +
                    "; the requested override contradicts it");
            return;  // no-op when consistent
        }
        if (k == "superpixel.k" || k == "superpixel.compactness" ||
            k == "superpixel.iterations" || k == "superpixel.min_size") {
            nlohmann::json v = nlohmann::json::parse(value, nullptr, false);
            if (v.is_discarded()) throw ConfigError("invalid numeric override: " + k);
            model->ck.meta["superpixel"][k.substr(k.find('.') + 1)] = v;
            return;
        }
        throw ConfigError("unknown inference override: " + k);
    });
}

cf2n_status cf2n_model_predict_file(cf2n_model* model, const char* image_png,
                                    const char* out_dir) {
    if (!model || !image_png || !out_dir) return bad_argument("null argument");
    return guarded([&] { predict_to_files(model->ck, image_png, out_dir); });
}

cf2n_status cf2n_model_predict(cf2n_model* model, const float* image, int h, int w,
                               float* mask_probs, float* edge_probs) {
    if (!model || !image || !mask_probs) return bad_argument("null argument");
    if (h <= 0 || w <= 0) return bad_argument("non-positive image size");
    return guarded([&] {
        Plane raw(h, w);
        std::copy(image, image + raw.size(), raw.v.begin());
        PredictResult r = predict_image(model->ck, raw);
        std::copy(r.mask_prob.v.begin(), r.mask_prob.v.end(), mask_probs);
        if (edge_probs && r.edge_prob.size() > 0)
            std::copy(r.edge_prob.v.begin(), r.edge_prob.v.end(), edge_probs);
    });
}

void cf2n_model_close(cf2n_model* model) { delete model; }

}  // extern "C"
