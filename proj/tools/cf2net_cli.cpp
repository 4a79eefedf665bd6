// Command-line driver for the cf2net shared library. Talks to the core
// exclusively through the C API in cf2net/cf2net.h.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cf2net/cf2net.h"
#include "json.hpp"

namespace {

// 0 = success, 1 = user/config error, 2 = internal/numerical failure.
int exit_code(cf2n_status s) {
    switch (s) {
        case CF2N_OK:
            return 0;
        case CF2N_ERR_INVALID_ARGUMENT:
        case CF2N_ERR_CONFIG:
        case CF2N_ERR_IO:
            return 1;
        default:
            return 2;
    }
}

int fail(cf2n_status s) {
    std::fprintf(stderr, "error: %s\n", cf2n_last_error());
    return exit_code(s);
}

struct ConfigDeleter {
    void operator()(cf2n_config* c) const { cf2n_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<cf2n_config, ConfigDeleter>;

struct StringOut {
    char* s = nullptr;
    ~StringOut() { cf2n_string_free(s); }
};

// Shared flags; precedence is flag > config file > default.
struct CommonArgs {
    std::string config_file;
    std::string out;
    std::string prepared;
    long long seed = -1;
    int threads = -1;
    std::vector<std::string> sets;  // key=value overrides

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON config file");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--prepared", prepared, "prepared dataset directory");
        cmd->add_option("--seed", seed, "seed for every stochastic choice");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
        cmd->add_option("--set", sets, "override any config key, e.g. model.base_width=16")
            ->take_all();
    }

    cf2n_status build(ConfigPtr& out_cfg) const {
        cf2n_config* raw = nullptr;
        cf2n_status s = config_file.empty() ? cf2n_config_create(&raw)
                                            : cf2n_config_load_file(config_file.c_str(), &raw);
        if (s != CF2N_OK) return s;
        out_cfg.reset(raw);
        if (!out.empty())
            if ((s = cf2n_config_set(raw, "out", out.c_str())) != CF2N_OK) return s;
        if (!prepared.empty())
            if ((s = cf2n_config_set(raw, "data.prepared", prepared.c_str())) != CF2N_OK)
                return s;
        if (seed >= 0) {
            std::string v = std::to_string(seed);
            if ((s = cf2n_config_set(raw, "seed", v.c_str())) != CF2N_OK) return s;
        }
        if (threads >= 0) {
            std::string v = std::to_string(threads);
            if ((s = cf2n_config_set(raw, "threads", v.c_str())) != CF2N_OK) return s;
        }
        for (const auto& kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
                return CF2N_ERR_INVALID_ARGUMENT;
            }
            std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
            if ((s = cf2n_config_set(raw, key.c_str(), value.c_str())) != CF2N_OK) return s;
        }
        return CF2N_OK;
    }
};

int run_report_command(const CommonArgs& args,
                       cf2n_status (*op)(const cf2n_config*, char**), bool render_table) {
    ConfigPtr cfg;
    cf2n_status s = args.build(cfg);
    if (s != CF2N_OK) return fail(s);
    StringOut report;
    s = op(cfg.get(), &report.s);
    if (s != CF2N_OK) return fail(s);
    if (report.s) {
        if (render_table) {
            StringOut table;
            if (cf2n_report_render_table(report.s, &table.s) == CF2N_OK)
                std::printf("%s", table.s);
        }
        std::printf("%s\n", report.s);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coarse-to-fine fusion network segmentation toolkit"};
    app.require_subcommand(1);

    CommonArgs prepare_args, train_args, eval_args, ablate_args, predict_args, selftest_args;

    auto* prepare = app.add_subcommand("prepare", "materialize the preprocessed dataset");
    prepare_args.attach(prepare);
    int synthetic_count = -1;
    int size = -1;
    std::string data_root;
    prepare->add_option("--synthetic", synthetic_count, "generate N synthetic samples");
    prepare->add_option("--size", size, "canonical side length (multiple of 16)");
    prepare->add_option("--data", data_root, "real dataset root (images/ + masks/)");

    auto* train = app.add_subcommand("train", "k-fold cross-validated training");
    train_args.attach(train);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_args.attach(eval);
    std::string eval_checkpoint;
    int eval_fold = -2;
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval->add_option("--fold", eval_fold, "held-out fold (default: from the checkpoint)");

    auto* ablate = app.add_subcommand("ablate", "run the ablation grid");
    ablate_args.attach(ablate);
    std::string variants;
    ablate->add_option("--variants", variants,
                       "comma-separated subset of: unet,unetw,cf2c,cf2c_aspp,"
                       "cf2c_aspp_ec,cf2net_full");

    auto* predict = app.add_subcommand("predict", "segment one image with a checkpoint");
    predict_args.attach(predict);  // --out selects the prediction directory
    std::string pr_checkpoint, pr_image;
    std::string pr_superpixel;
    predict->add_option("--checkpoint", pr_checkpoint, "checkpoint file")->required();
    predict->add_option("--image", pr_image, "input grayscale PNG")->required();
    predict->add_option("--superpixel", pr_superpixel,
                        "true/false; must match the checkpoint");

    auto* selftest =
        app.add_subcommand("selftest", "gradient checks, metric oracles, overfit smoke test");
    selftest_args.attach(selftest);

    CLI11_PARSE(app, argc, argv);

    if (prepare->parsed()) {
        ConfigPtr cfg;
        cf2n_status s = prepare_args.build(cfg);
        if (s != CF2N_OK) return fail(s);
        if (synthetic_count > 0) {
            cf2n_config_set(cfg.get(), "data.source", "synthetic");
            cf2n_config_set(cfg.get(), "data.count", std::to_string(synthetic_count).c_str());
        }
        if (!data_root.empty()) {
            cf2n_config_set(cfg.get(), "data.source", "real");
            cf2n_config_set(cfg.get(), "data.root", data_root.c_str());
        }
        if (size > 0) cf2n_config_set(cfg.get(), "model.size", std::to_string(size).c_str());
        StringOut manifest;
        s = cf2n_prepare(cfg.get(), &manifest.s);
        if (s != CF2N_OK) return fail(s);
        std::printf("%s\n", manifest.s);
        return 0;
    }
    if (train->parsed()) return run_report_command(train_args, cf2n_train, true);
    if (eval->parsed()) {
        ConfigPtr cfg;
        cf2n_status s = eval_args.build(cfg);
        if (s != CF2N_OK) return fail(s);
        cf2n_config_set(cfg.get(), "eval.checkpoint", eval_checkpoint.c_str());
        if (eval_fold >= -1)
            cf2n_config_set(cfg.get(), "eval.fold", std::to_string(eval_fold).c_str());
        StringOut report;
        s = cf2n_evaluate(cfg.get(), &report.s);
        if (s != CF2N_OK) return fail(s);
        StringOut table;
        if (cf2n_report_render_table(report.s, &table.s) == CF2N_OK)
            std::printf("%s", table.s);
        std::printf("%s\n", report.s);
        return 0;
    }
    if (ablate->parsed()) {
        ConfigPtr cfg;
        cf2n_status s = ablate_args.build(cfg);
        if (s != CF2N_OK) return fail(s);
        if (!variants.empty()) {
            // Comma list -> JSON array.
            std::string json = "[";
            size_t pos = 0;
            while (pos != std::string::npos) {
                size_t comma = variants.find(',', pos);
                std::string item = variants.substr(pos, comma - pos);
                if (!item.empty()) json += "\"" + item + "\",";
                pos = comma == std::string::npos ? comma : comma + 1;
            }
            if (json.back() == ',') json.pop_back();
            json += "]";
            if ((s = cf2n_config_set(cfg.get(), "ablation.variants", json.c_str())) != CF2N_OK)
                return fail(s);
        }
        StringOut table;
        s = cf2n_ablate(cfg.get(), &table.s);
        if (s != CF2N_OK) return fail(s);
        StringOut text;
        if (cf2n_report_render_table(table.s, &text.s) == CF2N_OK) std::printf("%s", text.s);
        return 0;
    }
    if (predict->parsed()) {
        cf2n_model* model = nullptr;
        cf2n_status s = cf2n_model_open(pr_checkpoint.c_str(), &model);
        if (s != CF2N_OK) return fail(s);
        std::unique_ptr<cf2n_model, decltype(&cf2n_model_close)> guard(model, cf2n_model_close);
        if (!pr_superpixel.empty()) {
            s = cf2n_model_override(model, "use_superpixel", pr_superpixel.c_str());
            if (s != CF2N_OK) return fail(s);
        }
        const std::string out_dir = predict_args.out.empty() ? "prediction" : predict_args.out;
        s = cf2n_model_predict_file(model, pr_image.c_str(), out_dir.c_str());
        if (s != CF2N_OK) return fail(s);
        std::printf("wrote %s/mask.png, mask_prob.png, overlay.png\n", out_dir.c_str());
        return 0;
    }
    if (selftest->parsed()) {
        ConfigPtr cfg;
        cf2n_status s = selftest_args.build(cfg);
        if (s != CF2N_OK) return fail(s);
        StringOut report;
        s = cf2n_selftest(cfg.get(), &report.s);
        if (s != CF2N_OK) return fail(s);
        std::printf("%s\n", report.s);
        // Selftest failure is a numerical problem, not a usage error.
        auto j = nlohmann::json::parse(report.s, nullptr, false);
        if (j.is_discarded() || !j.value("passed", false)) return 2;
        return 0;
    }
    return 1;
}
