#include "config/experiment.hpp"

#include <fstream>

#include "common/errors.hpp"

namespace cf2net {

namespace fs = std::filesystem;

namespace {

void deep_merge(nlohmann::json& base, const nlohmann::json& overrides) {
    if (!overrides.is_object()) {
        base = overrides;
        return;
    }
    if (!base.is_object()) base = nlohmann::json::object();
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()))
            deep_merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.j_ = {
        {"seed", 42},
        {"out", "runs/default"},
        {"threads", 0},
        {"data",
         {{"source", "synthetic"},
          {"root", ""},
          {"prepared", ""},
          {"count", 200},
          {"edge_radius", 5},
          {"flip_augment", false}}},
        {"superpixel", {{"k", 2000}, {"compactness", 10.0}, {"iterations", 10}, {"min_size", 0}}},
        {"model", ModelConfig{}.to_json()},
        {"loss",
         {{"lambda1", 1.0},
          {"lambda2", 1.0},
          {"lambda3", 0.1},
          {"mu1", 1.0},
          {"mu2", 1.0},
          {"weighted", true},
          {"invert_balance", false},
          {"paper_literal_dice", false},
          {"epsilon", 1e-6}}},
        {"train",
         {{"optimizer", "adagrad"},
          {"lr", 6e-4},
          {"momentum", 0.0},
          {"grad_clip", 0.0},
          {"batch_size", 4},
          {"epochs", 500},
          {"folds", 4}}},
        {"ablation", {{"variants", kAblationVariants}}},
        {"eval", {{"checkpoint", ""}, {"fold", -1}}},
        {"predict", {{"checkpoint", ""}, {"image", ""}, {"out_dir", ""}}},
        {"selftest", {{"lr", 0.05}, {"max_steps", 500}}},
    };
    return c;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c = defaults();
    c.merge(j);
    return c;
}

ExperimentConfig ExperimentConfig::load_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid config JSON in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

void ExperimentConfig::merge(const nlohmann::json& overrides) { deep_merge(j_, overrides); }

void ExperimentConfig::set(const std::string& dotted_key, const std::string& value) {
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;  // plain string
    }
    nlohmann::json* cursor = &j_;
    size_t pos = 0;
    while (true) {
        size_t dot = dotted_key.find('.', pos);
        std::string key = dotted_key.substr(pos, dot - pos);
        if (key.empty()) throw ConfigError("bad config key: " + dotted_key);
        if (dot == std::string::npos) {
            (*cursor)[key] = parsed;
            return;
        }
        cursor = &(*cursor)[key];
        pos = dot + 1;
    }
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig c;
    c.model = ModelConfig::from_json(j_.at("model"));
    const auto& l = j_.at("loss");
    c.loss.lambda1 = l.value("lambda1", 1.0);
    c.loss.lambda2 = l.value("lambda2", 1.0);
    c.loss.lambda3 = l.value("lambda3", 0.1);
    c.loss.mu1 = l.value("mu1", 1.0);
    c.loss.mu2 = l.value("mu2", 1.0);
    c.loss.weighted = l.value("weighted", true);
    c.loss.invert_balance = l.value("invert_balance", false);
    c.loss.paper_literal_dice = l.value("paper_literal_dice", false);
    c.loss.epsilon = l.value("epsilon", 1e-6);
    const auto& t = j_.at("train");
    c.optimizer = t.value("optimizer", std::string("adagrad"));
    c.lr = t.value("lr", 6e-4);
    c.momentum = t.value("momentum", 0.0);
    c.grad_clip = t.value("grad_clip", 0.0);
    c.batch_size = t.value("batch_size", 4);
    c.epochs = t.value("epochs", 500);
    c.folds = t.value("folds", 4);
    c.seed = j_.value("seed", 42ull);
    c.threads = j_.value("threads", 0);
    c.flip_augment = j_.at("data").value("flip_augment", false);
    c.out_dir = out_dir();
    return c;
}

PrepareOptions ExperimentConfig::prepare_options() const {
    PrepareOptions o;
    const auto& d = j_.at("data");
    o.source = d.value("source", std::string("synthetic"));
    o.real_root = d.value("root", std::string(""));
    o.out_dir = prepared_dir();
    o.count = d.value("count", 200);
    o.size = j_.at("model").value("size", 256);
    o.seed = j_.value("seed", 42ull);
    o.edge_radius = d.value("edge_radius", 5);
    o.superpixels = j_.at("model").value("use_superpixel", true);
    const auto& s = j_.at("superpixel");
    o.spx.k = s.value("k", 2000);
    o.spx.compactness = s.value("compactness", 10.f);
    o.spx.iterations = s.value("iterations", 10);
    o.spx.min_size = s.value("min_size", 0);
    return o;
}

OverfitOptions ExperimentConfig::overfit_options() const {
    OverfitOptions o = OverfitOptions::tiny();
    const auto& s = j_.at("selftest");
    o.lr = s.value("lr", 0.05);
    o.max_steps = s.value("max_steps", 500);
    o.seed = j_.value("seed", 42ull) + 7;
    o.threads = j_.value("threads", 0);
    return o;
}

fs::path ExperimentConfig::out_dir() const { return j_.value("out", std::string("runs/default")); }

fs::path ExperimentConfig::prepared_dir() const {
    std::string p = j_.at("data").value("prepared", std::string(""));
    if (!p.empty()) return p;
    return out_dir() / "prepared";
}

std::vector<std::string> ExperimentConfig::ablation_variants() const {
    return j_.at("ablation").at("variants").get<std::vector<std::string>>();
}

void ExperimentConfig::persist(const fs::path& dir) const {
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << dump() << "\n";
}

}  // namespace cf2net
