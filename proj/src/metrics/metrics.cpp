#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "common/errors.hpp"

namespace cf2net {

ConfusionCounts confusion_counts(const Plane& pred, const Plane& gt) {
    if (!pred.same_shape(gt)) throw ShapeError("confusion_counts: shape mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        bool p = pred.v[i] != 0.f;
        bool g = gt.v[i] != 0.f;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double dsc(const ConfusionCounts& c) {
    long denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;  // both empty
    return 2.0 * c.tp / denom;
}

double sen(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;  // ground truth empty
    return static_cast<double>(c.tp) / (c.tp + c.fn);
}

double ppv(const ConfusionCounts& c) {
    if (c.tp + c.fp == 0) return c.fn == 0 ? 1.0 : 0.0;  // prediction empty
    return static_cast<double>(c.tp) / (c.tp + c.fp);
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
    MetricSummary s;
    if (xs.empty()) return s;
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean = sum / xs.size();
    if (xs.size() > 1) {
        double ss = 0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / (xs.size() - 1));
    }
    return s;
}

}  // namespace

MetricsReport aggregate_report(const std::vector<ImageMetrics>& per_image) {
    if (per_image.empty()) throw ConfigError("aggregate_report: no per-image metrics");
    MetricsReport r;
    r.per_image = per_image;

    std::map<int, std::vector<const ImageMetrics*>> by_fold;
    for (const auto& m : per_image) by_fold[m.fold].push_back(&m);

    std::vector<double> fold_dsc, fold_sen, fold_ppv;
    for (const auto& [fold, items] : by_fold) {
        FoldMetrics f;
        f.fold = fold;
        f.images = static_cast<int>(items.size());
        for (const auto* m : items) {
            f.dsc += m->dsc;
            f.sen += m->sen;
            f.ppv += m->ppv;
        }
        f.dsc /= f.images;
        f.sen /= f.images;
        f.ppv /= f.images;
        r.per_fold.push_back(f);
        fold_dsc.push_back(f.dsc);
        fold_sen.push_back(f.sen);
        fold_ppv.push_back(f.ppv);
    }
    r.dsc = summarize(fold_dsc);
    r.sen = summarize(fold_sen);
    r.ppv = summarize(fold_ppv);

    std::vector<double> img_dsc, img_sen, img_ppv;
    for (const auto& m : per_image) {
        img_dsc.push_back(m.dsc);
        img_sen.push_back(m.sen);
        img_ppv.push_back(m.ppv);
    }
    r.dsc_images = summarize(img_dsc);
    r.sen_images = summarize(img_sen);
    r.ppv_images = summarize(img_ppv);
    return r;
}

nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["convention"] = {{"std", "across_folds"},
                       {"threshold", 0.5},
                       {"checkpoint_selection", "best_val_dsc"}};
    j["per_image"] = nlohmann::json::array();
    for (const auto& m : r.per_image)
        j["per_image"].push_back(
            {{"id", m.id}, {"fold", m.fold}, {"dsc", m.dsc}, {"sen", m.sen}, {"ppv", m.ppv}});
    j["per_fold"] = nlohmann::json::array();
    for (const auto& f : r.per_fold)
        j["per_fold"].push_back({{"fold", f.fold},
                                 {"images", f.images},
                                 {"dsc", f.dsc},
                                 {"sen", f.sen},
                                 {"ppv", f.ppv}});
    auto summary = [](const MetricSummary& s) {
        return nlohmann::json{{"mean", s.mean}, {"std", s.std}};
    };
    j["summary"] = {{"dsc", summary(r.dsc)}, {"sen", summary(r.sen)}, {"ppv", summary(r.ppv)}};
    j["summary_per_image"] = {{"dsc", summary(r.dsc_images)},
                              {"sen", summary(r.sen_images)},
                              {"ppv", summary(r.ppv_images)}};
    return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    for (const auto& m : j.at("per_image"))
        r.per_image.push_back({m.at("id").get<std::string>(), m.at("fold").get<int>(),
                               m.at("dsc").get<double>(), m.at("sen").get<double>(),
                               m.at("ppv").get<double>()});
    for (const auto& f : j.at("per_fold"))
        r.per_fold.push_back({f.at("fold").get<int>(), f.at("images").get<int>(),
                              f.at("dsc").get<double>(), f.at("sen").get<double>(),
                              f.at("ppv").get<double>()});
    auto summary = [](const nlohmann::json& s) {
        return MetricSummary{s.at("mean").get<double>(), s.at("std").get<double>()};
    };
    r.dsc = summary(j.at("summary").at("dsc"));
    r.sen = summary(j.at("summary").at("sen"));
    r.ppv = summary(j.at("summary").at("ppv"));
    r.dsc_images = summary(j.at("summary_per_image").at("dsc"));
    r.sen_images = summary(j.at("summary_per_image").at("sen"));
    r.ppv_images = summary(j.at("summary_per_image").at("ppv"));
    return r;
}

std::string format_percent(const MetricSummary& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f±%.3f", s.mean * 100.0, s.std * 100.0);
    return buf;
}

std::string report_table(const MetricsReport& r, const std::string& row_label) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-24s %-16s %-16s %-16s\n", "", "DSC(%)", "SEN(%)",
                  "PPV(%)");
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-24s %-16s %-16s %-16s\n", row_label.c_str(),
                  format_percent(r.dsc).c_str(), format_percent(r.sen).c_str(),
                  format_percent(r.ppv).c_str());
    out += buf;
    return out;
}

}  // namespace cf2net
