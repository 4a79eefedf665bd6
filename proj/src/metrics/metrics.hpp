#pragma once

#include <string>
#include <vector>

#include "common/image.hpp"
#include "json.hpp"

namespace cf2net {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;
    long total() const { return tp + fp + fn + tn; }
};

// Exact pixelwise counts; both planes must be binary and same shape.
ConfusionCounts confusion_counts(const Plane& pred, const Plane& gt);

// Overlap metrics in [0, 1]. Degenerate cases:
//   dsc: 1 when prediction and ground truth are both empty
//   sen: 1 when both empty, 0 when ground truth empty but prediction is not
//   ppv: 1 when both empty, 0 when prediction empty but ground truth is not
double dsc(const ConfusionCounts& c);
double sen(const ConfusionCounts& c);
double ppv(const ConfusionCounts& c);

struct ImageMetrics {
    std::string id;
    int fold = 0;
    double dsc = 0;
    double sen = 0;
    double ppv = 0;
};

struct MetricSummary {
    double mean = 0;
    double std = 0;  // sample standard deviation across folds; 0 for a single fold
};

struct FoldMetrics {
    int fold = 0;
    int images = 0;
    double dsc = 0;
    double sen = 0;
    double ppv = 0;
};

struct MetricsReport {
    std::vector<ImageMetrics> per_image;
    std::vector<FoldMetrics> per_fold;
    MetricSummary dsc, sen, ppv;
    // Spread across individual images, recorded alongside the fold-level spread.
    MetricSummary dsc_images, sen_images, ppv_images;
};

// Mean over images within each fold, then mean +/- sample std across fold means.
MetricsReport aggregate_report(const std::vector<ImageMetrics>& per_image);

nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

// One-row table in percent with 3 decimals, e.g. "85.553±1.718".
std::string format_percent(const MetricSummary& s);
std::string report_table(const MetricsReport& r, const std::string& row_label);

}  // namespace cf2net
