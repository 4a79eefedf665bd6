#include <cmath>

#include "common/errors.hpp"
#include "common/rng.hpp"
#include "doctest.h"
#include "metrics/metrics.hpp"

using namespace cf2net;

namespace {

// Brute-force counting oracle, written independently of the implementation.
struct OracleCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

OracleCounts oracle_counts(const Plane& pred, const Plane& gt) {
    OracleCounts c;
    for (int y = 0; y < pred.h; ++y) {
        for (int x = 0; x < pred.w; ++x) {
            bool p = pred.at(y, x) != 0.f;
            bool g = gt.at(y, x) != 0.f;
            c.tp += p && g;
            c.fp += p && !g;
            c.fn += !p && g;
            c.tn += !p && !g;
        }
    }
    return c;
}

Plane random_mask(Rng& rng, int h, int w, double density) {
    Plane p(h, w);
    for (auto& v : p.v) v = rng.next_double() < density ? 1.f : 0.f;
    return p;
}

}  // namespace

TEST_CASE("confusion counts on hand-placed overlap") {
    // gt = left 2 columns, pred = top 2 rows of a 4x4 grid.
    Plane gt(4, 4), pred(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 2; ++x) gt.at(y, x) = 1.f;
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) pred.at(y, x) = 1.f;

    auto c = confusion_counts(pred, gt);
    CHECK(c.tp == 4);
    CHECK(c.fp == 4);
    CHECK(c.fn == 4);
    CHECK(c.tn == 4);
    CHECK(dsc(c) == doctest::Approx(0.5));
    CHECK(sen(c) == doctest::Approx(0.5));
    CHECK(ppv(c) == doctest::Approx(0.5));
}

TEST_CASE("perfect and inverted predictions") {
    Rng rng(1);
    Plane gt = random_mask(rng, 8, 8, 0.3);
    gt.at(0, 0) = 1.f;  // nonempty
    auto c = confusion_counts(gt, gt);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(dsc(c) == 1.0);
    CHECK(sen(c) == 1.0);
    CHECK(ppv(c) == 1.0);

    Plane inverted(8, 8);
    for (size_t i = 0; i < gt.size(); ++i) inverted.v[i] = gt.v[i] == 0.f ? 1.f : 0.f;
    auto c2 = confusion_counts(inverted, gt);
    CHECK(c2.tp == 0);
    CHECK(c2.tn == 0);
    CHECK(dsc(c2) == 0.0);
}

TEST_CASE("degenerate empty-mask conventions") {
    Plane empty(4, 4), some(4, 4);
    some.at(1, 1) = 1.f;

    auto both_empty = confusion_counts(empty, empty);
    CHECK(dsc(both_empty) == 1.0);
    CHECK(sen(both_empty) == 1.0);
    CHECK(ppv(both_empty) == 1.0);

    auto pred_empty = confusion_counts(empty, some);
    CHECK(dsc(pred_empty) == 0.0);
    CHECK(sen(pred_empty) == 0.0);
    CHECK(ppv(pred_empty) == 0.0);  // prediction empty, gt nonempty

    auto gt_empty = confusion_counts(some, empty);
    CHECK(dsc(gt_empty) == 0.0);
    CHECK(sen(gt_empty) == 0.0);
    CHECK(ppv(gt_empty) == 0.0);
}

TEST_CASE("metrics equal the counting oracle on 500 random pairs") {
    Rng rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        double density_a = rng.uniform(0.0, 1.0);
        double density_b = rng.uniform(0.0, 1.0);
        Plane pred = random_mask(rng, 16, 16, density_a);
        Plane gt = random_mask(rng, 16, 16, density_b);
        auto c = confusion_counts(pred, gt);
        auto o = oracle_counts(pred, gt);
        REQUIRE(c.tp == o.tp);
        REQUIRE(c.fp == o.fp);
        REQUIRE(c.fn == o.fn);
        REQUIRE(c.tn == o.tn);
        REQUIRE(c.total() == 256);

        double d = dsc(c), s = sen(c), p = ppv(c);
        double od = (2 * o.tp + o.fp + o.fn) == 0 ? 1.0
                                                  : 2.0 * o.tp / (2 * o.tp + o.fp + o.fn);
        REQUIRE(d == od);
        REQUIRE(d >= 0.0);
        REQUIRE(d <= 1.0);
        REQUIRE(s >= 0.0);
        REQUIRE(s <= 1.0);
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);

        // DSC is the harmonic mean of SEN and PPV where both are positive.
        if (s > 0 && p > 0) REQUIRE(d == doctest::Approx(2 * s * p / (s + p)).epsilon(1e-12));

        // Symmetry of DSC.
        auto swapped = confusion_counts(gt, pred);
        REQUIRE(dsc(swapped) == d);
    }
}

TEST_CASE("aggregate_report conventions") {
    SUBCASE("two folds") {
        std::vector<ImageMetrics> ms = {
            {"a", 0, 0.8, 0.7, 0.9},
            {"b", 0, 0.8, 0.7, 0.9},
            {"c", 1, 0.9, 0.8, 1.0},
        };
        auto r = aggregate_report(ms);
        REQUIRE(r.per_fold.size() == 2);
        CHECK(r.per_fold[0].dsc == doctest::Approx(0.8));
        CHECK(r.per_fold[1].dsc == doctest::Approx(0.9));
        CHECK(r.dsc.mean == doctest::Approx(0.85));
        // Sample standard deviation of {0.8, 0.9}.
        CHECK(r.dsc.std == doctest::Approx(0.070710678).epsilon(1e-6));
    }
    SUBCASE("single fold has zero spread") {
        std::vector<ImageMetrics> ms = {{"a", 0, 0.5, 0.5, 0.5}, {"b", 0, 0.7, 0.7, 0.7}};
        auto r = aggregate_report(ms);
        CHECK(r.dsc.mean == doctest::Approx(0.6));
        CHECK(r.dsc.std == 0.0);
    }
    SUBCASE("identical folds have zero spread") {
        std::vector<ImageMetrics> ms = {{"a", 0, 0.6, 0.6, 0.6}, {"b", 1, 0.6, 0.6, 0.6}};
        auto r = aggregate_report(ms);
        CHECK(r.dsc.std == 0.0);
    }
    SUBCASE("empty input is an error") {
        CHECK_THROWS_AS(aggregate_report({}), ConfigError);
    }
}

TEST_CASE("report serialization round trip and table format") {
    std::vector<ImageMetrics> ms = {{"a", 0, 0.85553, 0.85211, 0.88198},
                                    {"b", 1, 0.85553, 0.85211, 0.88198}};
    auto r = aggregate_report(ms);
    auto j = report_to_json(r);
    auto r2 = report_from_json(j);
    CHECK(r2.dsc.mean == r.dsc.mean);
    CHECK(r2.per_image.size() == 2);

    std::string row = format_percent(r.dsc);
    CHECK(row.find("85.553") == 0);  // percentages with 3 decimals
    std::string table = report_table(r, "model");
    CHECK(table.find("DSC(%)") != std::string::npos);
}
