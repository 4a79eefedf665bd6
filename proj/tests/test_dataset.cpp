#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "common/errors.hpp"
#include "common/png_io.hpp"
#include "common/rng.hpp"
#include "data/dataset.hpp"
#include "doctest.h"

using namespace cf2net;
namespace fs = std::filesystem;

namespace {

// Brute-force oracle: a pixel is in the band iff its distance to some
// boundary pixel is <= radius. Boundary = mask pixel with a 4-neighbour
// outside the mask (frame border counts as outside).
Plane edge_band_oracle(const Plane& mask, int radius) {
    std::vector<std::pair<int, int>> contour;
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            if (mask.at(y, x) == 0.f) continue;
            bool boundary = y == 0 || x == 0 || y == mask.h - 1 || x == mask.w - 1 ||
                            mask.at(y - 1, x) == 0.f || mask.at(y + 1, x) == 0.f ||
                            mask.at(y, x - 1) == 0.f || mask.at(y, x + 1) == 0.f;
            if (boundary) contour.emplace_back(y, x);
        }
    }
    Plane band(mask.h, mask.w, 0.f);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            for (auto [cy, cx] : contour) {
                int dy = y - cy, dx = x - cx;
                if (dy * dy + dx * dx <= radius * radius) {
                    band.at(y, x) = 1.f;
                    break;
                }
            }
    return band;
}

Plane random_blob_mask(Rng& rng, int size) {
    Plane m(size, size, 0.f);
    int blobs = 1 + static_cast<int>(rng.next_below(3));
    for (int b = 0; b < blobs; ++b) {
        int cy = static_cast<int>(rng.next_below(size));
        int cx = static_cast<int>(rng.next_below(size));
        int r = 2 + static_cast<int>(rng.next_below(8));
        for (int y = std::max(0, cy - r); y < std::min(size, cy + r); ++y)
            for (int x = std::max(0, cx - r); x < std::min(size, cx + r); ++x)
                if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m.at(y, x) = 1.f;
    }
    return m;
}

int connected_components(const Plane& mask) {
    std::vector<char> seen(mask.size(), 0);
    int count = 0;
    for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
        if (seen[start] || mask.v[start] == 0.f) continue;
        ++count;
        std::vector<int> stack = {start};
        seen[start] = 1;
        while (!stack.empty()) {
            int cur = stack.back();
            stack.pop_back();
            int y = cur / mask.w, x = cur % mask.w;
            const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                int yy = y + dy[d], xx = x + dx[d];
                if (yy < 0 || yy >= mask.h || xx < 0 || xx >= mask.w) continue;
                int ni = yy * mask.w + xx;
                if (!seen[ni] && mask.v[ni] != 0.f) {
                    seen[ni] = 1;
                    stack.push_back(ni);
                }
            }
        }
    }
    return count;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("cf2net_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("load_dataset pairs image and mask stems") {
    TempDir tmp("load");
    fs::create_directories(tmp.path / "images");
    fs::create_directories(tmp.path / "masks");
    Plane img(16, 16, 0.5f), mask(16, 16, 0.f);
    mask.at(8, 8) = 1.f;
    for (const char* stem : {"a", "b", "c"})
        write_png_gray(tmp.path / "images" / (std::string(stem) + ".png"), img);
    for (const char* stem : {"a", "b"})
        write_png_gray(tmp.path / "masks" / (std::string(stem) + ".png"), mask);

    auto idx = load_dataset(tmp.path);
    CHECK(idx.entries.size() == 2);
    REQUIRE(idx.orphans.size() == 1);
    CHECK(idx.orphans[0].find("c") == 0);
    CHECK(idx.source_tag == "real");

    SUBCASE("missing directory") {
        CHECK_THROWS_AS(load_dataset(tmp.path / "nope"), IoError);
    }
    SUBCASE("no samples found") {
        TempDir empty("empty");
        fs::create_directories(empty.path / "images");
        fs::create_directories(empty.path / "masks");
        CHECK_THROWS_AS(load_dataset(empty.path), ConfigError);
    }
}

TEST_CASE("make_edge_target equals the brute-force oracle") {
    SUBCASE("centered square, radius 5") {
        Plane mask(64, 64, 0.f);
        for (int y = 22; y < 42; ++y)
            for (int x = 22; x < 42; ++x) mask.at(y, x) = 1.f;
        Plane band = make_edge_target(mask, 5);
        Plane oracle = edge_band_oracle(mask, 5);
        REQUIRE(band.v == oracle.v);
        // The band straddles the contour with width about 2*5+1.
        long count = count_nonzero(band);
        CHECK(count > 4 * 20 * 8);   // clearly more than a thin contour
        CHECK(count < 64 * 64 / 2);  // clearly not half the frame
        // Pixels far inside the square and far outside stay clear.
        CHECK(band.at(31, 31) == 0.f);
        CHECK(band.at(2, 2) == 0.f);
        CHECK(band.at(22, 22) == 1.f);
    }
    SUBCASE("empty and full-frame masks") {
        Plane empty(32, 32, 0.f);
        CHECK(count_nonzero(make_edge_target(empty, 5)) == 0);

        Plane full(32, 32, 1.f);
        Plane band = make_edge_target(full, 5);
        Plane oracle = edge_band_oracle(full, 5);
        CHECK(band.v == oracle.v);
        CHECK(band.at(0, 0) == 1.f);    // frame border is boundary
        CHECK(band.at(16, 16) == 0.f);  // centre is far from the border
    }
    SUBCASE("100 random 32x32 masks match exactly") {
        Rng rng(99);
        for (int trial = 0; trial < 100; ++trial) {
            Plane mask = random_blob_mask(rng, 32);
            Plane band = make_edge_target(mask, 5);
            Plane oracle = edge_band_oracle(mask, 5);
            REQUIRE(band.v == oracle.v);
        }
    }
}

TEST_CASE("preprocess_sample resizing and normalization") {
    SUBCASE("760x570 to 256") {
        Plane img(570, 760);
        Rng rng(5);
        for (auto& v : img.v) v = static_cast<float>(rng.next_double());
        Plane mask(570, 760, 0.f);
        for (int y = 100; y < 300; ++y)
            for (int x = 200; x < 500; ++x) mask.at(y, x) = 1.f;
        Sample s = preprocess_sample(img, mask, 256);
        CHECK(s.image.h == 256);
        CHECK(s.image.w == 256);
        CHECK(s.mask.h == 256);
        CHECK(s.edge.h == 256);
        CHECK(is_binary(s.mask));
        CHECK(is_binary(s.edge));
    }
    SUBCASE("constant image normalizes to zeros with a warning") {
        Plane img(64, 64, 0.7f), mask(64, 64, 0.f);
        bool warned = false;
        Sample s = preprocess_sample(img, mask, 64, 5, &warned);
        CHECK(warned);
        CHECK(count_nonzero(s.image) == 0);
    }
    SUBCASE("identity resize keeps a binary mask") {
        Plane img(64, 64, 0.f);
        for (int i = 0; i < 64; ++i) img.at(i, i) = 1.f;
        Plane mask(64, 64, 0.f);
        for (int y = 10; y < 30; ++y)
            for (int x = 10; x < 30; ++x) mask.at(y, x) = 1.f;
        Sample s = preprocess_sample(img, mask, 64);
        CHECK(s.mask.v == mask.v);
    }
    SUBCASE("all-zero mask gives an all-zero edge plane") {
        Plane img(64, 64, 0.f);
        img.at(0, 0) = 1.f;
        Plane mask(64, 64, 0.f);
        Sample s = preprocess_sample(img, mask, 64);
        CHECK(count_nonzero(s.edge) == 0);
    }
    SUBCASE("size not divisible by 16 is rejected") {
        Plane img(64, 64, 0.f), mask(64, 64, 0.f);
        CHECK_THROWS_AS(preprocess_sample(img, mask, 100), ConfigError);
    }
}

TEST_CASE("produced samples satisfy the plane invariants") {
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        int h = 40 + static_cast<int>(rng.next_below(200));
        int w = 40 + static_cast<int>(rng.next_below(200));
        Plane img(h, w);
        for (auto& v : img.v) v = static_cast<float>(rng.uniform(0, 255));
        Plane blob = random_blob_mask(rng, std::min(h, w));
        Plane mask(h, w, 0.f);
        for (int y = 0; y < blob.h; ++y)
            for (int x = 0; x < blob.w; ++x) mask.at(y, x) = blob.at(y, x);
        Sample s = preprocess_sample(img, mask, 64);
        REQUIRE(s.image.h == 64);
        REQUIRE(s.image.same_shape(s.mask));
        REQUIRE(s.image.same_shape(s.edge));
        for (float v : s.image.v) {
            REQUIRE(v >= 0.f);
            REQUIRE(v <= 1.f);
        }
        REQUIRE(is_binary(s.mask));
        REQUIRE(is_binary(s.edge));
        // Edge is nonempty whenever the mask is nonempty but not full-frame.
        long m = count_nonzero(s.mask);
        if (m > 0 && m < 64 * 64) REQUIRE(count_nonzero(s.edge) > 0);
    }
}

TEST_CASE("make_folds properties") {
    SUBCASE("163 entries into 4 folds") {
        auto split = make_folds(163, 4, 11);
        std::vector<int> sizes(4, 0);
        for (int f : split.assignment) {
            REQUIRE(f >= 0);
            REQUIRE(f < 4);
            ++sizes[f];
        }
        std::sort(sizes.begin(), sizes.end());
        CHECK(sizes == std::vector<int>{40, 41, 41, 41});
    }
    SUBCASE("4 entries into 4 folds") {
        auto split = make_folds(4, 4, 3);
        std::set<int> seen(split.assignment.begin(), split.assignment.end());
        CHECK(seen.size() == 4);
    }
    SUBCASE("determinism and seed sensitivity") {
        auto a = make_folds(50, 5, 7);
        auto b = make_folds(50, 5, 7);
        CHECK(a.assignment == b.assignment);
        auto c = make_folds(50, 5, 8);
        CHECK(a.assignment != c.assignment);
    }
    SUBCASE("partition: union of folds is everything, disjoint by construction") {
        auto split = make_folds(101, 4, 1);
        size_t total = 0;
        for (int f = 0; f < 4; ++f) {
            auto idx = split.fold_indices(f);
            auto train = split.train_indices(f);
            CHECK(idx.size() + train.size() == 101);
            total += idx.size();
        }
        CHECK(total == 101);
    }
    SUBCASE("k larger than the entry count fails") {
        CHECK_THROWS_AS(make_folds(3, 4, 0), ConfigError);
        CHECK_THROWS_AS(make_folds(10, 1, 0), ConfigError);
    }
}

TEST_CASE("synthetic generator properties") {
    const int S = 128;
    const uint64_t seed = 2025;
    for (uint64_t i = 0; i < 200; ++i) {
        SyntheticPair pair = synthetic_sample(S, seed, i);
        REQUIRE(pair.image.h == S);
        REQUIRE(pair.mask.h == S);
        REQUIRE(is_binary(pair.mask));
        for (float v : pair.image.v) {
            REQUIRE(v >= 0.f);
            REQUIRE(v <= 1.f);
        }
        REQUIRE(connected_components(pair.mask) == 1);
        double frac = static_cast<double>(count_nonzero(pair.mask)) / (S * S);
        REQUIRE(frac >= 0.005);
        REQUIRE(frac <= 0.45);
    }

    SUBCASE("bit-identical regeneration") {
        auto a = synthetic_sample(64, 7, 3);
        auto b = synthetic_sample(64, 7, 3);
        CHECK(a.image.v == b.image.v);
        CHECK(a.mask.v == b.mask.v);
        auto c = synthetic_sample(64, 8, 3);
        CHECK(a.image.v != c.image.v);
    }
}
