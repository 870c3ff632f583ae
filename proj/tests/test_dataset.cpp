#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsvc/dataset.hpp"

using tsvc::Dataset;
using tsvc::DatasetSpec;
using tsvc::Matrix;
using tsvc::PairSample;
using tsvc::SplitFractions;

namespace {

std::string temp_path(const char* name) {
    return std::string(std::getenv("TSVC_TEST_TMP") ? std::getenv("TSVC_TEST_TMP") : "/tmp") +
           "/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    return dot / std::sqrt(na * nb);
}

// Canonical multiset key for a float vector.
std::vector<float> key_of(const std::vector<float>& v) { return v; }

}  // namespace

TEST_CASE("spec validation") {
    DatasetSpec ok;
    ok.validate();
    DatasetSpec small = ok;
    small.n = 9;
    CHECK_THROWS_AS(small.validate(), std::invalid_argument);
    DatasetSpec thin = ok;
    thin.d_img = 1;
    CHECK_THROWS_AS(thin.validate(), std::invalid_argument);
    DatasetSpec neg = ok;
    neg.noise_sigma = -0.1;
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}

TEST_CASE("generation is deterministic per seed") {
    DatasetSpec spec;
    spec.n = 50;
    auto a = tsvc::generate(spec);
    auto b = tsvc::generate(spec);
    CHECK(a == b);
    CHECK(a.size() == 50);
    CHECK(a.d_img == spec.d_img);
    CHECK(a.d_txt == spec.d_txt);
    for (const auto& s : a.samples) {
        CHECK(s.y == 1);
        CHECK(s.truly_clean);
        CHECK(s.img.size() == spec.d_img);
        CHECK(s.txt.size() == spec.d_txt);
    }

    spec.seed = 2;
    CHECK(tsvc::generate(spec) != a);
}

TEST_CASE("identity projections with zero noise make both sides equal") {
    DatasetSpec spec;
    spec.n = 20;
    spec.d_latent = 6;
    spec.d_img = 6;
    spec.d_txt = 6;
    spec.noise_sigma = 0.0;
    Matrix eye(6, 6);
    for (std::size_t i = 0; i < 6; ++i) eye.at(i, i) = 1.0;
    auto ds = tsvc::generate(spec, eye, eye);
    for (const auto& s : ds.samples) CHECK(s.img == s.txt);
}

TEST_CASE("matched pairs share a latent factor, mismatched pairs do not") {
    DatasetSpec spec;
    spec.n = 1000;
    spec.d_latent = 8;
    spec.d_img = 12;
    spec.d_txt = 12;
    spec.noise_sigma = 0.2;

    // Known projections let the test recover the latent estimate by the
    // transpose map; only matched pairs should agree there.
    std::mt19937_64 rng(77);
    std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(8.0));
    Matrix img_map(12, 8), txt_map(12, 8);
    for (double& e : img_map.data) e = entry(rng);
    for (double& e : txt_map.data) e = entry(rng);
    auto ds = tsvc::generate(spec, img_map, txt_map);

    auto latent_estimate = [](const Matrix& map, const std::vector<float>& x) {
        std::vector<float> z(map.cols, 0.0f);
        for (std::size_t c = 0; c < map.cols; ++c)
            for (std::size_t r = 0; r < map.rows; ++r)
                z[c] += static_cast<float>(map.at(r, c)) * x[r];
        return z;
    };

    double matched = 0.0, shifted = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto zi = latent_estimate(img_map, ds.samples[i].img);
        matched += cosine(zi, latent_estimate(txt_map, ds.samples[i].txt));
        shifted += cosine(zi, latent_estimate(txt_map, ds.samples[(i + 1) % ds.size()].txt));
    }
    CHECK(matched / 1000.0 > shifted / 1000.0 + 0.3);
}

TEST_CASE("noise injection mismatches exactly the requested fraction") {
    DatasetSpec spec;
    spec.n = 1000;
    auto ds = tsvc::generate(spec);
    auto noisy = tsvc::inject_noise(ds, 0.4, 5);

    REQUIRE(noisy.size() == 1000);
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const auto& before = ds.samples[i];
        const auto& after = noisy.samples[i];
        CHECK(after.img == before.img);
        CHECK(after.y == 1);
        if (!after.truly_clean) {
            ++flagged;
            CHECK(after.txt != before.txt);
        } else {
            CHECK(after.txt == before.txt);
        }
    }
    CHECK(flagged == 400);

    // The texts are only permuted, never invented.
    std::map<std::vector<float>, int> counts;
    for (const auto& s : ds.samples) ++counts[key_of(s.txt)];
    for (const auto& s : noisy.samples) --counts[key_of(s.txt)];
    for (const auto& [k, c] : counts) CHECK(c == 0);
}

TEST_CASE("noise injection is deterministic and seed-sensitive") {
    DatasetSpec spec;
    spec.n = 200;
    auto ds = tsvc::generate(spec);
    CHECK(tsvc::inject_noise(ds, 0.3, 5) == tsvc::inject_noise(ds, 0.3, 5));
    CHECK(tsvc::inject_noise(ds, 0.3, 5) != tsvc::inject_noise(ds, 0.3, 6));
    CHECK(tsvc::inject_noise(ds, 0.0, 5) == ds);
}

TEST_CASE("noise injection rejects unusable ratios") {
    DatasetSpec spec;
    spec.n = 100;
    auto ds = tsvc::generate(spec);
    CHECK_THROWS_AS(tsvc::inject_noise(ds, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(tsvc::inject_noise(ds, -0.1, 1), std::invalid_argument);
    // One mismatched pair cannot be shifted among itself.
    CHECK_THROWS_AS(tsvc::inject_noise(ds, 0.01, 1), std::invalid_argument);
}

TEST_CASE("split produces the requested part sizes and loses nothing") {
    DatasetSpec spec;
    spec.n = 1000;
    auto ds = tsvc::generate(spec);
    auto parts = tsvc::split(ds, SplitFractions{}, 3);
    CHECK(parts[0].size() == 800);
    CHECK(parts[1].size() == 100);
    CHECK(parts[2].size() == 100);
    for (const auto& p : parts) {
        CHECK(p.d_img == ds.d_img);
        CHECK(p.d_txt == ds.d_txt);
    }

    std::map<std::vector<float>, int> counts;
    for (const auto& s : ds.samples) ++counts[key_of(s.img)];
    for (const auto& p : parts)
        for (const auto& s : p.samples) --counts[key_of(s.img)];
    for (const auto& [k, c] : counts) CHECK(c == 0);

    auto again = tsvc::split(ds, SplitFractions{}, 3);
    CHECK(again[0] == parts[0]);
    CHECK(again[1] == parts[1]);
    CHECK(again[2] == parts[2]);
    auto other = tsvc::split(ds, SplitFractions{}, 4);
    CHECK(other[0] != parts[0]);
}

TEST_CASE("split rejects malformed fractions") {
    DatasetSpec spec;
    spec.n = 100;
    auto ds = tsvc::generate(spec);
    CHECK_THROWS_AS(tsvc::split(ds, SplitFractions{0.5, 0.2, 0.2}, 1), std::invalid_argument);
    CHECK_THROWS_AS(tsvc::split(ds, SplitFractions{1.0, 0.0, 0.0}, 1), std::invalid_argument);
}

TEST_CASE("layout split concatenates back to the original order") {
    DatasetSpec spec;
    spec.n = 100;
    auto ds = tsvc::generate(spec);
    auto parts = tsvc::split_by_layout(ds, SplitFractions{});
    CHECK(parts[0].size() == 80);
    CHECK(parts[1].size() == 10);
    CHECK(parts[2].size() == 10);
    std::size_t idx = 0;
    for (const auto& p : parts)
        for (const auto& s : p.samples) CHECK(s == ds.samples[idx++]);
}

TEST_CASE("file round-trip preserves every record") {
    DatasetSpec spec;
    spec.n = 40;
    auto ds = tsvc::inject_noise(tsvc::generate(spec), 0.1, 9);
    auto path = temp_path("ds_roundtrip.tsvd");
    tsvc::write_dataset(ds, path);

    auto back = tsvc::read_dataset(path);
    CHECK(back == ds);

    auto path2 = temp_path("ds_roundtrip2.tsvd");
    tsvc::write_dataset(back, path2);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("file size follows the fixed record layout") {
    DatasetSpec spec;
    spec.n = 17;
    spec.d_img = 10;
    spec.d_txt = 6;
    spec.d_latent = 4;
    auto ds = tsvc::generate(spec);
    auto path = temp_path("ds_size.tsvd");
    tsvc::write_dataset(ds, path);
    // 28 header bytes, then per record 4 bytes per feature plus 2 flag bytes.
    CHECK(slurp(path).size() == 28 + 17 * (4 * 10 + 4 * 6 + 2));
    std::remove(path.c_str());
}

TEST_CASE("corrupted dataset files report the offending byte offset") {
    DatasetSpec spec;
    spec.n = 12;
    spec.d_img = 4;
    spec.d_txt = 3;
    spec.d_latent = 2;
    auto ds = tsvc::generate(spec);
    auto path = temp_path("ds_corrupt.tsvd");
    tsvc::write_dataset(ds, path);
    auto good = slurp(path);

    auto bad_magic = good;
    bad_magic[1] = 'Z';
    dump(path, bad_magic);
    try {
        tsvc::read_dataset(path);
        FAIL("expected FormatError");
    } catch (const tsvc::FormatError& e) {
        CHECK(e.offset() == 0);
    }

    auto bad_version = good;
    bad_version[4] = 42;
    dump(path, bad_version);
    try {
        tsvc::read_dataset(path);
        FAIL("expected FormatError");
    } catch (const tsvc::FormatError& e) {
        CHECK(e.offset() == 4);
    }

    // First record's y flag sits right after its two feature blocks.
    std::size_t y_off = 28 + 4 * 4 + 4 * 3;
    auto bad_label = good;
    bad_label[y_off] = 7;
    dump(path, bad_label);
    try {
        tsvc::read_dataset(path);
        FAIL("expected FormatError");
    } catch (const tsvc::FormatError& e) {
        CHECK(e.offset() == y_off);
    }

    for (std::size_t cut : {std::size_t{2}, std::size_t{27}, good.size() / 2, good.size() - 1}) {
        dump(path, good.substr(0, cut));
        CHECK_THROWS_AS(tsvc::read_dataset(path), tsvc::FormatError);
    }

    dump(path, good + "!");
    CHECK_THROWS_AS(tsvc::read_dataset(path), tsvc::FormatError);
    std::remove(path.c_str());
}
