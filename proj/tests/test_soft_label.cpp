#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "tsvc/soft_label.hpp"

using tsvc::ChangeRates;
using tsvc::EmbeddedBatch;
using tsvc::FeatureVector;

namespace {

FeatureVector random_unit(std::mt19937_64& rng, std::size_t d) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    FeatureVector v(d);
    double norm = 0.0;
    for (double& e : v) {
        e = gauss(rng);
        norm += e * e;
    }
    norm = std::sqrt(norm);
    for (double& e : v) e /= norm;
    return v;
}

EmbeddedBatch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    EmbeddedBatch b;
    for (std::size_t i = 0; i < n; ++i) {
        b.img.push_back(random_unit(rng, d));
        b.txt.push_back(random_unit(rng, d));
    }
    return b;
}

}  // namespace

TEST_CASE("anchor is the minimum loss pair, lowest index on ties") {
    std::mt19937_64 rng(31);
    auto batch = random_batch(rng, 3, 64);

    auto a = tsvc::select_anchor({0.5, 0.1, 0.9}, batch);
    CHECK(a.index == 1);
    CHECK(a.img_emb == batch.img[1]);
    CHECK(a.txt_emb == batch.txt[1]);
    CHECK(a.mi_self == tsvc::mutual_information(batch.img[1], batch.txt[1]));

    auto two = random_batch(rng, 2, 64);
    CHECK(tsvc::select_anchor({0.2, 0.2}, two).index == 0);
}

TEST_CASE("anchor selection matches an independent argmin scan") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        auto batch = random_batch(rng, 32, 48);
        std::uniform_real_distribution<double> unif(0.0, 2.0);
        std::vector<double> losses(32);
        for (double& l : losses) l = unif(rng);
        std::size_t want = 0;
        for (std::size_t i = 1; i < losses.size(); ++i)
            if (losses[i] < losses[want]) want = i;
        CHECK(tsvc::select_anchor(losses, batch).index == want);
    }
}

TEST_CASE("anchor selection rejects malformed batches") {
    std::mt19937_64 rng(1);
    auto batch = random_batch(rng, 3, 32);
    CHECK_THROWS_AS(tsvc::select_anchor({0.1, 0.2}, batch), std::invalid_argument);

    auto single = random_batch(rng, 1, 32);
    CHECK_THROWS_AS(tsvc::select_anchor({0.1}, single), std::invalid_argument);

    CHECK_THROWS_AS(tsvc::select_anchor({0.1, std::nan(""), 0.3}, batch), std::invalid_argument);

    auto ragged = random_batch(rng, 3, 32);
    ragged.txt.pop_back();
    CHECK_THROWS_AS(tsvc::select_anchor({0.1, 0.2, 0.3}, ragged), std::invalid_argument);
}

TEST_CASE("change rates from hand-picked information values") {
    auto r = tsvc::change_rates_from_mi(0.8, 0.4, 0.6, 0.7);
    CHECK(r.pair_rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.text_rate == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.image_rate == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("near-zero anchor information keeps rates finite") {
    auto r = tsvc::change_rates_from_mi(0.0, 0.4, 0.6, 0.7);
    CHECK(std::isfinite(r.pair_rate));
    CHECK(std::isfinite(r.text_rate));
    CHECK(std::isfinite(r.image_rate));
    // The zero anchor MI is clamped to the guard before the ratio.
    double guarded = tsvc::kMiEpsilon;
    CHECK(r.pair_rate == doctest::Approx((0.4 - guarded) / guarded).epsilon(1e-12));
}

TEST_CASE("a candidate identical to the anchor has zero change rates") {
    std::mt19937_64 rng(17);
    auto batch = random_batch(rng, 2, 64);
    auto anchor = tsvc::select_anchor({0.1, 0.9}, batch);
    auto r = tsvc::change_rates(anchor, anchor.img_emb, anchor.txt_emb);
    CHECK(r.pair_rate == 0.0);
    CHECK(r.text_rate == 0.0);
    CHECK(r.image_rate == 0.0);
    CHECK(tsvc::soft_label(r) == 1.0);
}

TEST_CASE("soft label closed-form values") {
    CHECK(std::abs(tsvc::soft_label({0.5, 0.25, 0.125}) - 1.0 / 1.625) <= 1e-9);
    CHECK(tsvc::soft_label({9.0, 0.0, 0.0}) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(tsvc::soft_label({0.0, 0.3, 0.3}) == 1.0);
}

TEST_CASE("soft label stays in the half-open unit interval") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> unif(0.0, 50.0);
    for (int i = 0; i < 10000; ++i) {
        double y = tsvc::soft_label({unif(rng), unif(rng), unif(rng)});
        CHECK(y > 0.0);
        CHECK(y <= 1.0);
    }
}

TEST_CASE("soft label decreases as variation grows") {
    // Strictly monotone in the pair rate and in the cross-rate gap.
    double prev = tsvc::soft_label({0.0, 0.0, 0.0});
    for (int i = 1; i <= 20; ++i) {
        double y = tsvc::soft_label({0.1 * i, 0.0, 0.0});
        CHECK(y < prev);
        prev = y;
    }
    prev = tsvc::soft_label({0.5, 0.0, 0.0});
    for (int i = 1; i <= 20; ++i) {
        double y = tsvc::soft_label({0.5, 0.1 * i, 0.0});
        CHECK(y < prev);
        prev = y;
    }
    // The two cross rates only matter through their absolute gap.
    CHECK(tsvc::soft_label({0.5, 0.7, 0.2}) == tsvc::soft_label({0.5, 0.2, 0.7}));
}

TEST_CASE("soft label rejects invalid rates") {
    CHECK_THROWS_AS(tsvc::soft_label({-0.1, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(tsvc::soft_label({std::nan(""), 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(tsvc::soft_label({0.0, std::numeric_limits<double>::infinity(), 0.0}),
                    std::invalid_argument);
}

TEST_CASE("batch rectification pins the anchor label to one") {
    std::mt19937_64 rng(55);
    auto batch = random_batch(rng, 16, 48);
    std::uniform_real_distribution<double> unif(0.1, 2.0);
    std::vector<double> losses(16);
    for (double& l : losses) l = unif(rng);
    losses[5] = 0.01;

    auto labels = tsvc::rectify_batch(batch, losses);
    REQUIRE(labels.size() == 16);
    CHECK(labels[5] == 1.0);
    for (double y : labels) {
        CHECK(y > 0.0);
        CHECK(y <= 1.0);
    }

    // Every label must agree with a from-scratch recomputation.
    auto anchor = tsvc::select_anchor(losses, batch);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i == anchor.index) continue;
        auto r = tsvc::change_rates(anchor, batch.img[i], batch.txt[i]);
        CHECK(labels[i] == tsvc::soft_label(r));
    }
}

TEST_CASE("a batch of two identical pairs rectifies to all ones") {
    std::mt19937_64 rng(21);
    auto u = random_unit(rng, 64);
    auto v = random_unit(rng, 64);
    EmbeddedBatch batch;
    batch.img = {u, u};
    batch.txt = {v, v};
    auto labels = tsvc::rectify_batch(batch, {0.3, 0.3});
    CHECK(labels[0] == 1.0);
    CHECK(labels[1] == 1.0);
}

TEST_CASE("rectification is equivariant under batch permutation") {
    std::mt19937_64 rng(66);
    auto batch = random_batch(rng, 12, 48);
    std::uniform_real_distribution<double> unif(0.1, 2.0);
    std::vector<double> losses(12);
    for (double& l : losses) l = unif(rng);
    auto labels = tsvc::rectify_batch(batch, losses);

    std::vector<std::size_t> perm(12);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    EmbeddedBatch shuffled;
    std::vector<double> shuffled_losses(12);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.img.push_back(batch.img[perm[i]]);
        shuffled.txt.push_back(batch.txt[perm[i]]);
        shuffled_losses[i] = losses[perm[i]];
    }
    auto shuffled_labels = tsvc::rectify_batch(shuffled, shuffled_losses);
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK(shuffled_labels[i] == labels[perm[i]]);
}

TEST_CASE("rectification rejects undersized batches") {
    std::mt19937_64 rng(2);
    auto single = random_batch(rng, 1, 32);
    CHECK_THROWS_AS(tsvc::rectify_batch(single, {0.1}), std::invalid_argument);
}
