#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "tsvc/gmm.hpp"
#include "tsvc/metrics.hpp"

using tsvc::Direction;
using tsvc::FlowPartition;
using tsvc::Matrix;

namespace {

Matrix random_sim(std::mt19937_64& rng, std::size_t n, bool quantize) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Matrix sim(n, n);
    for (double& e : sim.data) {
        e = unif(rng);
        if (quantize) e = std::round(e * 8.0) / 8.0;
    }
    return sim;
}

// Oracle recall: rank every query by explicit comparison counting, ties
// favoring the lower gallery index.
double oracle_recall(const Matrix& sim, std::size_t k, Direction dir) {
    std::size_t n = sim.rows;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double truth = sim.at(i, i);
        std::size_t rank = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = dir == Direction::image_to_text ? sim.at(i, j) : sim.at(j, i);
            if (s > truth || (s == truth && j < i)) ++rank;
        }
        if (rank <= k) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

Matrix identity_sim(std::size_t n) {
    Matrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) sim.at(i, i) = 1.0;
    return sim;
}

}  // namespace

TEST_CASE("perfect similarity gives full recall everywhere") {
    auto sim = identity_sim(12);
    CHECK(tsvc::recall_at_k(sim, 1, Direction::image_to_text) == 100.0);
    CHECK(tsvc::recall_at_k(sim, 1, Direction::text_to_image) == 100.0);
    auto r = tsvc::report(sim);
    CHECK(r.rsum == 600.0);
}

TEST_CASE("an adversarial diagonal ranks last") {
    // Diagonal is the weakest entry of every row and column.
    std::size_t n = 12;
    Matrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sim.at(i, j) = i == j ? -1.0 : 1.0;
    CHECK(tsvc::recall_at_k(sim, 1, Direction::image_to_text) == 0.0);
    CHECK(tsvc::recall_at_k(sim, 10, Direction::text_to_image) == 0.0);
    CHECK(tsvc::recall_at_k(sim, n, Direction::image_to_text) == 100.0);
}

TEST_CASE("ties rank the lower gallery index first") {
    // Row 0 all equal: the truth at index 0 wins its ties.
    // Row 1 all equal: index 0 outranks the truth at index 1.
    Matrix sim(2, 2);
    sim.at(0, 0) = 0.5;
    sim.at(0, 1) = 0.5;
    sim.at(1, 0) = 0.5;
    sim.at(1, 1) = 0.5;
    CHECK(tsvc::recall_at_k(sim, 1, Direction::image_to_text) == 50.0);
    CHECK(tsvc::recall_at_k(sim, 1, Direction::text_to_image) == 50.0);
}

TEST_CASE("recall matches the counting oracle on random grids") {
    std::mt19937_64 rng(90);
    for (int trial = 0; trial < 20; ++trial) {
        auto sim = random_sim(rng, 50, trial % 2 == 1);
        for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{50}}) {
            CHECK(tsvc::recall_at_k(sim, k, Direction::image_to_text) ==
                  oracle_recall(sim, k, Direction::image_to_text));
            CHECK(tsvc::recall_at_k(sim, k, Direction::text_to_image) ==
                  oracle_recall(sim, k, Direction::text_to_image));
        }
    }
}

TEST_CASE("recall is monotone in k and the report composes recalls") {
    std::mt19937_64 rng(91);
    auto sim = random_sim(rng, 30, false);
    auto r = tsvc::report(sim);
    CHECK(r.i2t_r1 <= r.i2t_r5);
    CHECK(r.i2t_r5 <= r.i2t_r10);
    CHECK(r.t2i_r1 <= r.t2i_r5);
    CHECK(r.t2i_r5 <= r.t2i_r10);
    CHECK(r.i2t_r1 == tsvc::recall_at_k(sim, 1, Direction::image_to_text));
    CHECK(r.i2t_r5 == tsvc::recall_at_k(sim, 5, Direction::image_to_text));
    CHECK(r.i2t_r10 == tsvc::recall_at_k(sim, 10, Direction::image_to_text));
    CHECK(r.t2i_r1 == tsvc::recall_at_k(sim, 1, Direction::text_to_image));
    CHECK(r.t2i_r5 == tsvc::recall_at_k(sim, 5, Direction::text_to_image));
    CHECK(r.t2i_r10 == tsvc::recall_at_k(sim, 10, Direction::text_to_image));
    CHECK(r.rsum ==
          r.i2t_r1 + r.i2t_r5 + r.i2t_r10 + r.t2i_r1 + r.t2i_r5 + r.t2i_r10);
}

TEST_CASE("recall rejects invalid grids and cutoffs") {
    auto sim = identity_sim(5);
    CHECK_THROWS_AS(tsvc::recall_at_k(sim, 0, Direction::image_to_text), std::invalid_argument);
    CHECK_THROWS_AS(tsvc::recall_at_k(sim, 6, Direction::image_to_text), std::invalid_argument);
    Matrix rect(3, 4);
    CHECK_THROWS_AS(tsvc::recall_at_k(rect, 1, Direction::image_to_text), std::invalid_argument);
    Matrix empty;
    CHECK_THROWS_AS(tsvc::recall_at_k(empty, 1, Direction::image_to_text), std::invalid_argument);
    // The full report needs k = 10 to be meaningful.
    CHECK_THROWS_AS(tsvc::report(identity_sim(9)), std::invalid_argument);
}

TEST_CASE("partition quality against hidden flags") {
    // 10 samples, 6 truly clean.
    std::vector<std::uint8_t> truth{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};

    FlowPartition perfect;
    perfect.clean = {0, 1, 2, 3, 4, 5};
    perfect.noisy = {6, 7, 8, 9};
    auto q = tsvc::partition_quality(perfect, truth);
    CHECK(q.precision == 1.0);
    CHECK(q.recall == 1.0);
    CHECK(q.f1 == 1.0);

    FlowPartition everything;
    everything.clean = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    q = tsvc::partition_quality(everything, truth);
    CHECK(q.precision == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(q.recall == 1.0);
    CHECK(q.f1 == doctest::Approx(2.0 * 0.6 / 1.6).epsilon(1e-12));

    FlowPartition nothing;
    nothing.noisy = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    q = tsvc::partition_quality(nothing, truth);
    CHECK(q.precision == 0.0);
    CHECK(q.recall == 0.0);
    CHECK(q.f1 == 0.0);
}

TEST_CASE("partition quality matches a set-arithmetic oracle") {
    std::mt19937_64 rng(92);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 40;
        std::vector<std::uint8_t> truth(n);
        FlowPartition flows;
        std::bernoulli_distribution clean_truth(0.7), clean_guess(0.6);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = clean_truth(rng) ? 1 : 0;
            (clean_guess(rng) ? flows.clean : flows.noisy).push_back(i);
        }
        auto q = tsvc::partition_quality(flows, truth);

        double tp = 0.0, fp = 0.0, fn = 0.0;
        for (std::size_t i : flows.clean) (truth[i] ? tp : fp) += 1.0;
        for (std::size_t i : flows.noisy)
            if (truth[i]) fn += 1.0;
        double prec = flows.clean.empty() ? 0.0 : tp / (tp + fp);
        double rec = tp + fn == 0.0 ? 0.0 : tp / (tp + fn);
        CHECK(q.precision == doctest::Approx(prec).epsilon(1e-12));
        CHECK(q.recall == doctest::Approx(rec).epsilon(1e-12));
        double f1 = prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
        CHECK(q.f1 == doctest::Approx(f1).epsilon(1e-12));
    }
}

TEST_CASE("partition quality rejects a broken division") {
    std::vector<std::uint8_t> truth{1, 0, 1};
    FlowPartition missing;
    missing.clean = {0};
    missing.noisy = {2};
    CHECK_THROWS_AS(tsvc::partition_quality(missing, truth), std::invalid_argument);

    FlowPartition overlap;
    overlap.clean = {0, 1};
    overlap.noisy = {1, 2};
    CHECK_THROWS_AS(tsvc::partition_quality(overlap, truth), std::invalid_argument);

    FlowPartition out_of_range;
    out_of_range.clean = {0, 1, 2};
    out_of_range.noisy = {3};
    CHECK_THROWS_AS(tsvc::partition_quality(out_of_range, truth), std::invalid_argument);
}

TEST_CASE("median and battery summaries") {
    CHECK(tsvc::median_of({1.0, 2.0, 3.0}) == 2.0);
    CHECK(tsvc::median_of({3.0, 1.0, 2.0, 4.0}) == 2.5);
    CHECK(tsvc::median_of({5.0}) == 5.0);
    CHECK_THROWS_AS(tsvc::median_of({}), std::invalid_argument);

    auto battery = tsvc::seed_battery(
        [](std::uint64_t seed) { return static_cast<double>(seed % 7); }, {3, 9, 5, 1});
    CHECK(battery.values == std::vector<double>{3.0, 2.0, 5.0, 1.0});
    CHECK(battery.median == 2.5);
    CHECK(battery.min == 1.0);
    CHECK(battery.max == 5.0);

    auto reordered = tsvc::seed_battery(
        [](std::uint64_t seed) { return static_cast<double>(seed % 7); }, {1, 3, 5, 9});
    CHECK(reordered.median == battery.median);
    CHECK(reordered.min == battery.min);
    CHECK(reordered.max == battery.max);

    CHECK_THROWS_AS(tsvc::seed_battery([](std::uint64_t) { return 0.0; }, {1, 2}),
                    std::invalid_argument);
}
