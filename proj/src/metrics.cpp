#include "tsvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsvc {

double recall_at_k(const Matrix& sim, std::size_t k, Direction direction) {
    if (sim.rows != sim.cols || sim.rows == 0)
        throw std::invalid_argument("similarity matrix must be square and nonempty");
    const std::size_t n = sim.rows;
    if (k < 1 || k > n) throw std::invalid_argument("k must be in [1, gallery size]");

    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double truth = sim.at(i, i);
        // Rank of the true match: 1 + items scoring higher + equal-scoring
        // items at a lower gallery index.
        std::size_t rank = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double s =
                direction == Direction::image_to_text ? sim.at(i, j) : sim.at(j, i);
            if (s > truth || (s == truth && j < i)) ++rank;
        }
        if (rank <= k) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

RetrievalReport report(const Matrix& sim) {
    if (sim.rows != sim.cols || sim.rows < 10)
        throw std::invalid_argument("similarity matrix must be square with gallery >= 10");
    RetrievalReport rep;
    rep.i2t_r1 = recall_at_k(sim, 1, Direction::image_to_text);
    rep.i2t_r5 = recall_at_k(sim, 5, Direction::image_to_text);
    rep.i2t_r10 = recall_at_k(sim, 10, Direction::image_to_text);
    rep.t2i_r1 = recall_at_k(sim, 1, Direction::text_to_image);
    rep.t2i_r5 = recall_at_k(sim, 5, Direction::text_to_image);
    rep.t2i_r10 = recall_at_k(sim, 10, Direction::text_to_image);
    rep.rsum = rep.i2t_r1 + rep.i2t_r5 + rep.i2t_r10 + rep.t2i_r1 + rep.t2i_r5 + rep.t2i_r10;
    return rep;
}

PartitionQuality partition_quality(const FlowPartition& flows,
                                   const std::vector<std::uint8_t>& truly_clean) {
    const std::size_t n = truly_clean.size();
    std::vector<std::uint8_t> seen(n, 0);
    std::size_t covered = 0;
    for (const auto* side : {&flows.clean, &flows.noisy}) {
        for (std::size_t idx : *side) {
            if (idx >= n) throw std::invalid_argument("partition index out of range");
            if (seen[idx]) throw std::invalid_argument("partition indices overlap");
            seen[idx] = 1;
            ++covered;
        }
    }
    if (covered != n) throw std::invalid_argument("partition does not cover all flags");

    std::size_t true_clean_total = 0;
    for (std::uint8_t f : truly_clean) true_clean_total += f ? 1 : 0;
    std::size_t hit = 0;
    for (std::size_t idx : flows.clean) hit += truly_clean[idx] ? 1 : 0;

    PartitionQuality q;
    q.precision = flows.clean.empty()
                      ? 0.0
                      : static_cast<double>(hit) / static_cast<double>(flows.clean.size());
    q.recall = true_clean_total == 0
                   ? 0.0
                   : static_cast<double>(hit) / static_cast<double>(true_clean_total);
    q.f1 = q.precision + q.recall > 0.0 ? 2.0 * q.precision * q.recall / (q.precision + q.recall)
                                        : 0.0;
    return q;
}

double median_of(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty sequence");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

BatterySummary seed_battery(const std::function<double(std::uint64_t)>& run_fn,
                            const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 3) throw std::invalid_argument("battery needs at least 3 seeds");
    if (!run_fn) throw std::invalid_argument("battery needs a run function");

    BatterySummary summary;
    summary.values.reserve(seeds.size());
    for (std::uint64_t seed : seeds) summary.values.push_back(run_fn(seed));
    summary.median = median_of(summary.values);
    summary.min = *std::min_element(summary.values.begin(), summary.values.end());
    summary.max = *std::max_element(summary.values.begin(), summary.values.end());
    return summary;
}

}  // namespace tsvc
