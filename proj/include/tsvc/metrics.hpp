#ifndef TSVC_METRICS_HPP
#define TSVC_METRICS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "tsvc/common.hpp"
#include "tsvc/gmm.hpp"

namespace tsvc {

enum class Direction : std::uint8_t { image_to_text, text_to_image };

struct RetrievalReport {
    double i2t_r1 = 0.0;
    double i2t_r5 = 0.0;
    double i2t_r10 = 0.0;
    double t2i_r1 = 0.0;
    double t2i_r5 = 0.0;
    double t2i_r10 = 0.0;
    double rsum = 0.0;
};

struct PartitionQuality {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct BatterySummary {
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::vector<double> values;  // one per seed, input order
};

/// Percentage of queries whose true match (the diagonal entry) ranks in the
/// top k. Ranking is by strictly greater score; equal scores rank the lower
/// gallery index first.
double recall_at_k(const Matrix& sim, std::size_t k, Direction direction);

/// R@{1,5,10} in both directions plus their sum. Gallery must hold at least
/// 10 items.
RetrievalReport report(const Matrix& sim);

/// Precision/recall/F1 of the clean side of a partition against hidden
/// ground-truth flags. Empty clean set gives precision 0.
PartitionQuality partition_quality(const FlowPartition& flows,
                                   const std::vector<std::uint8_t>& truly_clean);

/// Runs run_fn once per seed (at least 3) and summarizes the returned
/// metric. The summary is invariant to seed order.
BatterySummary seed_battery(const std::function<double(std::uint64_t)>& run_fn,
                            const std::vector<std::uint64_t>& seeds);

double median_of(std::vector<double> values);

}  // namespace tsvc

#endif
