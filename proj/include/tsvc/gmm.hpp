#ifndef TSVC_GMM_HPP
#define TSVC_GMM_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace tsvc {

/// Lower bound applied to both component variances during EM and after
/// de-normalization.
inline constexpr double kVarFloor = 1e-6;

/// Two-component 1-D Gaussian mixture over per-sample losses. The component
/// with the smaller mean models clean pairs.
struct GmmModel {
    std::array<double, 2> weights{0.5, 0.5};
    std::array<double, 2> means{0.0, 1.0};
    std::array<double, 2> variances{1.0, 1.0};
    int clean_component = 0;
    std::vector<double> loglik_trace;
};

enum class PartitionRule : std::uint8_t { posterior, raw_loss };

/// Index sets of one clean/noisy division of a loss vector. Indices refer
/// to positions in the partitioned vector and are strictly increasing.
struct FlowPartition {
    std::vector<std::size_t> clean;
    std::vector<std::size_t> noisy;
};

/// Fit by EM on min-max normalized losses; parameters are reported in the
/// original loss units. Deterministic: means start at the 10th/90th
/// percentiles. Needs >= 4 finite samples; identical samples are degenerate.
/// seed is accepted for interface stability but unused.
GmmModel fit_gmm_1d(const std::vector<double>& losses, int max_iter = 50, double tol = 1e-6,
                    std::uint64_t seed = 0);

/// P(clean component | loss) under the fitted mixture.
double posterior_clean(const GmmModel& model, double loss);

std::vector<double> posterior_clean(const GmmModel& model, const std::vector<double>& losses);

/// Split losses at threshold delta. posterior: clean iff P(clean|loss) >= delta.
/// raw_loss: clean iff the min-max normalized loss < delta.
FlowPartition partition(const std::vector<double>& losses, const GmmModel& model, double delta,
                        PartitionRule rule = PartitionRule::posterior);

/// Mean of the clean component, the reference point for adaptive margins.
double clean_center(const GmmModel& model);

}  // namespace tsvc

#endif
