#ifndef TSVC_HISTOGRAM_MI_HPP
#define TSVC_HISTOGRAM_MI_HPP

#include <cstddef>
#include <vector>

#include "tsvc/common.hpp"

namespace tsvc {

using FeatureVector = std::vector<double>;
using ProbabilityVector = std::vector<double>;
using ProbabilityMatrix = Matrix;

/// Binning policy for the histogram estimators. bins == 0 lets the
/// estimator pick clamp(floor(sqrt(dim)), 8, 64) from the vector length.
/// The bin range spans the joint min/max of the two inputs, padded by
/// eps_range * (max - min + 1) at each end so every value, including the
/// maximum, lands strictly inside a half-open bin.
struct HistogramConfig {
    int bins = 0;
    double eps_range = 1e-9;

    int resolve_bins(std::size_t dim) const;
    void validate() const;
};

/// Evenly spaced bin edges covering both vectors, shared by the x and y
/// axes of the joint grid. Length resolve_bins(x.size()) + 1.
std::vector<double> joint_range_edges(const FeatureVector& x, const FeatureVector& y,
                                      const HistogramConfig& cfg);

/// Fraction of entries of v falling in each half-open bin [edges[j], edges[j+1]).
/// Every entry must land inside the edge span; an entry outside it is a
/// defect in the caller's range policy and throws std::logic_error.
ProbabilityVector marginal_histogram(const FeatureVector& v, const std::vector<double>& edges);

/// 2-D bin-occupancy frequencies of the paired entries (x_i, y_i).
/// Row j / column k corresponds to the j-th x-bin and the k-th y-bin.
ProbabilityMatrix joint_histogram(const FeatureVector& x, const FeatureVector& y,
                                  const std::vector<double>& edges_x,
                                  const std::vector<double>& edges_y);

/// Histogram estimate of the mutual information between the paired
/// entries of x and y, in nats. Zero joint cells contribute exactly zero;
/// the result is clamped to be nonnegative.
double mutual_information(const FeatureVector& x, const FeatureVector& y,
                          const HistogramConfig& cfg = {});

/// Histogram entropy of v in nats, under the same range policy as
/// mutual_information (so mutual_information(v, v) == entropy(v)).
double entropy(const FeatureVector& v, const HistogramConfig& cfg = {});

}  // namespace tsvc

#endif
