#include "tsvc/histogram_mi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsvc {

namespace {

void validate_feature_vector(const FeatureVector& v, const char* name) {
    if (v.size() < 2) {
        throw std::invalid_argument(std::string(name) + ": need at least 2 entries, got " +
                                    std::to_string(v.size()));
    }
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument(std::string(name) + ": non-finite entry");
        }
    }
}

void validate_edges(const std::vector<double>& edges, const char* name) {
    if (edges.size() < 3) {
        throw std::invalid_argument(std::string(name) + ": need at least 2 bins");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i - 1] < edges[i])) {
            throw std::invalid_argument(std::string(name) + ": edges must be strictly increasing");
        }
    }
}

// Index of the half-open bin [edges[j], edges[j+1]) containing x.
std::size_t bin_index(const std::vector<double>& edges, double x) {
    if (x < edges.front() || x >= edges.back()) {
        throw std::logic_error("histogram value outside edge span; range policy failed");
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    return static_cast<std::size_t>(it - edges.begin()) - 1;
}

}  // namespace

int HistogramConfig::resolve_bins(std::size_t dim) const {
    if (bins > 0) return bins;
    int b = static_cast<int>(std::floor(std::sqrt(static_cast<double>(dim))));
    return std::clamp(b, 8, 64);
}

void HistogramConfig::validate() const {
    if (bins != 0 && bins < 2) {
        throw std::invalid_argument("HistogramConfig: bins must be >= 2 (or 0 for automatic)");
    }
    if (!(eps_range > 0.0)) {
        throw std::invalid_argument("HistogramConfig: eps_range must be positive");
    }
}

std::vector<double> joint_range_edges(const FeatureVector& x, const FeatureVector& y,
                                      const HistogramConfig& cfg) {
    cfg.validate();
    validate_feature_vector(x, "x");
    validate_feature_vector(y, "y");

    double lo = x[0];
    double hi = x[0];
    for (double v : x) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : y) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    const double pad = cfg.eps_range * (hi - lo + 1.0);
    const double left = lo - pad;
    const double right = hi + pad;
    const int b = cfg.resolve_bins(x.size());

    std::vector<double> edges(static_cast<std::size_t>(b) + 1);
    const double width = (right - left) / b;
    for (int i = 0; i <= b; ++i) {
        edges[static_cast<std::size_t>(i)] = left + width * i;
    }
    edges.back() = right;  // exact upper edge regardless of rounding
    return edges;
}

ProbabilityVector marginal_histogram(const FeatureVector& v, const std::vector<double>& edges) {
    validate_feature_vector(v, "v");
    validate_edges(edges, "edges");

    const std::size_t b = edges.size() - 1;
    std::vector<std::size_t> counts(b, 0);
    for (double x : v) {
        ++counts[bin_index(edges, x)];
    }

    ProbabilityVector p(b);
    const double d = static_cast<double>(v.size());
    for (std::size_t j = 0; j < b; ++j) {
        p[j] = static_cast<double>(counts[j]) / d;
    }
    return p;
}

ProbabilityMatrix joint_histogram(const FeatureVector& x, const FeatureVector& y,
                                  const std::vector<double>& edges_x,
                                  const std::vector<double>& edges_y) {
    validate_feature_vector(x, "x");
    validate_feature_vector(y, "y");
    if (x.size() != y.size()) {
        throw std::invalid_argument("joint_histogram: x and y must have the same length");
    }
    validate_edges(edges_x, "edges_x");
    validate_edges(edges_y, "edges_y");

    const std::size_t bx = edges_x.size() - 1;
    const std::size_t by = edges_y.size() - 1;
    Matrix counts(bx, by);
    for (std::size_t i = 0; i < x.size(); ++i) {
        counts.at(bin_index(edges_x, x[i]), bin_index(edges_y, y[i])) += 1.0;
    }

    const double d = static_cast<double>(x.size());
    for (double& c : counts.data) {
        c /= d;
    }
    return counts;
}

double mutual_information(const FeatureVector& x, const FeatureVector& y,
                          const HistogramConfig& cfg) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("mutual_information: x and y must have the same length");
    }
    const std::vector<double> edges = joint_range_edges(x, y, cfg);
    const ProbabilityVector px = marginal_histogram(x, edges);
    const ProbabilityVector py = marginal_histogram(y, edges);
    const ProbabilityMatrix pxy = joint_histogram(x, y, edges, edges);

    double mi = 0.0;
    for (std::size_t j = 0; j < pxy.rows; ++j) {
        for (std::size_t k = 0; k < pxy.cols; ++k) {
            const double p = pxy.at(j, k);
            if (p > 0.0) {
                mi += p * std::log(p / (px[j] * py[k]));
            }
        }
    }
    return mi < 0.0 ? 0.0 : mi;
}

double entropy(const FeatureVector& v, const HistogramConfig& cfg) {
    const std::vector<double> edges = joint_range_edges(v, v, cfg);
    const ProbabilityVector p = marginal_histogram(v, edges);

    double h = 0.0;
    for (double pj : p) {
        if (pj > 0.0) {
            h -= pj * std::log(pj);
        }
    }
    return h < 0.0 ? 0.0 : h;
}

}  // namespace tsvc
