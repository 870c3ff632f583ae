#include "tsvc/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "tsvc/common.hpp"

namespace tsvc {

namespace {

double log_normal_pdf(double x, double mean, double var) {
    const double diff = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + diff * diff / var);
}

double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Linear-interpolation percentile over a sorted copy, q in [0, 1].
double percentile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct NormalizedLosses {
    std::vector<double> values;  // mapped to [0, 1]
    double lo = 0.0;
    double hi = 1.0;
};

NormalizedLosses normalize(const std::vector<double>& losses) {
    NormalizedLosses out;
    out.lo = *std::min_element(losses.begin(), losses.end());
    out.hi = *std::max_element(losses.begin(), losses.end());
    if (out.lo == out.hi) throw DegenerateInput("all losses identical; mixture fit is undefined");
    out.values.reserve(losses.size());
    const double span = out.hi - out.lo;
    for (double l : losses) out.values.push_back((l - out.lo) / span);
    return out;
}

void validate_losses(const std::vector<double>& losses) {
    if (losses.size() < 4) throw std::invalid_argument("mixture fit needs at least 4 losses");
    for (double l : losses) {
        if (!std::isfinite(l)) throw std::invalid_argument("losses must be finite");
    }
}

}  // namespace

GmmModel fit_gmm_1d(const std::vector<double>& losses, int max_iter, double tol,
                    std::uint64_t /*seed*/) {
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    validate_losses(losses);

    const NormalizedLosses norm = normalize(losses);
    const std::vector<double>& x = norm.values;
    const std::size_t n = x.size();

    GmmModel model;
    {
        std::vector<double> sorted = x;
        std::sort(sorted.begin(), sorted.end());
        double m0 = percentile(sorted, 0.10);
        double m1 = percentile(sorted, 0.90);
        if (m0 == m1) {
            m0 = sorted.front();
            m1 = sorted.back();
        }
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var = std::max(var / static_cast<double>(n), kVarFloor);

        model.weights = {0.5, 0.5};
        model.means = {m0, m1};
        model.variances = {var, var};
    }

    std::vector<double> resp0(n);  // responsibility of component 0
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l0 =
                std::log(model.weights[0]) + log_normal_pdf(x[i], model.means[0], model.variances[0]);
            const double l1 =
                std::log(model.weights[1]) + log_normal_pdf(x[i], model.means[1], model.variances[1]);
            const double lse = logsumexp2(l0, l1);
            resp0[i] = std::exp(l0 - lse);
            ll += lse;
        }
        model.loglik_trace.push_back(ll);

        double n0 = 0.0;
        for (double r : resp0) n0 += r;
        const double n1 = static_cast<double>(n) - n0;
        // A fully collapsed component would divide by zero below; the
        // variance floor makes this unreachable in practice but keep a guard.
        if (n0 <= 0.0 || n1 <= 0.0)
            throw DegenerateInput("mixture component collapsed to zero weight");

        double mu0 = 0.0;
        double mu1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mu0 += resp0[i] * x[i];
            mu1 += (1.0 - resp0[i]) * x[i];
        }
        mu0 /= n0;
        mu1 /= n1;

        double v0 = 0.0;
        double v1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v0 += resp0[i] * (x[i] - mu0) * (x[i] - mu0);
            v1 += (1.0 - resp0[i]) * (x[i] - mu1) * (x[i] - mu1);
        }
        model.weights = {n0 / static_cast<double>(n), n1 / static_cast<double>(n)};
        model.means = {mu0, mu1};
        model.variances = {std::max(v0 / n0, kVarFloor), std::max(v1 / n1, kVarFloor)};

        if (ll - prev_ll < tol && iter > 0) break;
        prev_ll = ll;
    }

    // Report parameters in original loss units.
    const double span = norm.hi - norm.lo;
    for (int c = 0; c < 2; ++c) {
        model.means[c] = norm.lo + model.means[c] * span;
        model.variances[c] = std::max(model.variances[c] * span * span, kVarFloor);
    }
    model.clean_component = model.means[0] <= model.means[1] ? 0 : 1;
    return model;
}

double posterior_clean(const GmmModel& model, double loss) {
    if (!std::isfinite(loss)) throw std::invalid_argument("loss must be finite");
    const int c = model.clean_component;
    const int o = 1 - c;
    const double lc = std::log(model.weights[c]) + log_normal_pdf(loss, model.means[c], model.variances[c]);
    const double lo = std::log(model.weights[o]) + log_normal_pdf(loss, model.means[o], model.variances[o]);
    return std::exp(lc - logsumexp2(lc, lo));
}

std::vector<double> posterior_clean(const GmmModel& model, const std::vector<double>& losses) {
    std::vector<double> out;
    out.reserve(losses.size());
    for (double l : losses) out.push_back(posterior_clean(model, l));
    return out;
}

FlowPartition partition(const std::vector<double>& losses, const GmmModel& model, double delta,
                        PartitionRule rule) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
    for (double l : losses) {
        if (!std::isfinite(l)) throw std::invalid_argument("losses must be finite");
    }

    FlowPartition flows;
    if (rule == PartitionRule::posterior) {
        for (std::size_t i = 0; i < losses.size(); ++i) {
            (posterior_clean(model, losses[i]) >= delta ? flows.clean : flows.noisy).push_back(i);
        }
        return flows;
    }

    const double lo = losses.empty() ? 0.0 : *std::min_element(losses.begin(), losses.end());
    const double hi = losses.empty() ? 1.0 : *std::max_element(losses.begin(), losses.end());
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        ((losses[i] - lo) / span < delta ? flows.clean : flows.noisy).push_back(i);
    }
    return flows;
}

double clean_center(const GmmModel& model) { return model.means[model.clean_component]; }

}  // namespace tsvc
