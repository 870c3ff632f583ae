#include "tsvc/dasm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tsvc {

namespace {

void validate_square_batch(const Matrix& sim) {
    if (sim.rows != sim.cols) throw std::invalid_argument("similarity matrix must be square");
    if (sim.rows < 2) throw std::invalid_argument("batch needs at least 2 pairs");
}

double hinge(double x) { return x > 0.0 ? x : 0.0; }

LossStats stats_from_terms(const TripletTerms& terms, double clean_center,
                           std::vector<double> center_dist) {
    LossStats stats;
    stats.per_sample = terms.per_sample;
    stats.total = terms.total;
    stats.clean_center = clean_center;
    stats.center_dist = std::move(center_dist);
    return stats;
}

}  // namespace

void MarginParams::validate() const {
    if (!(base > 1.0)) throw std::invalid_argument("margin base must be > 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("margin alpha must be > 0");
}

std::pair<std::size_t, std::size_t> hard_negatives(const Matrix& sim, std::size_t i) {
    validate_square_batch(sim);
    if (i >= sim.rows) throw std::invalid_argument("pair index out of range");

    std::size_t txt_idx = i == 0 ? 1 : 0;
    std::size_t img_idx = txt_idx;
    for (std::size_t j = 0; j < sim.cols; ++j) {
        if (j == i) continue;
        if (sim.at(i, j) > sim.at(i, txt_idx)) txt_idx = j;
        if (sim.at(j, i) > sim.at(img_idx, i)) img_idx = j;
    }
    return {txt_idx, img_idx};
}

double adaptive_margin(double y_star, double d, const MarginParams& mp) {
    mp.validate();
    if (!(y_star > 0.0 && y_star <= 1.0))
        throw std::invalid_argument("soft label must be in (0, 1]");
    if (!(d >= 0.0)) throw std::invalid_argument("center distance must be >= 0");
    const double ramp = (std::pow(mp.base, y_star) - 1.0) / (mp.base - 1.0);
    return (2.0 + std::tanh(-d)) * ramp * mp.alpha;
}

std::vector<double> adaptive_margins(const std::vector<double>& y_stars, double clean_center,
                                     const std::vector<double>& prev_losses,
                                     const MarginParams& mp) {
    if (y_stars.size() != prev_losses.size())
        throw std::invalid_argument("label and previous-loss counts differ");
    if (!std::isfinite(clean_center)) throw std::invalid_argument("clean center must be finite");

    std::vector<double> margins(y_stars.size());
    for (std::size_t i = 0; i < y_stars.size(); ++i) {
        const double d =
            std::isnan(prev_losses[i]) ? 0.0 : std::abs(prev_losses[i] - clean_center);
        margins[i] = adaptive_margin(y_stars[i], d, mp);
    }
    return margins;
}

TripletTerms margin_loss_forward(const Matrix& sim, const std::vector<double>& margins) {
    validate_square_batch(sim);
    if (margins.size() != sim.rows)
        throw std::invalid_argument("margin count does not match batch size");

    const std::size_t n = sim.rows;
    TripletTerms terms;
    terms.per_sample.resize(n);
    terms.neg_txt.resize(n);
    terms.neg_img.resize(n);
    terms.active_txt.resize(n);
    terms.active_img.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [t, q] = hard_negatives(sim, i);
        terms.neg_txt[i] = t;
        terms.neg_img[i] = q;
        const double ht = hinge(margins[i] - sim.at(i, i) + sim.at(i, t));
        const double hq = hinge(margins[i] - sim.at(i, i) + sim.at(q, i));
        terms.active_txt[i] = ht > 0.0 ? 1 : 0;
        terms.active_img[i] = hq > 0.0 ? 1 : 0;
        terms.per_sample[i] = ht + hq;
        terms.total += ht + hq;
    }
    return terms;
}

LossStats dasm_batch_loss(const Matrix& sim, const std::vector<double>& y_stars,
                          double clean_center, const std::vector<double>& prev_losses,
                          const MarginParams& mp) {
    validate_square_batch(sim);
    if (y_stars.size() != sim.rows)
        throw std::invalid_argument("label count does not match batch size");
    if (prev_losses.size() != sim.rows)
        throw std::invalid_argument("previous-loss count does not match batch size");
    if (!std::isfinite(clean_center)) throw std::invalid_argument("clean center must be finite");

    std::vector<double> dist(sim.rows);
    std::vector<double> margins(sim.rows);
    for (std::size_t i = 0; i < sim.rows; ++i) {
        dist[i] = std::isnan(prev_losses[i]) ? 0.0 : std::abs(prev_losses[i] - clean_center);
        margins[i] = adaptive_margin(y_stars[i], dist[i], mp);
    }
    return stats_from_terms(margin_loss_forward(sim, margins), clean_center, std::move(dist));
}

LossStats plain_triplet_loss(const Matrix& sim, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("margin alpha must be > 0");
    validate_square_batch(sim);
    const std::vector<double> margins(sim.rows, alpha);
    return stats_from_terms(margin_loss_forward(sim, margins),
                            std::numeric_limits<double>::quiet_NaN(),
                            std::vector<double>(sim.rows, 0.0));
}

EncoderGrads margin_gradients(const BatchForward& fwd, const TripletTerms& terms,
                              const std::vector<std::vector<float>>& imgs,
                              const std::vector<std::vector<float>>& txts) {
    const std::size_t n = fwd.img_emb.size();
    if (n != fwd.txt_emb.size() || n != imgs.size() || n != txts.size() ||
        n != terms.per_sample.size())
        throw std::invalid_argument("forward record, terms and inputs disagree on batch size");
    if (n < 2) throw std::invalid_argument("batch needs at least 2 pairs");

    const std::size_t dim = fwd.img_emb.front().size();
    // d(total)/d(embedding), accumulated over active hinges only.
    std::vector<FeatureVector> de(n, FeatureVector(dim, 0.0));
    std::vector<FeatureVector> df(n, FeatureVector(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = terms.neg_txt[i];
        const std::size_t q = terms.neg_img[i];
        if (terms.active_txt[i]) {
            for (std::size_t k = 0; k < dim; ++k) {
                de[i][k] += fwd.txt_emb[t][k] - fwd.txt_emb[i][k];
                df[t][k] += fwd.img_emb[i][k];
                df[i][k] -= fwd.img_emb[i][k];
            }
        }
        if (terms.active_img[i]) {
            for (std::size_t k = 0; k < dim; ++k) {
                de[i][k] -= fwd.txt_emb[i][k];
                de[q][k] += fwd.txt_emb[i][k];
                df[i][k] += fwd.img_emb[q][k] - fwd.img_emb[i][k];
            }
        }
    }

    EncoderGrads grads;
    grads.w_img = Matrix(dim, imgs.front().size());
    grads.w_txt = Matrix(dim, txts.front().size());

    // Through e = u/|u|: dL/du = (dL/de - (e . dL/de) e)/|u|, then dW += dL/du x^T.
    // Zero-norm projections used a constant fallback embedding: no gradient.
    FeatureVector du(dim);
    for (std::size_t i = 0; i < n; ++i) {
        if (fwd.img_norm[i] > 0.0) {
            double proj = 0.0;
            for (std::size_t k = 0; k < dim; ++k) proj += fwd.img_emb[i][k] * de[i][k];
            for (std::size_t k = 0; k < dim; ++k)
                du[k] = (de[i][k] - proj * fwd.img_emb[i][k]) / fwd.img_norm[i];
            for (std::size_t r = 0; r < dim; ++r) {
                double* gr = grads.w_img.row(r);
                for (std::size_t c = 0; c < imgs[i].size(); ++c)
                    gr[c] += du[r] * static_cast<double>(imgs[i][c]);
            }
        }
        if (fwd.txt_norm[i] > 0.0) {
            double proj = 0.0;
            for (std::size_t k = 0; k < dim; ++k) proj += fwd.txt_emb[i][k] * df[i][k];
            for (std::size_t k = 0; k < dim; ++k)
                du[k] = (df[i][k] - proj * fwd.txt_emb[i][k]) / fwd.txt_norm[i];
            for (std::size_t r = 0; r < dim; ++r) {
                double* gr = grads.w_txt.row(r);
                for (std::size_t c = 0; c < txts[i].size(); ++c)
                    gr[c] += du[r] * static_cast<double>(txts[i][c]);
            }
        }
    }
    return grads;
}

EncoderGrads dasm_gradients(const EncoderParams& params,
                            const std::vector<std::vector<float>>& imgs,
                            const std::vector<std::vector<float>>& txts,
                            const std::vector<double>& y_stars, double clean_center,
                            const std::vector<double>& prev_losses, const MarginParams& mp) {
    const BatchForward fwd = forward_batch(params, imgs, txts);
    const std::vector<double> margins = adaptive_margins(y_stars, clean_center, prev_losses, mp);
    const TripletTerms terms = margin_loss_forward(fwd.sim, margins);
    return margin_gradients(fwd, terms, imgs, txts);
}

}  // namespace tsvc
