#include "tsvc/soft_label.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace tsvc {

namespace {

void validate_batch(const EmbeddedBatch& batch) {
    if (batch.img.size() != batch.txt.size())
        throw std::invalid_argument("batch image/text counts differ");
    if (batch.size() < 2) throw std::invalid_argument("batch needs at least 2 pairs");
}

double rate_against(double mi_anchor_guarded, double mi_other) {
    return std::abs(mi_anchor_guarded - mi_other) / mi_anchor_guarded;
}

}  // namespace

AnchorPair select_anchor(const std::vector<double>& losses, const EmbeddedBatch& batch,
                         const HistogramConfig& cfg) {
    validate_batch(batch);
    if (losses.size() != batch.size())
        throw std::invalid_argument("loss count does not match batch size");
    for (double l : losses) {
        if (!std::isfinite(l)) throw std::invalid_argument("losses must be finite");
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) {
        if (losses[i] < losses[best]) best = i;
    }

    AnchorPair anchor;
    anchor.index = best;
    anchor.img_emb = batch.img[best];
    anchor.txt_emb = batch.txt[best];
    anchor.mi_self = mutual_information(anchor.img_emb, anchor.txt_emb, cfg);
    return anchor;
}

ChangeRates change_rates_from_mi(double mi_anchor, double mi_pair, double mi_cross_txt,
                                 double mi_cross_img) {
    for (double v : {mi_anchor, mi_pair, mi_cross_txt, mi_cross_img}) {
        if (!std::isfinite(v)) throw std::invalid_argument("MI values must be finite");
    }
    const double guarded = std::max(mi_anchor, kMiEpsilon);
    ChangeRates rates;
    rates.pair_rate = rate_against(guarded, mi_pair);
    rates.text_rate = rate_against(guarded, mi_cross_txt);
    rates.image_rate = rate_against(guarded, mi_cross_img);
    return rates;
}

ChangeRates change_rates(const AnchorPair& anchor, const FeatureVector& cand_img,
                         const FeatureVector& cand_txt, const HistogramConfig& cfg) {
    const double mi_pair = mutual_information(cand_img, cand_txt, cfg);
    const double mi_cross_txt = mutual_information(anchor.img_emb, cand_txt, cfg);
    const double mi_cross_img = mutual_information(cand_img, anchor.txt_emb, cfg);
    return change_rates_from_mi(anchor.mi_self, mi_pair, mi_cross_txt, mi_cross_img);
}

double soft_label(const ChangeRates& rates) {
    for (double v : {rates.pair_rate, rates.text_rate, rates.image_rate}) {
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("change rates must be finite and non-negative");
    }
    return 1.0 / (1.0 + (rates.pair_rate + std::abs(rates.text_rate - rates.image_rate)));
}

std::vector<double> rectify_batch(const EmbeddedBatch& batch, const std::vector<double>& losses,
                                  const HistogramConfig& cfg) {
    const AnchorPair anchor = select_anchor(losses, batch, cfg);

    std::vector<double> labels(batch.size(), 0.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (i == anchor.index) {
            labels[i] = 1.0;
            continue;
        }
        labels[i] = soft_label(change_rates(anchor, batch.img[i], batch.txt[i], cfg));
    }
    return labels;
}

}  // namespace tsvc
