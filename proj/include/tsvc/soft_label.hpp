#ifndef TSVC_SOFT_LABEL_HPP
#define TSVC_SOFT_LABEL_HPP

#include <cstddef>
#include <vector>

#include "tsvc/histogram_mi.hpp"

namespace tsvc {

/// Guard for the change-rate denominators when the anchor's own MI is ~0.
inline constexpr double kMiEpsilon = 1e-8;

/// The minimum-loss pair of a batch, used as the clean reference for MI
/// comparisons. mi_self is the MI between its own two embeddings.
struct AnchorPair {
    std::size_t index = 0;
    FeatureVector img_emb;
    FeatureVector txt_emb;
    double mi_self = 0.0;
};

/// Relative MI variation of a candidate pair against the anchor:
/// pair_rate compares the candidate's own MI, text_rate the MI of the
/// anchor image with the candidate text, image_rate the reverse cross.
struct ChangeRates {
    double pair_rate = 0.0;
    double text_rate = 0.0;
    double image_rate = 0.0;
};

/// Unit-norm embeddings of one training batch, image and text sides aligned.
struct EmbeddedBatch {
    std::vector<FeatureVector> img;
    std::vector<FeatureVector> txt;

    std::size_t size() const { return img.size(); }
};

/// Pick the pair with the smallest loss (lowest index on ties) and compute
/// its self-MI.
AnchorPair select_anchor(const std::vector<double>& losses, const EmbeddedBatch& batch,
                         const HistogramConfig& cfg = {});

/// Change rates from already-computed MI values. mi_anchor = MI of the
/// anchor with itself, mi_pair = MI of the candidate pair, mi_cross_txt =
/// MI(anchor img, candidate txt), mi_cross_img = MI(candidate img, anchor txt).
ChangeRates change_rates_from_mi(double mi_anchor, double mi_pair, double mi_cross_txt,
                                 double mi_cross_img);

ChangeRates change_rates(const AnchorPair& anchor, const FeatureVector& cand_img,
                         const FeatureVector& cand_txt, const HistogramConfig& cfg = {});

/// Soft correspondence label in (0, 1]: 1 / (1 + (pair_rate + |text_rate - image_rate|)).
double soft_label(const ChangeRates& rates);

/// Soft labels for every member of a batch against the batch anchor.
/// The anchor itself gets exactly 1.
std::vector<double> rectify_batch(const EmbeddedBatch& batch, const std::vector<double>& losses,
                                  const HistogramConfig& cfg = {});

}  // namespace tsvc

#endif
