#ifndef TSVC_DASM_HPP
#define TSVC_DASM_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tsvc/common.hpp"
#include "tsvc/encoder.hpp"

namespace tsvc {

/// Soft-margin shape: base m of the exponential ramp and base margin alpha
/// in similarity units.
struct MarginParams {
    double base = 10.0;
    double alpha = 0.2;

    void validate() const;
};

/// Per-sample hinge losses plus the inputs the adaptive margin derived from.
/// clean_center is NaN when the loss used a fixed margin; center_dist is
/// the per-sample |previous loss - clean_center| (0 when unknown).
struct LossStats {
    std::vector<double> per_sample;
    double total = 0.0;
    double clean_center = 0.0;
    std::vector<double> center_dist;
};

/// Forward record of a margin-hinge triplet loss: frozen hard-negative
/// indices and which of the two hinges were strictly positive.
struct TripletTerms {
    std::vector<double> per_sample;
    std::vector<std::size_t> neg_txt;
    std::vector<std::size_t> neg_img;
    std::vector<std::uint8_t> active_txt;
    std::vector<std::uint8_t> active_img;
    double total = 0.0;
};

/// Most similar wrong text for image i and wrong image for text i.
/// Ties resolve to the lowest index.
std::pair<std::size_t, std::size_t> hard_negatives(const Matrix& sim, std::size_t i);

/// (2 + tanh(-d)) * (m^y - 1)/(m - 1) * alpha, in (0, 2*alpha].
double adaptive_margin(double y_star, double d, const MarginParams& mp);

/// Margins for a batch; distances are |prev_loss - clean_center|, with NaN
/// previous losses treated as distance 0.
std::vector<double> adaptive_margins(const std::vector<double>& y_stars, double clean_center,
                                     const std::vector<double>& prev_losses,
                                     const MarginParams& mp);

/// Two-hinge triplet loss per sample with the given per-sample margins.
TripletTerms margin_loss_forward(const Matrix& sim, const std::vector<double>& margins);

LossStats dasm_batch_loss(const Matrix& sim, const std::vector<double>& y_stars,
                          double clean_center, const std::vector<double>& prev_losses,
                          const MarginParams& mp);

/// Same hinge structure with the margin fixed at alpha for every sample.
LossStats plain_triplet_loss(const Matrix& sim, double alpha);

/// Backpropagation of margin_loss_forward through similarity, normalization
/// and the linear projections. Margins and negative indices are constants.
EncoderGrads margin_gradients(const BatchForward& fwd, const TripletTerms& terms,
                              const std::vector<std::vector<float>>& imgs,
                              const std::vector<std::vector<float>>& txts);

/// Convenience wrapper: forward pass, adaptive margins, then gradients.
EncoderGrads dasm_gradients(const EncoderParams& params,
                            const std::vector<std::vector<float>>& imgs,
                            const std::vector<std::vector<float>>& txts,
                            const std::vector<double>& y_stars, double clean_center,
                            const std::vector<double>& prev_losses, const MarginParams& mp);

}  // namespace tsvc

#endif
