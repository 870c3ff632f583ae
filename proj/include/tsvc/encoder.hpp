#ifndef TSVC_ENCODER_HPP
#define TSVC_ENCODER_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsvc/common.hpp"
#include "tsvc/histogram_mi.hpp"

namespace tsvc {

using FloatView = std::span<const float>;

/// Linear projection weights for both modalities. Immutable by convention:
/// updates produce new values.
struct EncoderParams {
    Matrix w_img;  // embed_dim x d_img
    Matrix w_txt;  // embed_dim x d_txt
    std::uint64_t seed = 0;

    std::size_t embed_dim() const { return w_img.rows; }
    std::size_t d_img() const { return w_img.cols; }
    std::size_t d_txt() const { return w_txt.cols; }

    bool operator==(const EncoderParams&) const = default;
};

/// Gradients with the same shapes as the parameters they apply to.
struct EncoderGrads {
    Matrix w_img;
    Matrix w_txt;
};

/// Embeddings, pre-normalization norms and the similarity grid of one batch.
/// Norms are kept for backpropagation through the normalization.
struct BatchForward {
    std::vector<FeatureVector> img_emb;
    std::vector<FeatureVector> txt_emb;
    std::vector<double> img_norm;
    std::vector<double> txt_norm;
    Matrix sim;  // sim.at(i, j) = dot(img_emb[i], txt_emb[j])
};

/// Uniform(-a, a) entries with a = sqrt(6 / (fan_in + fan_out)) per matrix,
/// w_img filled before w_txt. Deterministic per seed.
EncoderParams init_encoder(std::size_t d_img, std::size_t d_txt, std::size_t embed_dim,
                           std::uint64_t seed);

/// normalize(W * x). A zero projection maps to the first basis vector.
FeatureVector embed(const Matrix& w, FloatView x);

double similarity(const FeatureVector& u, const FeatureVector& v);

BatchForward forward_batch(const EncoderParams& params, const std::vector<std::vector<float>>& imgs,
                           const std::vector<std::vector<float>>& txts);

Matrix similarity_matrix(const EncoderParams& params, const std::vector<std::vector<float>>& imgs,
                         const std::vector<std::vector<float>>& txts);

/// w <- w - lr * g, elementwise; returns the updated copy.
EncoderParams sgd_step(const EncoderParams& params, const EncoderGrads& grads, double lr);

/// Binary checkpoint, fixed little-endian layout. Malformed files raise
/// FormatError with the offending byte offset.
void save_checkpoint(const std::string& path, const EncoderParams& params);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace tsvc

#endif
