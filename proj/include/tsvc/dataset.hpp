#ifndef TSVC_DATASET_HPP
#define TSVC_DATASET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tsvc/common.hpp"

namespace tsvc {

/// One image-text pair. y is the annotated correspondence label (always 1
/// in generated data; mismatches keep y = 1). truly_clean is the hidden
/// ground-truth flag used only for evaluation.
struct PairSample {
    std::vector<float> img;
    std::vector<float> txt;
    std::uint8_t y = 1;
    bool truly_clean = true;

    bool operator==(const PairSample&) const = default;
};

struct Dataset {
    std::size_t d_img = 0;
    std::size_t d_txt = 0;
    std::uint64_t seed = 0;
    std::vector<PairSample> samples;

    std::size_t size() const { return samples.size(); }
    bool operator==(const Dataset&) const = default;
};

struct DatasetSpec {
    std::size_t n = 2000;
    std::size_t d_latent = 16;
    std::size_t d_img = 48;
    std::size_t d_txt = 32;
    double noise_sigma = 0.3;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

/// Latent-factor pairs: z ~ N(0, I), img = A z + eps, txt = B z + eps, with
/// A, B seeded per spec. All pairs start truly clean with y = 1.
Dataset generate(const DatasetSpec& spec);

/// Same sample stream with caller-supplied projection matrices
/// (d_img x d_latent, d_txt x d_latent).
Dataset generate(const DatasetSpec& spec, const Matrix& img_map, const Matrix& txt_map);

/// Mismatches round(ratio * n) seeded pairs by cyclically shifting their
/// texts among themselves; y stays 1, truly_clean flips to false on exactly
/// those pairs.
Dataset inject_noise(const Dataset& dataset, double ratio, std::uint64_t seed);

/// Seeded shuffle then contiguous cut into train/val/test.
std::array<Dataset, 3> split(const Dataset& dataset, const SplitFractions& fractions,
                             std::uint64_t seed);

/// Contiguous cut without shuffling; recovers the splits of a file whose
/// records were stored in train|val|test order.
std::array<Dataset, 3> split_by_layout(const Dataset& dataset, const SplitFractions& fractions);

/// Binary dataset file, fixed little-endian layout. Malformed files raise
/// FormatError with the offending byte offset.
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace tsvc

#endif
