#ifndef TSVC_TRAINER_HPP
#define TSVC_TRAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsvc/common.hpp"
#include "tsvc/dasm.hpp"
#include "tsvc/dataset.hpp"
#include "tsvc/encoder.hpp"
#include "tsvc/gmm.hpp"
#include "tsvc/histogram_mi.hpp"
#include "tsvc/metrics.hpp"

namespace tsvc {

enum class TrainMode : std::uint8_t { tsvc, co_teaching, no_filter };

TrainMode parse_train_mode(const std::string& name);
std::string train_mode_name(TrainMode mode);

struct TrainConfig {
    double delta = 0.5;
    double margin_base = 10.0;
    double alpha = 0.2;
    int bins = 0;  // 0 = automatic bin count
    double lr = 0.05;
    int epochs = 40;
    int warmup_epochs = 5;
    std::size_t batch_size = 128;
    std::size_t embed_dim = 64;
    std::uint64_t seed = 1;
    TrainMode mode = TrainMode::tsvc;
    int gmm_max_iter = 50;
    double gmm_tol = 1e-6;
    bool use_sivc = true;   // off: hard labels from the latest partition
    bool use_dasm = true;   // off: fixed-margin triplet loss throughout
    PartitionRule partition_rule = PartitionRule::posterior;
    int patience = 0;  // 0 = no early stopping

    void validate() const;
};

/// Seeds of the three cooperating models, derived from the run seed.
/// Collisions are rejected: the models must differ only by initialization.
struct ModelSeeds {
    std::uint64_t coordinator = 0;
    std::uint64_t master = 0;
    std::uint64_t assistant = 0;

    void validate() const;
};

ModelSeeds derive_model_seeds(std::uint64_t seed);

struct EpochLog {
    int epoch = 0;
    double i2t_r1 = 0.0;
    double i2t_r5 = 0.0;
    double i2t_r10 = 0.0;
    double t2i_r1 = 0.0;
    double t2i_r5 = 0.0;
    double t2i_r10 = 0.0;
    double rsum_val = 0.0;
    double partition_precision = 0.0;
    double partition_recall = 0.0;
    double partition_f1 = 0.0;
    double mean_loss = 0.0;
};

/// Index flows of one post-warmup epoch: the first division plus both
/// refinement outputs, all over train-set indices.
struct EpochFlows {
    int epoch = 0;
    FlowPartition division;                       // clean feeds Master, noisy feeds Assistant
    std::vector<std::size_t> master_refined;      // subset of division.clean
    std::vector<std::size_t> assistant_refined;   // subset of division.noisy
};

struct NamedModel {
    std::string role;
    EncoderParams params;
};

struct TrainResult {
    TrainMode mode = TrainMode::tsvc;
    std::vector<NamedModel> models;
    std::vector<EpochLog> logs;
    std::vector<EpochFlows> flows;  // empty for baselines
    std::vector<std::string> warnings;
};

/// Full training run on a pre-split dataset; dispatches on cfg.mode.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg);

/// Two peers with explicit seeds; each selects clean samples for the other.
TrainResult co_teaching_baseline(const Dataset& train_set, const Dataset& val_set,
                                 const TrainConfig& cfg, std::uint64_t seed_a,
                                 std::uint64_t seed_b);

/// Elementwise mean of the two models' similarity matrices.
Matrix fused_similarity(const EncoderParams& a, const EncoderParams& b,
                        const std::vector<std::vector<float>>& imgs,
                        const std::vector<std::vector<float>>& txts);

/// One EpochLog row per line, fixed column order, LF endings.
void write_metrics_csv(const std::string& path, const std::vector<EpochLog>& logs);

}  // namespace tsvc

#endif
