#include "tsvc/trainer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tsvc/soft_label.hpp"

namespace tsvc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kHardNoisyLabel = 1e-3;  // Eq-wise a soft label must stay positive
constexpr std::uint64_t kOrderStream = 0x747261696e6f0000ull;

struct TrainView {
    std::vector<std::vector<float>> imgs;
    std::vector<std::vector<float>> txts;
    std::vector<std::uint8_t> truly_clean;
};

TrainView make_view(const Dataset& ds) {
    TrainView view;
    view.imgs.reserve(ds.size());
    view.txts.reserve(ds.size());
    view.truly_clean.reserve(ds.size());
    for (const PairSample& s : ds.samples) {
        view.imgs.push_back(s.img);
        view.txts.push_back(s.txt);
        view.truly_clean.push_back(s.truly_clean ? 1 : 0);
    }
    return view;
}

struct ModelState {
    EncoderParams params;
    std::vector<double> last_loss;  // per train index; NaN until first scored
    double l_clean = kNaN;
};

ModelState make_state(const Dataset& train_set, const TrainConfig& cfg, std::uint64_t seed) {
    ModelState state;
    state.params = init_encoder(train_set.d_img, train_set.d_txt, cfg.embed_dim, seed);
    state.last_loss.assign(train_set.size(), kNaN);
    return state;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

/// Chunks of batch_size in the given order; a trailing single sample joins
/// the previous chunk so every batch can mine a negative. Fewer than 2
/// samples yield no batches.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    if (order.size() < 2) return batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, order.size());
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() >= 2 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back().front());
        batches.pop_back();
    }
    return batches;
}

std::vector<std::size_t> shuffled_for(std::uint64_t model_seed, int epoch,
                                      std::vector<std::size_t> indices) {
    std::mt19937_64 rng(splitmix64(model_seed) ^
                        splitmix64(kOrderStream + static_cast<std::uint64_t>(epoch)));
    std::shuffle(indices.begin(), indices.end(), rng);
    return indices;
}

std::vector<std::size_t> sorted_union(const std::vector<std::size_t>& a,
                                      const std::vector<std::size_t>& b) {
    std::vector<std::size_t> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

/// Per-batch loss/update engine shared by scoring and training passes.
/// Hard labels (SIVC off) come from the canonical clean mask of the run:
/// the coordinator's latest division, or each peer's own selection.
struct Engine {
    const TrainConfig& cfg;
    const TrainView& view;
    HistogramConfig hist;
    MarginParams margins;
    std::vector<std::string>& warnings;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;

    Engine(const TrainConfig& c, const TrainView& v, std::vector<std::string>& w)
        : cfg(c), view(v), warnings(w) {
        hist.bins = cfg.bins;
        margins.base = cfg.margin_base;
        margins.alpha = cfg.alpha;
    }

    void reset_epoch() {
        loss_sum = 0.0;
        loss_count = 0;
    }

    double mean_loss() const {
        return loss_count == 0 ? 0.0 : loss_sum / static_cast<double>(loss_count);
    }

    void run_batch(ModelState& m, const std::vector<std::size_t>& idx, bool update,
                   const std::vector<std::uint8_t>* clean_mask) {
        std::vector<std::vector<float>> imgs;
        std::vector<std::vector<float>> txts;
        imgs.reserve(idx.size());
        txts.reserve(idx.size());
        for (std::size_t i : idx) {
            imgs.push_back(view.imgs[i]);
            txts.push_back(view.txts[i]);
        }

        const BatchForward fwd = forward_batch(m.params, imgs, txts);
        std::vector<double> batch_margins;
        if (cfg.use_dasm && std::isfinite(m.l_clean)) {
            std::vector<double> prev(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) prev[i] = m.last_loss[idx[i]];

            std::vector<double> y_stars;
            if (cfg.use_sivc) {
                std::vector<double> anchor_losses(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    anchor_losses[i] =
                        std::isnan(prev[i]) ? std::numeric_limits<double>::max() : prev[i];
                }
                y_stars = rectify_batch(EmbeddedBatch{fwd.img_emb, fwd.txt_emb}, anchor_losses,
                                        hist);
            } else {
                y_stars.resize(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    const bool clean =
                        clean_mask == nullptr || clean_mask->empty() || (*clean_mask)[idx[i]];
                    y_stars[i] = clean ? 1.0 : kHardNoisyLabel;
                }
            }
            batch_margins = adaptive_margins(y_stars, m.l_clean, prev, margins);
        } else {
            batch_margins.assign(idx.size(), cfg.alpha);
        }

        const TripletTerms terms = margin_loss_forward(fwd.sim, batch_margins);
        for (std::size_t i = 0; i < idx.size(); ++i) m.last_loss[idx[i]] = terms.per_sample[i];

        if (!update) return;
        loss_sum += terms.total;
        loss_count += idx.size();
        if (cfg.lr > 0.0) {
            const EncoderGrads grads = margin_gradients(fwd, terms, imgs, txts);
            m.params = sgd_step(m.params, grads, cfg.lr);
        }
    }

    /// Refresh m.last_loss over the given (ascending) indices.
    void score(ModelState& m, const std::vector<std::size_t>& indices,
               const std::vector<std::uint8_t>* clean_mask) {
        for (const auto& batch : make_batches(indices, cfg.batch_size))
            run_batch(m, batch, false, clean_mask);
    }

    /// One optimization sweep over the indices, shuffled per (model, epoch).
    void train_pass(ModelState& m, const std::vector<std::size_t>& indices, int epoch,
                    const std::vector<std::uint8_t>* clean_mask) {
        const auto order = shuffled_for(m.params.seed, epoch, indices);
        for (const auto& batch : make_batches(order, cfg.batch_size))
            run_batch(m, batch, true, clean_mask);
    }
};

struct FitOutcome {
    FlowPartition flows;  // indices into the scored subset
    double center = 0.0;
};

/// GMM partition of a loss subset with a logged median-split fallback when
/// the mixture cannot be fit.
FitOutcome fit_and_partition(const std::vector<double>& losses, const TrainConfig& cfg,
                             std::vector<std::string>& warnings, const std::string& context) {
    FitOutcome out;
    bool fallback = losses.size() < 4;
    if (!fallback) {
        try {
            const GmmModel model = fit_gmm_1d(losses, cfg.gmm_max_iter, cfg.gmm_tol);
            out.flows = partition(losses, model, cfg.delta, cfg.partition_rule);
            out.center = clean_center(model);
            if (out.flows.clean.empty()) {
                // An all-noisy division would stall every downstream flow;
                // claim at least the minimum-loss side via the fallback.
                fallback = true;
                warnings.push_back(context + ": empty clean side, median split used");
            }
        } catch (const DegenerateInput&) {
            fallback = true;
            warnings.push_back(context + ": degenerate losses, median split used");
        }
    } else {
        warnings.push_back(context + ": fewer than 4 losses, median split used");
    }

    if (fallback) {
        out.flows = FlowPartition{};
        const double med = median_of(losses);
        double clean_sum = 0.0;
        for (std::size_t i = 0; i < losses.size(); ++i) {
            if (losses[i] <= med) {
                out.flows.clean.push_back(i);
                clean_sum += losses[i];
            } else {
                out.flows.noisy.push_back(i);
            }
        }
        out.center = clean_sum / static_cast<double>(out.flows.clean.size());
    }
    return out;
}

std::vector<double> gather(const std::vector<double>& values,
                           const std::vector<std::size_t>& indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(values[i]);
    return out;
}

std::vector<std::size_t> map_back(const std::vector<std::size_t>& local,
                                  const std::vector<std::size_t>& parent) {
    std::vector<std::size_t> out;
    out.reserve(local.size());
    for (std::size_t i : local) out.push_back(parent[i]);
    return out;
}

std::vector<std::uint8_t> mask_from(const FlowPartition& flows, std::size_t n) {
    std::vector<std::uint8_t> mask(n, 0);
    for (std::size_t i : flows.clean) mask[i] = 1;
    return mask;
}

struct ValView {
    std::vector<std::vector<float>> imgs;
    std::vector<std::vector<float>> txts;
};

ValView make_val_view(const Dataset& ds) {
    ValView v;
    for (const PairSample& s : ds.samples) {
        v.imgs.push_back(s.img);
        v.txts.push_back(s.txt);
    }
    return v;
}

EpochLog log_from(int epoch, const RetrievalReport& rep, const PartitionQuality& pq,
                  double mean_loss) {
    EpochLog log;
    log.epoch = epoch;
    log.i2t_r1 = rep.i2t_r1;
    log.i2t_r5 = rep.i2t_r5;
    log.i2t_r10 = rep.i2t_r10;
    log.t2i_r1 = rep.t2i_r1;
    log.t2i_r5 = rep.t2i_r5;
    log.t2i_r10 = rep.t2i_r10;
    log.rsum_val = rep.rsum;
    log.partition_precision = pq.precision;
    log.partition_recall = pq.recall;
    log.partition_f1 = pq.f1;
    log.mean_loss = mean_loss;
    return log;
}

void validate_data(const Dataset& train_set, const Dataset& val_set) {
    if (train_set.size() < 10) throw std::invalid_argument("train split needs at least 10 pairs");
    if (val_set.size() < 10) throw std::invalid_argument("validation split needs at least 10 pairs");
    if (train_set.d_img != val_set.d_img || train_set.d_txt != val_set.d_txt)
        throw std::invalid_argument("train and validation dimensions differ");
}

/// Shared early-stopping bookkeeping; patience 0 never stops.
struct Patience {
    int patience;
    double best = -std::numeric_limits<double>::infinity();
    int since_best = 0;

    bool should_stop(double rsum) {
        if (patience <= 0) return false;
        if (rsum > best) {
            best = rsum;
            since_best = 0;
            return false;
        }
        return ++since_best >= patience;
    }
};

TrainResult tri_learning(const Dataset& train_set, const Dataset& val_set,
                         const TrainConfig& cfg) {
    const TrainView view = make_view(train_set);
    const ValView val = make_val_view(val_set);
    const ModelSeeds seeds = derive_model_seeds(cfg.seed);
    seeds.validate();

    TrainResult result;
    result.mode = TrainMode::tsvc;
    Engine engine(cfg, view, result.warnings);

    ModelState coordinator = make_state(train_set, cfg, seeds.coordinator);
    ModelState master = make_state(train_set, cfg, seeds.master);
    ModelState assistant = make_state(train_set, cfg, seeds.assistant);

    const auto all = all_indices(train_set.size());
    std::vector<std::uint8_t> division_mask;  // canonical clean/noisy estimate
    Patience stopper{cfg.patience};

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        engine.reset_epoch();
        PartitionQuality pq;

        if (epoch < cfg.warmup_epochs) {
            for (ModelState* m : {&coordinator, &master, &assistant})
                engine.train_pass(*m, all, epoch, nullptr);
        } else {
            // First division: the Coordinator's losses split the train set
            // into a clean flow for the Master and a noisy flow for the
            // Assistant.
            engine.score(coordinator, all, &division_mask);
            const FitOutcome first =
                fit_and_partition(coordinator.last_loss, cfg, result.warnings, "division");
            coordinator.l_clean = first.center;
            division_mask = mask_from(first.flows, train_set.size());
            pq = partition_quality(first.flows, view.truly_clean);

            // Re-division: Master mines the clean flow, Assistant mines the
            // noisy flow; each keeps its own fit's clean center.
            std::vector<std::size_t> master_refined;
            if (first.flows.clean.size() >= 2) {
                engine.score(master, first.flows.clean, &division_mask);
                const FitOutcome fit = fit_and_partition(
                    gather(master.last_loss, first.flows.clean), cfg, result.warnings,
                    "clean-flow refinement");
                master.l_clean = fit.center;
                master_refined = map_back(fit.flows.clean, first.flows.clean);
            } else {
                result.warnings.push_back("clean flow too small to refine, skipped");
            }

            std::vector<std::size_t> assistant_refined;
            if (first.flows.noisy.size() >= 2) {
                engine.score(assistant, first.flows.noisy, &division_mask);
                const FitOutcome fit = fit_and_partition(
                    gather(assistant.last_loss, first.flows.noisy), cfg, result.warnings,
                    "noisy-flow refinement");
                assistant.l_clean = fit.center;
                assistant_refined = map_back(fit.flows.clean, first.flows.noisy);
            } else {
                result.warnings.push_back("noisy flow too small to refine, skipped");
            }

            // Training: Assistant on the Master's refined clean set, Master
            // on its full clean flow plus the Assistant's find, Coordinator
            // on the Assistant's find only.
            const std::vector<std::size_t> master_set =
                sorted_union(assistant_refined, first.flows.clean);
            const struct {
                ModelState* model;
                const std::vector<std::size_t>* set;
                const char* role;
            } plan[] = {{&assistant, &master_refined, "assistant"},
                        {&master, &master_set, "master"},
                        {&coordinator, &assistant_refined, "coordinator"}};
            for (const auto& step : plan) {
                if (step.set->size() < 2) {
                    result.warnings.push_back(std::string(step.role) +
                                              " training set too small, update skipped");
                    continue;
                }
                engine.train_pass(*step.model, *step.set, epoch, &division_mask);
            }

            EpochFlows flows;
            flows.epoch = epoch;
            flows.division = first.flows;
            flows.master_refined = std::move(master_refined);
            flows.assistant_refined = std::move(assistant_refined);
            result.flows.push_back(std::move(flows));
        }

        const Matrix sim = fused_similarity(master.params, assistant.params, val.imgs, val.txts);
        result.logs.push_back(log_from(epoch, report(sim), pq, engine.mean_loss()));
        if (stopper.should_stop(result.logs.back().rsum_val)) break;
    }

    result.models.push_back({"coordinator", std::move(coordinator.params)});
    result.models.push_back({"master", std::move(master.params)});
    result.models.push_back({"assistant", std::move(assistant.params)});
    return result;
}

TrainResult no_filter(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
    const TrainView view = make_view(train_set);
    const ValView val = make_val_view(val_set);

    TrainResult result;
    result.mode = TrainMode::no_filter;
    Engine engine(cfg, view, result.warnings);

    // Single model on the full noisy set with the fixed-margin loss; its
    // clean center stays unset so the adaptive margin never engages.
    ModelState model = make_state(train_set, cfg, cfg.seed + 1);
    const auto all = all_indices(train_set.size());
    Patience stopper{cfg.patience};

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        engine.reset_epoch();
        engine.train_pass(model, all, epoch, nullptr);
        const Matrix sim = similarity_matrix(model.params, val.imgs, val.txts);
        result.logs.push_back(log_from(epoch, report(sim), PartitionQuality{}, engine.mean_loss()));
        if (stopper.should_stop(result.logs.back().rsum_val)) break;
    }

    result.models.push_back({"model", std::move(model.params)});
    return result;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
    if (!(margin_base > 1.0)) throw std::invalid_argument("margin base must be > 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("margin alpha must be > 0");
    if (bins < 0) throw std::invalid_argument("bins must be >= 0");
    if (bins == 1) throw std::invalid_argument("bins must be 0 (automatic) or >= 2");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (warmup_epochs < 1) throw std::invalid_argument("warmup must be >= 1 epoch");
    if (warmup_epochs >= epochs) throw std::invalid_argument("warmup must be shorter than the run");
    if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
    if (embed_dim < 2) throw std::invalid_argument("embedding dimension must be >= 2");
    if (gmm_max_iter < 1) throw std::invalid_argument("gmm_max_iter must be >= 1");
    if (!(gmm_tol > 0.0)) throw std::invalid_argument("gmm_tol must be > 0");
    if (patience < 0) throw std::invalid_argument("patience must be >= 0");
}

void ModelSeeds::validate() const {
    if (coordinator == master || coordinator == assistant || master == assistant)
        throw std::invalid_argument("model seeds must be pairwise distinct");
}

ModelSeeds derive_model_seeds(std::uint64_t seed) {
    return ModelSeeds{seed + 1, seed + 2, seed + 3};
}

TrainMode parse_train_mode(const std::string& name) {
    if (name == "tsvc") return TrainMode::tsvc;
    if (name == "co") return TrainMode::co_teaching;
    if (name == "none") return TrainMode::no_filter;
    throw std::invalid_argument("unknown mode: " + name);
}

std::string train_mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::tsvc: return "tsvc";
        case TrainMode::co_teaching: return "co";
        case TrainMode::no_filter: return "none";
    }
    throw std::logic_error("unreachable mode");
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
    cfg.validate();
    validate_data(train_set, val_set);
    switch (cfg.mode) {
        case TrainMode::tsvc: return tri_learning(train_set, val_set, cfg);
        case TrainMode::co_teaching:
            return co_teaching_baseline(train_set, val_set, cfg, cfg.seed + 1, cfg.seed + 2);
        case TrainMode::no_filter: return no_filter(train_set, val_set, cfg);
    }
    throw std::logic_error("unreachable mode");
}

TrainResult co_teaching_baseline(const Dataset& train_set, const Dataset& val_set,
                                 const TrainConfig& cfg, std::uint64_t seed_a,
                                 std::uint64_t seed_b) {
    cfg.validate();
    validate_data(train_set, val_set);
    if (seed_a == seed_b) throw std::invalid_argument("peer seeds must differ");

    const TrainView view = make_view(train_set);
    const ValView val = make_val_view(val_set);

    TrainResult result;
    result.mode = TrainMode::co_teaching;
    Engine engine(cfg, view, result.warnings);

    ModelState peer_a = make_state(train_set, cfg, seed_a);
    ModelState peer_b = make_state(train_set, cfg, seed_b);
    std::vector<std::uint8_t> mask_a;  // each peer's own latest selection
    std::vector<std::uint8_t> mask_b;

    const auto all = all_indices(train_set.size());
    Patience stopper{cfg.patience};

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        engine.reset_epoch();
        PartitionQuality pq;

        if (epoch < cfg.warmup_epochs) {
            engine.train_pass(peer_a, all, epoch, nullptr);
            engine.train_pass(peer_b, all, epoch, nullptr);
        } else {
            // Both selections come from pre-update parameters; each peer
            // then trains on the other's small-loss pick.
            engine.score(peer_a, all, &mask_a);
            const FitOutcome fit_a =
                fit_and_partition(peer_a.last_loss, cfg, result.warnings, "peer A selection");
            peer_a.l_clean = fit_a.center;
            mask_a = mask_from(fit_a.flows, train_set.size());

            engine.score(peer_b, all, &mask_b);
            const FitOutcome fit_b =
                fit_and_partition(peer_b.last_loss, cfg, result.warnings, "peer B selection");
            peer_b.l_clean = fit_b.center;
            mask_b = mask_from(fit_b.flows, train_set.size());

            const PartitionQuality qa = partition_quality(fit_a.flows, view.truly_clean);
            const PartitionQuality qb = partition_quality(fit_b.flows, view.truly_clean);
            pq.precision = 0.5 * (qa.precision + qb.precision);
            pq.recall = 0.5 * (qa.recall + qb.recall);
            pq.f1 = 0.5 * (qa.f1 + qb.f1);

            if (fit_b.flows.clean.size() >= 2) {
                engine.train_pass(peer_a, fit_b.flows.clean, epoch, &mask_a);
            } else {
                result.warnings.push_back("peer B selection too small, peer A update skipped");
            }
            if (fit_a.flows.clean.size() >= 2) {
                engine.train_pass(peer_b, fit_a.flows.clean, epoch, &mask_b);
            } else {
                result.warnings.push_back("peer A selection too small, peer B update skipped");
            }
        }

        const Matrix sim = fused_similarity(peer_a.params, peer_b.params, val.imgs, val.txts);
        result.logs.push_back(log_from(epoch, report(sim), pq, engine.mean_loss()));
        if (stopper.should_stop(result.logs.back().rsum_val)) break;
    }

    result.models.push_back({"peer_a", std::move(peer_a.params)});
    result.models.push_back({"peer_b", std::move(peer_b.params)});
    return result;
}

Matrix fused_similarity(const EncoderParams& a, const EncoderParams& b,
                        const std::vector<std::vector<float>>& imgs,
                        const std::vector<std::vector<float>>& txts) {
    const Matrix sa = similarity_matrix(a, imgs, txts);
    const Matrix sb = similarity_matrix(b, imgs, txts);
    Matrix fused(sa.rows, sa.cols);
    for (std::size_t i = 0; i < fused.data.size(); ++i)
        fused.data[i] = 0.5 * (sa.data[i] + sb.data[i]);
    return fused;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochLog>& logs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "epoch,i2t_r1,i2t_r5,i2t_r10,t2i_r1,t2i_r5,t2i_r10,rsum,"
           "partition_precision,partition_recall,partition_f1,mean_loss\n";
    char buf[512];
    for (const EpochLog& log : logs) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      log.epoch, log.i2t_r1, log.i2t_r5, log.i2t_r10, log.t2i_r1, log.t2i_r5,
                      log.t2i_r10, log.rsum_val, log.partition_precision, log.partition_recall,
                      log.partition_f1, log.mean_loss);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace tsvc
