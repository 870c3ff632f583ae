#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tsvc/dataset.hpp"
#include "tsvc/encoder.hpp"
#include "tsvc/metrics.hpp"
#include "tsvc/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Fractions baked into the file layout: gen stores train|val|test in this
// proportion and train/eval recover the boundaries from the same constants.
constexpr tsvc::SplitFractions kFractions{};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

unsigned resolve_threads() {
    if (const char* env = std::getenv("TSVC_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(0..n_cells) across at most TSVC_THREADS workers. Cells must be
/// independent and write only their own slots.
void run_cells(std::size_t n_cells, const std::function<void(std::size_t)>& fn) {
    const unsigned threads =
        static_cast<unsigned>(std::min<std::size_t>(resolve_threads(), n_cells));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n_cells; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_cells) break;
                fn(i);
            }
        });
    }
    for (std::thread& t : pool) t.join();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string tok = csv.substr(start, comma == std::string::npos ? std::string::npos
                                                                             : comma - start);
        if (tok.empty()) throw std::invalid_argument("empty entry in seed list");
        seeds.push_back(std::stoull(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (seeds.empty()) throw std::invalid_argument("seed list is empty");
    return seeds;
}

std::vector<double> parse_value_list(const std::string& csv) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string tok = csv.substr(start, comma == std::string::npos ? std::string::npos
                                                                             : comma - start);
        if (tok.empty()) throw std::invalid_argument("empty entry in value list");
        values.push_back(std::stod(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (values.empty()) throw std::invalid_argument("value list is empty");
    return values;
}

struct GenOpts {
    std::size_t n = 2000;
    std::size_t d_latent = 16;
    std::size_t d_img = 48;
    std::size_t d_txt = 32;
    double noise_sigma = 0.3;
    double noise_ratio = 0.0;
    std::uint64_t seed = 1;
    std::string out;
};

int run_gen(const GenOpts& opt) {
    tsvc::DatasetSpec spec;
    spec.n = opt.n;
    spec.d_latent = opt.d_latent;
    spec.d_img = opt.d_img;
    spec.d_txt = opt.d_txt;
    spec.noise_sigma = opt.noise_sigma;
    spec.seed = opt.seed;

    const tsvc::Dataset full = tsvc::generate(spec);
    auto parts = tsvc::split(full, kFractions, opt.seed);
    parts[0] = tsvc::inject_noise(parts[0], opt.noise_ratio, opt.seed);

    tsvc::Dataset packed;
    packed.d_img = full.d_img;
    packed.d_txt = full.d_txt;
    packed.seed = full.seed;
    std::size_t flagged = 0;
    for (const auto& part : parts) {
        for (const tsvc::PairSample& s : part.samples) {
            flagged += s.truly_clean ? 0 : 1;
            packed.samples.push_back(s);
        }
    }
    tsvc::write_dataset(packed, opt.out);

    std::cout << "wrote " << opt.out << ": " << packed.size() << " pairs (train "
              << parts[0].size() << ", val " << parts[1].size() << ", test " << parts[2].size()
              << "), " << flagged << " mismatched in train\n";
    return 0;
}

struct TrainOpts {
    std::string data;
    std::string out_dir;
    std::string mode = "tsvc";
    std::string partition_rule = "posterior";
    tsvc::TrainConfig cfg;
    bool no_sivc = false;
    bool no_dasm = false;
};

tsvc::TrainConfig effective_config(const TrainOpts& opt) {
    tsvc::TrainConfig cfg = opt.cfg;
    cfg.mode = tsvc::parse_train_mode(opt.mode);
    cfg.use_sivc = !opt.no_sivc;
    cfg.use_dasm = !opt.no_dasm;
    if (opt.partition_rule == "posterior") {
        cfg.partition_rule = tsvc::PartitionRule::posterior;
    } else if (opt.partition_rule == "raw") {
        cfg.partition_rule = tsvc::PartitionRule::raw_loss;
    } else {
        throw std::invalid_argument("unknown partition rule: " + opt.partition_rule);
    }
    cfg.validate();
    return cfg;
}

json config_json(const tsvc::TrainConfig& cfg) {
    return json{{"mode", tsvc::train_mode_name(cfg.mode)},
                {"delta", cfg.delta},
                {"m", cfg.margin_base},
                {"alpha", cfg.alpha},
                {"bins", cfg.bins},
                {"lr", cfg.lr},
                {"epochs", cfg.epochs},
                {"warmup_epochs", cfg.warmup_epochs},
                {"batch_size", cfg.batch_size},
                {"embed_dim", cfg.embed_dim},
                {"seed", cfg.seed},
                {"gmm_max_iter", cfg.gmm_max_iter},
                {"gmm_tol", cfg.gmm_tol},
                {"use_sivc", cfg.use_sivc},
                {"use_dasm", cfg.use_dasm},
                {"partition_rule",
                 cfg.partition_rule == tsvc::PartitionRule::posterior ? "posterior" : "raw"},
                {"patience", cfg.patience}};
}

int run_train(const TrainOpts& opt) {
    const tsvc::TrainConfig cfg = effective_config(opt);
    const auto started = std::chrono::steady_clock::now();

    const tsvc::Dataset full = tsvc::read_dataset(opt.data);
    const auto parts = tsvc::split_by_layout(full, kFractions);
    const tsvc::TrainResult result = tsvc::train(parts[0], parts[1], cfg);

    fs::create_directories(opt.out_dir);
    const fs::path out_dir(opt.out_dir);
    const std::string metrics_path = (out_dir / "metrics.csv").string();
    tsvc::write_metrics_csv(metrics_path, result.logs);

    json checkpoints = json::object();
    for (const tsvc::NamedModel& model : result.models) {
        const std::string path = (out_dir / ("checkpoint_" + model.role + ".tsvm")).string();
        tsvc::save_checkpoint(path, model.params);
        checkpoints[model.role] = path;
    }

    const double duration =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest{{"config", config_json(cfg)},
                  {"dataset",
                   {{"path", opt.data},
                    {"fnv1a64", tsvc::fnv1a64_file(opt.data)},
                    {"train_pairs", parts[0].size()},
                    {"val_pairs", parts[1].size()},
                    {"test_pairs", parts[2].size()}}},
                  {"artifacts", {{"metrics_csv", metrics_path}, {"checkpoints", checkpoints}}},
                  {"duration_seconds", duration}};
    std::ofstream mf(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot open manifest for writing");
    mf << manifest.dump(2) << "\n";

    for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
    const tsvc::EpochLog& last = result.logs.back();
    std::cout << "trained " << tsvc::train_mode_name(cfg.mode) << " for " << result.logs.size()
              << " epochs; final val rsum " << fmt(last.rsum_val) << "; artifacts in "
              << opt.out_dir << "\n";
    return 0;
}

struct EvalOpts {
    std::vector<std::string> checkpoints;
    std::string data;
    std::string split = "test";
    std::string csv;
};

int run_eval(const EvalOpts& opt) {
    if (opt.checkpoints.empty() || opt.checkpoints.size() > 2)
        throw std::invalid_argument("need one or two checkpoints");
    if (opt.split != "val" && opt.split != "test")
        throw std::invalid_argument("split must be val or test");

    std::vector<tsvc::EncoderParams> models;
    for (const std::string& path : opt.checkpoints)
        models.push_back(tsvc::load_checkpoint(path));

    const tsvc::Dataset full = tsvc::read_dataset(opt.data);
    const auto parts = tsvc::split_by_layout(full, kFractions);
    const tsvc::Dataset& eval_set = opt.split == "val" ? parts[1] : parts[2];

    std::vector<std::vector<float>> imgs;
    std::vector<std::vector<float>> txts;
    for (const tsvc::PairSample& s : eval_set.samples) {
        imgs.push_back(s.img);
        txts.push_back(s.txt);
    }

    const tsvc::Matrix sim =
        models.size() == 2 ? tsvc::fused_similarity(models[0], models[1], imgs, txts)
                           : tsvc::similarity_matrix(models[0], imgs, txts);
    const tsvc::RetrievalReport rep = tsvc::report(sim);

    std::cout << "i2t r@1 " << fmt(rep.i2t_r1) << "\n"
              << "i2t r@5 " << fmt(rep.i2t_r5) << "\n"
              << "i2t r@10 " << fmt(rep.i2t_r10) << "\n"
              << "t2i r@1 " << fmt(rep.t2i_r1) << "\n"
              << "t2i r@5 " << fmt(rep.t2i_r5) << "\n"
              << "t2i r@10 " << fmt(rep.t2i_r10) << "\n"
              << "rsum " << fmt(rep.rsum) << "\n";

    if (!opt.csv.empty()) {
        std::ofstream out(opt.csv, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open file for writing: " + opt.csv);
        out << "i2t_r1,i2t_r5,i2t_r10,t2i_r1,t2i_r5,t2i_r10,rsum\n"
            << fmt(rep.i2t_r1) << ',' << fmt(rep.i2t_r5) << ',' << fmt(rep.i2t_r10) << ','
            << fmt(rep.t2i_r1) << ',' << fmt(rep.t2i_r5) << ',' << fmt(rep.t2i_r10) << ','
            << fmt(rep.rsum) << "\n";
        if (!out) throw std::runtime_error("write failed: " + opt.csv);
    }
    return 0;
}

struct CompareOpts {
    std::string data;
    std::string seeds;
    std::string out_dir;
    tsvc::TrainConfig cfg;
};

int run_compare(const CompareOpts& opt) {
    const std::vector<std::uint64_t> seeds = parse_seed_list(opt.seeds);
    const tsvc::Dataset full = tsvc::read_dataset(opt.data);
    const auto parts = tsvc::split_by_layout(full, kFractions);

    const tsvc::TrainMode modes[] = {tsvc::TrainMode::tsvc, tsvc::TrainMode::co_teaching,
                                     tsvc::TrainMode::no_filter};
    struct Cell {
        std::uint64_t seed;
        tsvc::TrainMode mode;
        std::vector<tsvc::EpochLog> logs;
    };
    std::vector<Cell> cells;
    for (std::uint64_t seed : seeds) {
        for (tsvc::TrainMode mode : modes) cells.push_back({seed, mode, {}});
    }

    run_cells(cells.size(), [&](std::size_t i) {
        tsvc::TrainConfig cfg = opt.cfg;
        cfg.seed = cells[i].seed;
        cfg.mode = cells[i].mode;
        cfg.validate();
        cells[i].logs = tsvc::train(parts[0], parts[1], cfg).logs;
    });

    fs::create_directories(opt.out_dir);
    const fs::path out_dir(opt.out_dir);
    {
        std::ofstream out(out_dir / "compare.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open compare.csv for writing");
        out << "seed,mode,epoch,rsum,partition_f1\n";
        for (const Cell& cell : cells) {
            for (const tsvc::EpochLog& log : cell.logs) {
                out << cell.seed << ',' << tsvc::train_mode_name(cell.mode) << ',' << log.epoch
                    << ',' << fmt(log.rsum_val) << ',' << fmt(log.partition_f1) << "\n";
            }
        }
        if (!out) throw std::runtime_error("write failed: compare.csv");
    }
    {
        std::ofstream out(out_dir / "compare_summary.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open compare_summary.csv for writing");
        out << "mode,median_final_rsum,min_final_rsum,max_final_rsum\n";
        for (tsvc::TrainMode mode : modes) {
            std::vector<double> finals;
            for (const Cell& cell : cells) {
                if (cell.mode == mode) finals.push_back(cell.logs.back().rsum_val);
            }
            std::vector<double> sorted = finals;
            std::sort(sorted.begin(), sorted.end());
            out << tsvc::train_mode_name(mode) << ',' << fmt(tsvc::median_of(finals)) << ','
                << fmt(sorted.front()) << ',' << fmt(sorted.back()) << "\n";
        }
        if (!out) throw std::runtime_error("write failed: compare_summary.csv");
    }
    std::cout << "compared " << seeds.size() << " seeds x 3 modes; results in " << opt.out_dir
              << "\n";
    return 0;
}

struct SweepOpts {
    std::string data;
    std::string param;
    std::string values;
    std::string seeds;
    std::string out_dir;
    tsvc::TrainConfig cfg;
};

int run_sweep(const SweepOpts& opt) {
    if (opt.param != "delta" && opt.param != "m")
        throw std::invalid_argument("unknown sweep parameter: " + opt.param);
    const std::vector<double> values = parse_value_list(opt.values);
    const std::vector<std::uint64_t> seeds = parse_seed_list(opt.seeds);
    const tsvc::Dataset full = tsvc::read_dataset(opt.data);
    const auto parts = tsvc::split_by_layout(full, kFractions);

    struct Cell {
        double value;
        std::uint64_t seed;
        double final_rsum = 0.0;
    };
    std::vector<Cell> cells;
    for (double value : values) {
        for (std::uint64_t seed : seeds) cells.push_back({value, seed, 0.0});
    }

    run_cells(cells.size(), [&](std::size_t i) {
        tsvc::TrainConfig cfg = opt.cfg;
        cfg.mode = tsvc::TrainMode::tsvc;
        cfg.seed = cells[i].seed;
        if (opt.param == "delta") {
            cfg.delta = cells[i].value;
        } else {
            cfg.margin_base = cells[i].value;
        }
        cfg.validate();
        cells[i].final_rsum = tsvc::train(parts[0], parts[1], cfg).logs.back().rsum_val;
    });

    fs::create_directories(opt.out_dir);
    const fs::path out_dir(opt.out_dir);
    {
        std::ofstream out(out_dir / "sweep.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open sweep.csv for writing");
        out << "param,value,seed,final_rsum\n";
        for (const Cell& cell : cells) {
            out << opt.param << ',' << fmt(cell.value) << ',' << cell.seed << ','
                << fmt(cell.final_rsum) << "\n";
        }
        if (!out) throw std::runtime_error("write failed: sweep.csv");
    }
    {
        std::ofstream out(out_dir / "sweep_summary.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open sweep_summary.csv for writing");
        out << "param,value,median_final_rsum\n";
        for (double value : values) {
            std::vector<double> finals;
            for (const Cell& cell : cells) {
                if (cell.value == value) finals.push_back(cell.final_rsum);
            }
            out << opt.param << ',' << fmt(value) << ',' << fmt(tsvc::median_of(finals)) << "\n";
        }
        if (!out) throw std::runtime_error("write failed: sweep_summary.csv");
    }
    std::cout << "swept " << opt.param << " over " << values.size() << " values x " << seeds.size()
              << " seeds; results in " << opt.out_dir << "\n";
    return 0;
}

void add_train_knobs(CLI::App* cmd, tsvc::TrainConfig& cfg) {
    cmd->add_option("--delta", cfg.delta, "clean/noisy partition threshold");
    cmd->add_option("--m", cfg.margin_base, "soft-margin base");
    cmd->add_option("--alpha", cfg.alpha, "base margin");
    cmd->add_option("--epochs", cfg.epochs, "total epochs");
    cmd->add_option("--warmup", cfg.warmup_epochs, "warmup epochs");
    cmd->add_option("--lr", cfg.lr, "learning rate");
    cmd->add_option("--batch-size", cfg.batch_size, "training batch size");
    cmd->add_option("--embed-dim", cfg.embed_dim, "shared embedding dimension");
    cmd->add_option("--bins", cfg.bins, "histogram bins (0 = automatic)");
    cmd->add_option("--patience", cfg.patience, "early-stop patience (0 = off)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tri-model training for image-text matching under noisy correspondence"};
    app.require_subcommand(1);

    GenOpts gen_opts;
    CLI::App* gen = app.add_subcommand("gen", "generate a dataset file");
    gen->add_option("--n", gen_opts.n, "total pair count");
    gen->add_option("--d-latent", gen_opts.d_latent, "latent dimension");
    gen->add_option("--d-img", gen_opts.d_img, "image feature dimension");
    gen->add_option("--d-txt", gen_opts.d_txt, "text feature dimension");
    gen->add_option("--noise-sigma", gen_opts.noise_sigma, "feature noise std");
    gen->add_option("--noise-ratio", gen_opts.noise_ratio, "train-split mismatch ratio");
    gen->add_option("--seed", gen_opts.seed, "generation seed");
    gen->add_option("--out", gen_opts.out, "output dataset path")->required();

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "train one mode on a dataset");
    train_cmd->add_option("--data", train_opts.data, "dataset path")->required();
    train_cmd->add_option("--out-dir", train_opts.out_dir, "run directory")->required();
    train_cmd->add_option("--mode", train_opts.mode, "tsvc, co or none");
    train_cmd->add_option("--seed", train_opts.cfg.seed, "run seed");
    train_cmd->add_option("--partition-rule", train_opts.partition_rule,
                          "posterior or raw loss thresholding");
    train_cmd->add_flag("--no-sivc", train_opts.no_sivc, "hard labels instead of soft labels");
    train_cmd->add_flag("--no-dasm", train_opts.no_dasm, "fixed margin instead of adaptive");
    add_train_knobs(train_cmd, train_opts.cfg);

    EvalOpts eval_opts;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on a dataset split");
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoints, "one or two checkpoint paths")
        ->required()
        ->expected(1, 2);
    eval_cmd->add_option("--data", eval_opts.data, "dataset path")->required();
    eval_cmd->add_option("--split", eval_opts.split, "val or test");
    eval_cmd->add_option("--csv", eval_opts.csv, "optional CSV output path");

    CompareOpts compare_opts;
    CLI::App* compare_cmd = app.add_subcommand("compare", "run all modes across seeds");
    compare_cmd->add_option("--data", compare_opts.data, "dataset path")->required();
    compare_cmd->add_option("--seeds", compare_opts.seeds, "comma-separated seeds")->required();
    compare_cmd->add_option("--out-dir", compare_opts.out_dir, "output directory")->required();
    add_train_knobs(compare_cmd, compare_opts.cfg);

    SweepOpts sweep_opts;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep delta or m across seeds");
    sweep_cmd->add_option("--data", sweep_opts.data, "dataset path")->required();
    sweep_cmd->add_option("--param", sweep_opts.param, "delta or m")->required();
    sweep_cmd->add_option("--values", sweep_opts.values, "comma-separated values")->required();
    sweep_cmd->add_option("--seeds", sweep_opts.seeds, "comma-separated seeds")->required();
    sweep_cmd->add_option("--out-dir", sweep_opts.out_dir, "output directory")->required();
    add_train_knobs(sweep_cmd, sweep_opts.cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen(gen_opts);
        if (train_cmd->parsed()) return run_train(train_opts);
        if (eval_cmd->parsed()) return run_eval(eval_opts);
        if (compare_cmd->parsed()) return run_compare(compare_opts);
        if (sweep_cmd->parsed()) return run_sweep(sweep_opts);
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const tsvc::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
