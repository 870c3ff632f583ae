#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsvc/dasm.hpp"
#include "tsvc/dataset.hpp"
#include "tsvc/gmm.hpp"
#include "tsvc/histogram_mi.hpp"
#include "tsvc/metrics.hpp"
#include "tsvc/soft_label.hpp"
#include "tsvc/trainer.hpp"

namespace py = pybind11;

namespace {

tsvc::HistogramConfig hist_config(int bins) {
    tsvc::HistogramConfig cfg;
    cfg.bins = bins;
    return cfg;
}

tsvc::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("matrix must be nonempty");
    tsvc::Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols) throw std::invalid_argument("ragged matrix rows");
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
    }
    return m;
}

py::dict report_dict(const tsvc::RetrievalReport& rep) {
    py::dict d;
    d["i2t_r1"] = rep.i2t_r1;
    d["i2t_r5"] = rep.i2t_r5;
    d["i2t_r10"] = rep.i2t_r10;
    d["t2i_r1"] = rep.t2i_r1;
    d["t2i_r5"] = rep.t2i_r5;
    d["t2i_r10"] = rep.t2i_r10;
    d["rsum"] = rep.rsum;
    return d;
}

py::dict log_dict(const tsvc::EpochLog& log) {
    py::dict d;
    d["epoch"] = log.epoch;
    d["rsum"] = log.rsum_val;
    d["i2t_r1"] = log.i2t_r1;
    d["i2t_r5"] = log.i2t_r5;
    d["i2t_r10"] = log.i2t_r10;
    d["t2i_r1"] = log.t2i_r1;
    d["t2i_r5"] = log.t2i_r5;
    d["t2i_r10"] = log.t2i_r10;
    d["partition_precision"] = log.partition_precision;
    d["partition_recall"] = log.partition_recall;
    d["partition_f1"] = log.partition_f1;
    d["mean_loss"] = log.mean_loss;
    return d;
}

constexpr tsvc::SplitFractions kFractions{};

void write_synthetic_dataset(const std::string& path, std::size_t n, std::size_t d_latent,
                             std::size_t d_img, std::size_t d_txt, double noise_sigma,
                             double noise_ratio, std::uint64_t seed) {
    tsvc::DatasetSpec spec;
    spec.n = n;
    spec.d_latent = d_latent;
    spec.d_img = d_img;
    spec.d_txt = d_txt;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;

    auto parts = tsvc::split(tsvc::generate(spec), kFractions, seed);
    parts[0] = tsvc::inject_noise(parts[0], noise_ratio, seed);

    tsvc::Dataset packed;
    packed.d_img = spec.d_img;
    packed.d_txt = spec.d_txt;
    packed.seed = seed;
    for (const auto& part : parts) {
        for (const tsvc::PairSample& s : part.samples) packed.samples.push_back(s);
    }
    tsvc::write_dataset(packed, path);
}

py::list train_on_file(const std::string& path, const std::string& mode, double delta, double m,
                       double alpha, int epochs, int warmup, std::size_t batch_size,
                       std::size_t embed_dim, double lr, std::uint64_t seed) {
    tsvc::TrainConfig cfg;
    cfg.mode = tsvc::parse_train_mode(mode);
    cfg.delta = delta;
    cfg.margin_base = m;
    cfg.alpha = alpha;
    cfg.epochs = epochs;
    cfg.warmup_epochs = warmup;
    cfg.batch_size = batch_size;
    cfg.embed_dim = embed_dim;
    cfg.lr = lr;
    cfg.seed = seed;
    cfg.validate();

    const auto parts = tsvc::split_by_layout(tsvc::read_dataset(path), kFractions);
    const tsvc::TrainResult result = tsvc::train(parts[0], parts[1], cfg);
    py::list logs;
    for (const tsvc::EpochLog& log : result.logs) logs.append(log_dict(log));
    return logs;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "tri-model training for image-text matching under noisy correspondence";

    py::register_exception<tsvc::FormatError>(mod, "FormatError", PyExc_ValueError);
    py::register_exception<tsvc::DegenerateInput>(mod, "DegenerateInput", PyExc_ValueError);

    mod.def(
        "mutual_information",
        [](const std::vector<double>& x, const std::vector<double>& y, int bins) {
            return tsvc::mutual_information(x, y, hist_config(bins));
        },
        py::arg("x"), py::arg("y"), py::arg("bins") = 0,
        "Histogram mutual information of two equal-length vectors, in nats.");
    mod.def(
        "entropy",
        [](const std::vector<double>& v, int bins) { return tsvc::entropy(v, hist_config(bins)); },
        py::arg("v"), py::arg("bins") = 0, "Histogram entropy of a vector, in nats.");

    mod.def(
        "soft_label",
        [](double pair_rate, double text_rate, double image_rate) {
            return tsvc::soft_label(tsvc::ChangeRates{pair_rate, text_rate, image_rate});
        },
        py::arg("pair_rate"), py::arg("text_rate"), py::arg("image_rate"),
        "Soft correspondence label from MI change rates.");
    mod.def(
        "change_rates",
        [](double mi_anchor, double mi_pair, double mi_cross_txt, double mi_cross_img) {
            const tsvc::ChangeRates r =
                tsvc::change_rates_from_mi(mi_anchor, mi_pair, mi_cross_txt, mi_cross_img);
            return py::make_tuple(r.pair_rate, r.text_rate, r.image_rate);
        },
        py::arg("mi_anchor"), py::arg("mi_pair"), py::arg("mi_cross_txt"), py::arg("mi_cross_img"),
        "Change rates of a candidate pair's MI values against the anchor's.");

    py::class_<tsvc::GmmModel>(mod, "GmmModel")
        .def_readonly("weights", &tsvc::GmmModel::weights)
        .def_readonly("means", &tsvc::GmmModel::means)
        .def_readonly("variances", &tsvc::GmmModel::variances)
        .def_readonly("clean_component", &tsvc::GmmModel::clean_component);
    mod.def(
        "fit_gmm",
        [](const std::vector<double>& losses, int max_iter, double tol) {
            return tsvc::fit_gmm_1d(losses, max_iter, tol);
        },
        py::arg("losses"), py::arg("max_iter") = 50, py::arg("tol") = 1e-6,
        "Two-component 1-D Gaussian mixture over losses.");
    mod.def(
        "posterior_clean",
        [](const tsvc::GmmModel& model, double loss) { return tsvc::posterior_clean(model, loss); },
        py::arg("model"), py::arg("loss"), "P(clean component | loss).");
    mod.def(
        "partition",
        [](const std::vector<double>& losses, const tsvc::GmmModel& model, double delta) {
            const tsvc::FlowPartition flows = tsvc::partition(losses, model, delta);
            return py::make_tuple(flows.clean, flows.noisy);
        },
        py::arg("losses"), py::arg("model"), py::arg("delta") = 0.5,
        "Split losses into (clean, noisy) index lists at posterior threshold delta.");

    mod.def(
        "adaptive_margin",
        [](double y_star, double d, double m, double alpha) {
            return tsvc::adaptive_margin(y_star, d, tsvc::MarginParams{m, alpha});
        },
        py::arg("y_star"), py::arg("d") = 0.0, py::arg("m") = 10.0, py::arg("alpha") = 0.2,
        "Adaptive soft margin for one sample.");

    mod.def(
        "recall_at_k",
        [](const std::vector<std::vector<double>>& sim, std::size_t k,
           const std::string& direction) {
            tsvc::Direction dir;
            if (direction == "i2t") {
                dir = tsvc::Direction::image_to_text;
            } else if (direction == "t2i") {
                dir = tsvc::Direction::text_to_image;
            } else {
                throw std::invalid_argument("direction must be 'i2t' or 't2i'");
            }
            return tsvc::recall_at_k(to_matrix(sim), k, dir);
        },
        py::arg("sim"), py::arg("k"), py::arg("direction"),
        "Recall@k over a square similarity matrix with matches on the diagonal.");
    mod.def(
        "report",
        [](const std::vector<std::vector<double>>& sim) {
            return report_dict(tsvc::report(to_matrix(sim)));
        },
        py::arg("sim"), "All six recalls plus their sum.");

    mod.def("write_synthetic_dataset", &write_synthetic_dataset, py::arg("path"),
            py::arg("n") = 2000, py::arg("d_latent") = 16, py::arg("d_img") = 48,
            py::arg("d_txt") = 32, py::arg("noise_sigma") = 0.3, py::arg("noise_ratio") = 0.0,
            py::arg("seed") = 1,
            "Generate, split, inject train noise and write a dataset file.");
    mod.def("train_on_file", &train_on_file, py::arg("path"), py::arg("mode") = "tsvc",
            py::arg("delta") = 0.5, py::arg("m") = 10.0, py::arg("alpha") = 0.2,
            py::arg("epochs") = 40, py::arg("warmup") = 5, py::arg("batch_size") = 128,
            py::arg("embed_dim") = 64, py::arg("lr") = 0.05, py::arg("seed") = 1,
            "Train on a dataset file and return one metrics dict per epoch.");
}
