#include "tsvc/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tsvc {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'V', 'D'};
constexpr std::uint32_t kVersion = 1;

// Stream tags keep the projection matrices, the samples, noise selection
// and split shuffling on independent seeded streams.
constexpr std::uint64_t kMapStream = 0x6d61707374726d00ull;
constexpr std::uint64_t kSampleStream = 0x73616d706c657300ull;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365737400ull;
constexpr std::uint64_t kSplitStream = 0x73706c6974737400ull;

Matrix random_map(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f32(std::string& buf, float v) { append_u32(buf, std::bit_cast<std::uint32_t>(v)); }

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t count, const char* what) const {
        if (pos + count > buf.size())
            throw FormatError(std::string("truncated file, expected ") + what, pos);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& f) {
    for (double frac : {f.train, f.val, f.test}) {
        if (!(frac > 0.0)) throw std::invalid_argument("split fractions must be positive");
    }
    if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");

    const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n)));
    if (n_train + n_val >= n) throw std::invalid_argument("split leaves no test samples");
    const std::size_t n_test = n - n_train - n_val;
    if (n_train == 0 || n_val == 0) throw std::invalid_argument("split produces an empty part");
    return {n_train, n_val, n_test};
}

std::array<Dataset, 3> take_contiguous(const Dataset& dataset,
                                       const std::vector<std::size_t>& order,
                                       const std::array<std::size_t, 3>& sizes) {
    std::array<Dataset, 3> parts;
    std::size_t next = 0;
    for (int p = 0; p < 3; ++p) {
        parts[p].d_img = dataset.d_img;
        parts[p].d_txt = dataset.d_txt;
        parts[p].seed = dataset.seed;
        parts[p].samples.reserve(sizes[p]);
        for (std::size_t i = 0; i < sizes[p]; ++i)
            parts[p].samples.push_back(dataset.samples[order[next++]]);
    }
    return parts;
}

}  // namespace

void DatasetSpec::validate() const {
    if (n < 10) throw std::invalid_argument("dataset needs at least 10 pairs");
    if (d_latent < 2 || d_img < 2 || d_txt < 2)
        throw std::invalid_argument("dataset dimensions must be >= 2");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw std::invalid_argument("noise sigma must be finite and >= 0");
}

Dataset generate(const DatasetSpec& spec) {
    spec.validate();
    std::mt19937_64 map_rng(splitmix64(spec.seed ^ kMapStream));
    const Matrix img_map = random_map(spec.d_img, spec.d_latent, map_rng);
    const Matrix txt_map = random_map(spec.d_txt, spec.d_latent, map_rng);
    return generate(spec, img_map, txt_map);
}

Dataset generate(const DatasetSpec& spec, const Matrix& img_map, const Matrix& txt_map) {
    spec.validate();
    if (img_map.rows != spec.d_img || img_map.cols != spec.d_latent)
        throw std::invalid_argument("image map shape does not match spec");
    if (txt_map.rows != spec.d_txt || txt_map.cols != spec.d_latent)
        throw std::invalid_argument("text map shape does not match spec");

    std::mt19937_64 rng(splitmix64(spec.seed ^ kSampleStream));
    std::normal_distribution<double> unit(0.0, 1.0);

    Dataset ds;
    ds.d_img = spec.d_img;
    ds.d_txt = spec.d_txt;
    ds.seed = spec.seed;
    ds.samples.resize(spec.n);

    std::vector<double> z(spec.d_latent);
    for (PairSample& s : ds.samples) {
        for (double& v : z) v = unit(rng);

        s.img.resize(spec.d_img);
        for (std::size_t r = 0; r < spec.d_img; ++r) {
            const double* mr = img_map.row(r);
            double acc = 0.0;
            for (std::size_t c = 0; c < spec.d_latent; ++c) acc += mr[c] * z[c];
            s.img[r] = static_cast<float>(acc);
        }
        if (spec.noise_sigma > 0.0) {
            for (float& v : s.img)
                v = static_cast<float>(static_cast<double>(v) + spec.noise_sigma * unit(rng));
        }

        s.txt.resize(spec.d_txt);
        for (std::size_t r = 0; r < spec.d_txt; ++r) {
            const double* mr = txt_map.row(r);
            double acc = 0.0;
            for (std::size_t c = 0; c < spec.d_latent; ++c) acc += mr[c] * z[c];
            s.txt[r] = static_cast<float>(acc);
        }
        if (spec.noise_sigma > 0.0) {
            for (float& v : s.txt)
                v = static_cast<float>(static_cast<double>(v) + spec.noise_sigma * unit(rng));
        }
    }
    return ds;
}

Dataset inject_noise(const Dataset& dataset, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("noise ratio must be in [0, 1)");
    if (ratio == 0.0) return dataset;
    const double expected = ratio * static_cast<double>(dataset.size());
    if (expected < 2.0)
        throw std::invalid_argument("noise ratio selects fewer than 2 pairs");

    const auto k = static_cast<std::size_t>(std::llround(expected));
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix64(seed ^ kNoiseStream));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(selected.begin(), selected.end());

    Dataset out = dataset;
    // Cyclic shift over the selected positions: every selected pair receives
    // a different pair's text, so all of them become mismatched.
    for (std::size_t i = 0; i < k; ++i) {
        out.samples[selected[i]].txt = dataset.samples[selected[(i + 1) % k]].txt;
        out.samples[selected[i]].truly_clean = false;
    }
    return out;
}

std::array<Dataset, 3> split(const Dataset& dataset, const SplitFractions& fractions,
                             std::uint64_t seed) {
    const auto sizes = split_sizes(dataset.size(), fractions);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix64(seed ^ kSplitStream));
    std::shuffle(order.begin(), order.end(), rng);
    return take_contiguous(dataset, order, sizes);
}

std::array<Dataset, 3> split_by_layout(const Dataset& dataset, const SplitFractions& fractions) {
    const auto sizes = split_sizes(dataset.size(), fractions);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    return take_contiguous(dataset, order, sizes);
}

void write_dataset(const Dataset& dataset, const std::string& path) {
    for (const PairSample& s : dataset.samples) {
        if (s.img.size() != dataset.d_img || s.txt.size() != dataset.d_txt)
            throw std::invalid_argument("sample dimensions do not match dataset header");
        if (s.y > 1) throw std::invalid_argument("label byte must be 0 or 1");
    }

    std::string buf;
    buf.reserve(28 + dataset.size() * (4 * dataset.d_img + 4 * dataset.d_txt + 2));
    buf.append(kMagic, 4);
    append_u32(buf, kVersion);
    append_u32(buf, static_cast<std::uint32_t>(dataset.size()));
    append_u32(buf, static_cast<std::uint32_t>(dataset.d_img));
    append_u32(buf, static_cast<std::uint32_t>(dataset.d_txt));
    append_u64(buf, dataset.seed);
    for (const PairSample& s : dataset.samples) {
        for (float v : s.img) append_f32(buf, v);
        for (float v : s.txt) append_f32(buf, v);
        buf.push_back(static_cast<char>(s.y));
        buf.push_back(static_cast<char>(s.truly_clean ? 1 : 0));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader rd{buf};

    rd.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("bad dataset magic", 0);
    rd.pos = 4;
    const std::uint32_t version = rd.u32("version");
    if (version != kVersion) throw FormatError("unsupported dataset version", 4);
    const std::uint32_t n = rd.u32("pair count");
    const std::uint32_t d_img = rd.u32("d_img");
    if (d_img < 2) throw FormatError("d_img must be >= 2", 12);
    const std::uint32_t d_txt = rd.u32("d_txt");
    if (d_txt < 2) throw FormatError("d_txt must be >= 2", 16);
    const std::uint64_t seed = rd.u64("seed");

    Dataset ds;
    ds.d_img = d_img;
    ds.d_txt = d_txt;
    ds.seed = seed;
    ds.samples.resize(n);
    for (PairSample& s : ds.samples) {
        s.img.resize(d_img);
        for (float& v : s.img) v = rd.f32("image features");
        s.txt.resize(d_txt);
        for (float& v : s.txt) v = rd.f32("text features");
        const std::size_t y_at = rd.pos;
        s.y = rd.u8("label byte");
        if (s.y > 1) throw FormatError("label byte must be 0 or 1", y_at);
        const std::size_t clean_at = rd.pos;
        const std::uint8_t clean = rd.u8("clean flag byte");
        if (clean > 1) throw FormatError("clean flag byte must be 0 or 1", clean_at);
        s.truly_clean = clean == 1;
    }
    if (rd.pos != buf.size()) throw FormatError("trailing bytes after records", rd.pos);
    return ds;
}

}  // namespace tsvc
