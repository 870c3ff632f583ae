#include "tsvc/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace tsvc {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'V', 'M'};
constexpr std::uint32_t kVersion = 1;

Matrix xavier_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(cols + rows));
    std::uniform_real_distribution<double> dist(-a, a);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

/// W * x, then L2-normalize in place. Returns the pre-normalization norm
/// (0 for a zero projection, which maps to the first basis vector).
double project_normalized(const Matrix& w, FloatView x, FeatureVector& out) {
    if (x.size() != w.cols) throw std::invalid_argument("input dimension does not match weights");
    out.assign(w.rows, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * static_cast<double>(x[c]);
        out[r] = acc;
    }
    double norm = 0.0;
    for (double v : out) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        out.assign(w.rows, 0.0);
        out[0] = 1.0;
        return 0.0;
    }
    for (double& v : out) v /= norm;
    return norm;
}

void embed_side(const Matrix& w, const std::vector<std::vector<float>>& inputs,
                std::vector<FeatureVector>& embs, std::vector<double>& norms) {
    embs.reserve(inputs.size());
    norms.reserve(inputs.size());
    FeatureVector u;
    for (const auto& x : inputs) {
        norms.push_back(project_normalized(w, x, u));
        embs.push_back(u);
    }
}

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& buf, double v) { append_u64(buf, std::bit_cast<std::uint64_t>(v)); }

/// Sequential little-endian reader that reports the byte offset of the
/// first violated expectation.
struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t count, const char* what) const {
        if (pos + count > buf.size())
            throw FormatError(std::string("truncated file, expected ") + what, pos);
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
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

}  // namespace

EncoderParams init_encoder(std::size_t d_img, std::size_t d_txt, std::size_t embed_dim,
                           std::uint64_t seed) {
    if (d_img < 2 || d_txt < 2 || embed_dim < 2)
        throw std::invalid_argument("encoder dimensions must be >= 2");
    std::mt19937_64 rng(seed);
    EncoderParams params;
    params.w_img = xavier_matrix(embed_dim, d_img, rng);
    params.w_txt = xavier_matrix(embed_dim, d_txt, rng);
    params.seed = seed;
    return params;
}

FeatureVector embed(const Matrix& w, FloatView x) {
    FeatureVector out;
    project_normalized(w, x, out);
    return out;
}

double similarity(const FeatureVector& u, const FeatureVector& v) {
    if (u.size() != v.size()) throw std::invalid_argument("embedding dimensions differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return acc;
}

BatchForward forward_batch(const EncoderParams& params, const std::vector<std::vector<float>>& imgs,
                           const std::vector<std::vector<float>>& txts) {
    if (imgs.empty() || txts.empty()) throw std::invalid_argument("batch must be nonempty");

    BatchForward fwd;
    embed_side(params.w_img, imgs, fwd.img_emb, fwd.img_norm);
    embed_side(params.w_txt, txts, fwd.txt_emb, fwd.txt_norm);

    fwd.sim = Matrix(imgs.size(), txts.size());
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        for (std::size_t j = 0; j < txts.size(); ++j) {
            fwd.sim.at(i, j) = similarity(fwd.img_emb[i], fwd.txt_emb[j]);
        }
    }
    return fwd;
}

Matrix similarity_matrix(const EncoderParams& params, const std::vector<std::vector<float>>& imgs,
                         const std::vector<std::vector<float>>& txts) {
    return forward_batch(params, imgs, txts).sim;
}

EncoderParams sgd_step(const EncoderParams& params, const EncoderGrads& grads, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!params.w_img.same_shape(grads.w_img) || !params.w_txt.same_shape(grads.w_txt))
        throw std::invalid_argument("gradient shapes do not match parameters");

    EncoderParams next = params;
    for (std::size_t i = 0; i < next.w_img.data.size(); ++i)
        next.w_img.data[i] -= lr * grads.w_img.data[i];
    for (std::size_t i = 0; i < next.w_txt.data.size(); ++i)
        next.w_txt.data[i] -= lr * grads.w_txt.data[i];
    return next;
}

void save_checkpoint(const std::string& path, const EncoderParams& params) {
    std::string buf;
    buf.reserve(28 + 8 * (params.w_img.data.size() + params.w_txt.data.size()));
    buf.append(kMagic, 4);
    append_u32(buf, kVersion);
    append_u32(buf, static_cast<std::uint32_t>(params.embed_dim()));
    append_u32(buf, static_cast<std::uint32_t>(params.d_img()));
    append_u32(buf, static_cast<std::uint32_t>(params.d_txt()));
    append_u64(buf, params.seed);
    for (double v : params.w_img.data) append_f64(buf, v);
    for (double v : params.w_txt.data) append_f64(buf, v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

EncoderParams load_checkpoint(const std::string& path) {
    const std::string buf = read_file_bytes(path);
    ByteReader rd{buf};

    rd.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
    rd.pos = 4;
    const std::uint32_t version = rd.u32("version");
    if (version != kVersion) throw FormatError("unsupported checkpoint version", 4);
    const std::uint32_t embed_dim = rd.u32("embed_dim");
    if (embed_dim < 2) throw FormatError("embed_dim must be >= 2", 8);
    const std::uint32_t d_img = rd.u32("d_img");
    if (d_img < 2) throw FormatError("d_img must be >= 2", 12);
    const std::uint32_t d_txt = rd.u32("d_txt");
    if (d_txt < 2) throw FormatError("d_txt must be >= 2", 16);
    const std::uint64_t seed = rd.u64("seed");

    EncoderParams params;
    params.seed = seed;
    params.w_img = Matrix(embed_dim, d_img);
    params.w_txt = Matrix(embed_dim, d_txt);
    const std::size_t weights_at = rd.pos;
    for (double& v : params.w_img.data) v = rd.f64("image weights");
    for (double& v : params.w_txt.data) v = rd.f64("text weights");
    if (rd.pos != buf.size()) throw FormatError("trailing bytes after weights", rd.pos);
    for (double v : params.w_img.data) {
        if (!std::isfinite(v)) throw FormatError("non-finite weight entry", weights_at);
    }
    for (double v : params.w_txt.data) {
        if (!std::isfinite(v)) throw FormatError("non-finite weight entry", weights_at);
    }
    return params;
}

}  // namespace tsvc
