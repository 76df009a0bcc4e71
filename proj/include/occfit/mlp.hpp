#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "occfit/rng.hpp"
#include "occfit/types.hpp"

namespace occfit {

// Coordinate MLP: 3 -> width x hidden_layers -> 1, softplus(beta) activations,
// sigmoid output. skip_layer (if >= 0) names the hidden layer whose input is
// the previous activation concatenated with the raw 3D coordinate.
struct NetworkArchitecture {
    int hidden_layers = 8;
    int hidden_width = 256;
    int skip_layer = 4; // -1 for none
    double softplus_beta = 10.0;

    void validate() const {
        if (hidden_layers < 1)
            throw Error(Error::Code::invalid_architecture, "hidden_layers must be >= 1");
        if (hidden_width < 1)
            throw Error(Error::Code::invalid_architecture, "hidden_width must be >= 1");
        if (skip_layer != -1 && (skip_layer <= 0 || skip_layer >= hidden_layers))
            throw Error(Error::Code::invalid_architecture,
                        "skip_layer must lie strictly between 0 and hidden_layers");
        if (!(softplus_beta > 0.0))
            throw Error(Error::Code::invalid_architecture, "softplus_beta must be positive");
    }

    /// Input width of hidden layer l (layer hidden_layers is the output layer).
    int layer_input(int l) const {
        if (l == 0) return 3;
        if (l == hidden_layers) return hidden_width;
        return l == skip_layer ? hidden_width + 3 : hidden_width;
    }

    int layer_output(int l) const { return l == hidden_layers ? 1 : hidden_width; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (int l = 0; l <= hidden_layers; ++l)
            n += static_cast<std::size_t>(layer_output(l)) * layer_input(l) + layer_output(l);
        return n;
    }

    bool operator==(const NetworkArchitecture& o) const = default;
};

struct NetworkParameters {
    NetworkArchitecture arch;
    std::vector<Matrix> weights; // weights[l]: layer_output(l) x layer_input(l)
    std::vector<Vector> biases;
    std::uint64_t seed = 0;

    int layers() const { return arch.hidden_layers + 1; }

    bool all_finite() const {
        for (const Matrix& w : weights)
            if (!w.allFinite()) return false;
        for (const Vector& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }

    /// Row-major layer order, weights then bias; matches the checkpoint layout.
    Vector flatten() const {
        Vector out(arch.parameter_count());
        std::size_t k = 0;
        for (int l = 0; l < layers(); ++l) {
            const Matrix& w = weights[l];
            for (int r = 0; r < w.rows(); ++r)
                for (int c = 0; c < w.cols(); ++c) out[k++] = w(r, c);
            for (int r = 0; r < biases[l].size(); ++r) out[k++] = biases[l][r];
        }
        return out;
    }

    void assign_flat(const Vector& flat) {
        std::size_t k = 0;
        for (int l = 0; l < layers(); ++l) {
            Matrix& w = weights[l];
            for (int r = 0; r < w.rows(); ++r)
                for (int c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
            for (int r = 0; r < biases[l].size(); ++r) biases[l][r] = flat[k++];
        }
    }
};

/// Glorot-uniform weights in row-major draw order, zero biases. Deterministic.
inline NetworkParameters init_network(const NetworkArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    NetworkParameters p;
    p.arch = arch;
    p.seed = seed;
    Rng rng(seed);
    for (int l = 0; l <= arch.hidden_layers; ++l) {
        const int rows = arch.layer_output(l);
        const int cols = arch.layer_input(l);
        Matrix w(rows, cols);
        const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-s, s);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(Vector::Zero(rows));
    }
    return p;
}

// --- checkpoint format -------------------------------------------------------
// "OCCF" | u32 version | u32 hidden_layers | u32 width | u32 skip (~0 if none)
// | f64 beta | per layer: row-major float32 weights, then float32 biases.
// All little-endian. Weights are stored at float32; deserialize yields
// float32-exact doubles so serialize(deserialize(bytes)) == bytes.

namespace detail {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kNoSkip = 0xFFFFFFFFu;

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    bool exhausted() const { return pos_ == size_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > size_)
            throw Error(Error::Code::corrupt_checkpoint, "checkpoint truncated");
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<std::uint8_t> serialize(const NetworkParameters& p) {
    std::vector<std::uint8_t> out;
    out.reserve(28 + 4 * p.arch.parameter_count());
    out.insert(out.end(), {'O', 'C', 'C', 'F'});
    detail::put_u32(out, detail::kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(p.arch.hidden_layers));
    detail::put_u32(out, static_cast<std::uint32_t>(p.arch.hidden_width));
    detail::put_u32(out, p.arch.skip_layer < 0 ? detail::kNoSkip
                                               : static_cast<std::uint32_t>(p.arch.skip_layer));
    detail::put_f64(out, p.arch.softplus_beta);
    for (int l = 0; l < p.layers(); ++l) {
        const Matrix& w = p.weights[l];
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) detail::put_f32(out, static_cast<float>(w(r, c)));
        for (int r = 0; r < p.biases[l].size(); ++r)
            detail::put_f32(out, static_cast<float>(p.biases[l][r]));
    }
    return out;
}

inline NetworkParameters deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "OCCF", 4) != 0)
        throw Error(Error::Code::corrupt_checkpoint, "bad checkpoint magic");
    detail::ByteReader rd(bytes.data() + 4, bytes.size() - 4);
    if (rd.u32() != detail::kCheckpointVersion)
        throw Error(Error::Code::corrupt_checkpoint, "unsupported checkpoint version");
    NetworkArchitecture arch;
    arch.hidden_layers = static_cast<int>(rd.u32());
    arch.hidden_width = static_cast<int>(rd.u32());
    const std::uint32_t skip = rd.u32();
    arch.skip_layer = skip == detail::kNoSkip ? -1 : static_cast<int>(skip);
    arch.softplus_beta = rd.f64();
    if (arch.hidden_layers < 1 || arch.hidden_layers > 1024 || arch.hidden_width < 1 ||
        arch.hidden_width > 65536 ||
        (arch.skip_layer != -1 && (arch.skip_layer <= 0 || arch.skip_layer >= arch.hidden_layers)) ||
        !(arch.softplus_beta > 0.0))
        throw Error(Error::Code::corrupt_checkpoint, "checkpoint header shape mismatch");

    NetworkParameters p;
    p.arch = arch;
    for (int l = 0; l <= arch.hidden_layers; ++l) {
        const int rows = arch.layer_output(l);
        const int cols = arch.layer_input(l);
        Matrix w(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) w(r, c) = static_cast<double>(rd.f32());
        Vector b(rows);
        for (int r = 0; r < rows; ++r) b[r] = static_cast<double>(rd.f32());
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    if (!rd.exhausted())
        throw Error(Error::Code::corrupt_checkpoint, "trailing bytes after checkpoint payload");
    return p;
}

inline std::size_t model_byte_size(const NetworkParameters& p) {
    return 28 + 4 * p.arch.parameter_count();
}

inline void save_checkpoint(const NetworkParameters& p, const std::string& path) {
    const auto bytes = serialize(p);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw Error(Error::Code::io, "cannot write " + path);
    const std::size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (written != bytes.size()) throw Error(Error::Code::io, "short write: " + path);
}

inline NetworkParameters load_checkpoint(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw Error(Error::Code::file_not_found, "cannot open " + path);
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    const std::size_t read = std::fread(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (read != bytes.size()) throw Error(Error::Code::io, "short read: " + path);
    return deserialize(bytes);
}

} // namespace occfit
