#pragma once

// Internal little-endian tensor codec shared by the weight-file and chunk
// serializers. Not part of the public API.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "ringlm/config.hpp"
#include "ringlm/error.hpp"
#include "ringlm/model.hpp"
#include "ringlm/tensor.hpp"

namespace ringlm::detail {

static_assert(std::endian::native == std::endian::little,
              "serializers assume a little-endian host");
static_assert(sizeof(float) == 4, "serializers assume 32-bit IEEE floats");

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f32_span(std::span<const float> v) { raw(v.data(), v.size() * 4); }
    void bytes(std::span<const std::uint8_t> v) { raw(v.data(), v.size()); }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<std::uint8_t> buf_;
};

// Reads from a flat buffer; every accessor throws WeightIoError(truncated)
// past the end.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() { return *take(1); }
    std::uint16_t u16() { return load<std::uint16_t>(); }
    std::uint32_t u32() { return load<std::uint32_t>(); }
    std::uint64_t u64() { return load<std::uint64_t>(); }
    float f32() { return load<float>(); }
    void f32_span(std::span<float> out) {
        const std::uint8_t* p = take(out.size() * 4);
        std::memcpy(out.data(), p, out.size() * 4);
    }
    bool at_end() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    template <typename T>
    T load() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }
    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw WeightIoError(WeightIoError::Kind::truncated,
                                "unexpected end of data at offset " + std::to_string(pos_));
        }
        const std::uint8_t* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline void write_vector(ByteWriter& w, std::span<const float> v) {
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(v.size()));
    w.f32_span(v);
}

inline void write_matrix(ByteWriter& w, const Matrix& m) {
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(m.rows));
    w.u32(static_cast<std::uint32_t>(m.cols));
    w.f32_span(m.data);
}

inline std::vector<float> read_vector(ByteReader& r, std::size_t expected_len,
                                      const std::string& name) {
    if (r.u32() != 1) {
        throw WeightIoError(WeightIoError::Kind::bad_shape, name + ": expected rank 1");
    }
    const std::uint32_t len = r.u32();
    if (len != expected_len) {
        throw WeightIoError(WeightIoError::Kind::bad_shape,
                            name + ": expected length " + std::to_string(expected_len) +
                                ", found " + std::to_string(len));
    }
    std::vector<float> v(len);
    r.f32_span(v);
    return v;
}

inline Matrix read_matrix(ByteReader& r, std::size_t expected_rows, std::size_t expected_cols,
                          const std::string& name) {
    if (r.u32() != 2) {
        throw WeightIoError(WeightIoError::Kind::bad_shape, name + ": expected rank 2");
    }
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != expected_rows || cols != expected_cols) {
        throw WeightIoError(WeightIoError::Kind::bad_shape,
                            name + ": expected " + std::to_string(expected_rows) + "x" +
                                std::to_string(expected_cols) + ", found " +
                                std::to_string(rows) + "x" + std::to_string(cols));
    }
    Matrix m(rows, cols);
    r.f32_span(m.data);
    return m;
}

inline void write_model_config(ByteWriter& w, const ModelConfig& c) {
    w.u32(c.vocab_size);
    w.u32(c.n_blocks);
    w.u32(c.d_model);
    w.u32(c.n_heads);
    w.u32(c.n_kv_heads);
    w.u32(c.d_head);
    w.u32(c.context_len);
    w.u32(c.d_ffn);
    w.f32(c.rope_theta);
    w.f32(c.rmsnorm_eps);
}

inline ModelConfig read_model_config(ByteReader& r) {
    ModelConfig c;
    c.vocab_size = r.u32();
    c.n_blocks = r.u32();
    c.d_model = r.u32();
    c.n_heads = r.u32();
    c.n_kv_heads = r.u32();
    c.d_head = r.u32();
    c.context_len = r.u32();
    c.d_ffn = r.u32();
    c.rope_theta = r.f32();
    c.rmsnorm_eps = r.f32();
    return c;
}

inline void write_block_weights(ByteWriter& w, const BlockWeights& b) {
    write_vector(w, b.attn_norm);
    write_matrix(w, b.wq);
    write_matrix(w, b.wk);
    write_matrix(w, b.wv);
    write_matrix(w, b.wo);
    write_vector(w, b.ffn_norm);
    write_matrix(w, b.w_gate);
    write_matrix(w, b.w_up);
    write_matrix(w, b.w_down);
}

inline BlockWeights read_block_weights(ByteReader& r, const ModelConfig& c, std::size_t index) {
    const std::string tag = "block " + std::to_string(index);
    const std::size_t kv_dim = static_cast<std::size_t>(c.n_kv_heads) * c.d_head;
    BlockWeights b;
    b.attn_norm = read_vector(r, c.d_model, tag + " attn_norm");
    b.wq = read_matrix(r, c.d_model, c.d_model, tag + " wq");
    b.wk = read_matrix(r, c.d_model, kv_dim, tag + " wk");
    b.wv = read_matrix(r, c.d_model, kv_dim, tag + " wv");
    b.wo = read_matrix(r, c.d_model, c.d_model, tag + " wo");
    b.ffn_norm = read_vector(r, c.d_model, tag + " ffn_norm");
    b.w_gate = read_matrix(r, c.d_model, c.d_ffn, tag + " w_gate");
    b.w_up = read_matrix(r, c.d_model, c.d_ffn, tag + " w_up");
    b.w_down = read_matrix(r, c.d_ffn, c.d_model, tag + " w_down");
    return b;
}

} // namespace ringlm::detail
