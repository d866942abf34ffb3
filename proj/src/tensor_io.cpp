#include "cwt/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace cwt {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};

void append_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint64_t read_le(std::istream& is, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int ch = is.get();
        if (ch < 0) throw std::runtime_error("tensor record truncated");
        v |= static_cast<std::uint64_t>(ch) << (8 * i);
    }
    return v;
}

}  // namespace

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) { append_le(out, v, 2); }
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) { append_le(out, v, 4); }
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) { append_le(out, v, 8); }

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::f64: return 8;
        case DType::f32: return 4;
        case DType::i32: return 4;
    }
    throw std::runtime_error("unknown dtype code");
}

std::uint64_t Tensor::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

Tensor Tensor::from_f64(std::span<const double> values,
                        std::vector<std::uint64_t> dims) {
    Tensor t;
    t.dtype = DType::f64;
    t.dims = std::move(dims);
    t.payload.reserve(values.size() * 8);
    for (double v : values) append_le(t.payload, std::bit_cast<std::uint64_t>(v), 8);
    return t;
}

Tensor Tensor::from_f32(std::span<const float> values,
                        std::vector<std::uint64_t> dims) {
    Tensor t;
    t.dtype = DType::f32;
    t.dims = std::move(dims);
    t.payload.reserve(values.size() * 4);
    for (float v : values) append_le(t.payload, std::bit_cast<std::uint32_t>(v), 4);
    return t;
}

Tensor Tensor::from_i32(std::span<const std::int32_t> values,
                        std::vector<std::uint64_t> dims) {
    Tensor t;
    t.dtype = DType::i32;
    t.dims = std::move(dims);
    t.payload.reserve(values.size() * 4);
    for (std::int32_t v : values) {
        append_le(t.payload, static_cast<std::uint32_t>(v), 4);
    }
    return t;
}

std::vector<double> Tensor::as_f64() const {
    if (dtype != DType::f64) throw std::runtime_error("tensor is not f64");
    std::vector<double> out(element_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(payload[i * 8 + b]) << (8 * b);
        }
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

std::vector<std::int32_t> Tensor::as_i32() const {
    if (dtype != DType::i32) throw std::runtime_error("tensor is not i32");
    std::vector<std::int32_t> out(element_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(payload[i * 4 + b]) << (8 * b);
        }
        out[i] = static_cast<std::int32_t>(bits);
    }
    return out;
}

void write_tensor(std::ostream& os, const Tensor& t) {
    if (t.payload.size() != t.element_count() * dtype_size(t.dtype)) {
        throw std::runtime_error("tensor payload size does not match dims");
    }
    std::vector<std::uint8_t> header;
    header.insert(header.end(), kMagic, kMagic + 4);
    header.push_back(static_cast<std::uint8_t>(t.dtype));
    header.push_back(static_cast<std::uint8_t>(t.dims.size()));
    put_u16(header, 0);
    for (auto d : t.dims) put_u64(header, d);
    os.write(reinterpret_cast<const char*>(header.data()),
             static_cast<std::streamsize>(header.size()));
    os.write(reinterpret_cast<const char*>(t.payload.data()),
             static_cast<std::streamsize>(t.payload.size()));
    if (!os) throw std::runtime_error("tensor write failed");
}

Tensor read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("bad tensor magic");
    }
    Tensor t;
    const auto code = read_le(is, 1);
    if (code < 1 || code > 3) throw std::runtime_error("unknown dtype code");
    t.dtype = static_cast<DType>(code);
    const auto rank = read_le(is, 1);
    read_le(is, 2);  // padding
    t.dims.resize(rank);
    for (auto& d : t.dims) d = read_le(is, 8);
    const std::uint64_t bytes = t.element_count() * dtype_size(t.dtype);
    t.payload.resize(bytes);
    is.read(reinterpret_cast<char*>(t.payload.data()),
            static_cast<std::streamsize>(bytes));
    if (is.gcount() != static_cast<std::streamsize>(bytes)) {
        throw std::runtime_error("tensor record truncated");
    }
    return t;
}

}  // namespace cwt
