#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace cwt {

// A minimal binary tensor record:
//   magic "TNSR" | dtype u8 | rank u8 | pad u16 = 0 | dims u64[rank] | body
// with the body stored little-endian. Checkpoints and binary datasets are
// sequences of these records behind a small manifest header.
enum class DType : std::uint8_t { f64 = 1, f32 = 2, i32 = 3 };

std::size_t dtype_size(DType t);

struct Tensor {
    DType dtype = DType::f64;
    std::vector<std::uint64_t> dims;
    std::vector<std::uint8_t> payload;  // little-endian element bytes

    std::uint64_t element_count() const;

    static Tensor from_f64(std::span<const double> values,
                           std::vector<std::uint64_t> dims);
    static Tensor from_f32(std::span<const float> values,
                           std::vector<std::uint64_t> dims);
    static Tensor from_i32(std::span<const std::int32_t> values,
                           std::vector<std::uint64_t> dims);

    std::vector<double> as_f64() const;        // f64 tensors only
    std::vector<std::int32_t> as_i32() const;  // i32 tensors only
};

void write_tensor(std::ostream& os, const Tensor& t);

// Throws std::runtime_error on bad magic, unknown dtype or truncation.
Tensor read_tensor(std::istream& is);

// Little-endian scalar helpers shared by the container formats.
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);

}  // namespace cwt
