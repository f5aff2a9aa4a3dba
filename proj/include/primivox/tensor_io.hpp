// Binary tensor container used for every dense array the tools exchange.
//
// Layout (little-endian throughout):
//   bytes 0..3   magic "PVXT"
//   byte  4      dtype: 0 = float32, 1 = uint16, 2 = uint8
//   byte  5      rank (1..4)
//   next 4*rank  u32 dims
//   payload      row-major elements, prod(dims) of them
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "primivox/error.hpp"

namespace primivox {

enum class TensorDtype : uint8_t {
  kFloat32 = 0,
  kUint16 = 1,
  kUint8 = 2,
};

struct Tensor {
  TensorDtype dtype = TensorDtype::kFloat32;
  std::vector<uint32_t> dims;
  // Exactly one of these is populated, matching dtype.
  std::vector<float> f32;
  std::vector<uint16_t> u16;
  std::vector<uint8_t> u8;

  size_t element_count() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }
};

// Writes atomically: the payload lands in a temp file that is renamed over
// the destination, so readers never observe a partial tensor.
void save_tensor(const std::string& path, const Tensor& tensor);

// Validates magic, dtype, rank, dims, and payload length; float payloads may
// carry infinities (sweep curves use them for unusable scales) but never NaN.
// Failures throw with the offending path in the message.
Tensor load_tensor(const std::string& path);

// Shape-checked convenience constructors.
Tensor tensor_from_f32(std::vector<uint32_t> dims, std::vector<float> values);
Tensor tensor_from_u16(std::vector<uint32_t> dims,
                       std::vector<uint16_t> values);
Tensor tensor_from_u8(std::vector<uint32_t> dims, std::vector<uint8_t> values);

}  // namespace primivox
