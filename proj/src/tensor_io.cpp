#include "primivox/tensor_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace primivox {

namespace {

constexpr char kMagic[4] = {'P', 'V', 'X', 'T'};
constexpr int kMaxRank = 4;

size_t dtype_size(TensorDtype dtype) {
  switch (dtype) {
    case TensorDtype::kFloat32: return 4;
    case TensorDtype::kUint16: return 2;
    case TensorDtype::kUint8: return 1;
  }
  throw Error(ErrorCode::kFormat, "unknown tensor dtype");
}

void check_payload(const Tensor& t) {
  const size_t n = t.element_count();
  size_t have = 0;
  switch (t.dtype) {
    case TensorDtype::kFloat32: have = t.f32.size(); break;
    case TensorDtype::kUint16: have = t.u16.size(); break;
    case TensorDtype::kUint8: have = t.u8.size(); break;
  }
  if (t.dims.empty() || t.dims.size() > kMaxRank) {
    throw Error(ErrorCode::kFormat, "tensor rank must be 1..4");
  }
  for (uint32_t d : t.dims) {
    if (d == 0) throw Error(ErrorCode::kFormat, "tensor dims must be nonzero");
  }
  if (have != n) {
    throw Error(ErrorCode::kDimension, "tensor payload size mismatch");
  }
}

// All supported platforms here are little-endian; keep the check explicit so
// a port to a big-endian target fails loudly instead of corrupting files.
void require_little_endian() {
  const uint16_t probe = 1;
  uint8_t first;
  std::memcpy(&first, &probe, 1);
  if (first != 1) {
    throw Error(ErrorCode::kFormat, "tensor io requires a little-endian host");
  }
}

}  // namespace

void save_tensor(const std::string& path, const Tensor& tensor) {
  require_little_endian();
  check_payload(tensor);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::kIo, "cannot open for writing: " + tmp);
    }
    out.write(kMagic, 4);
    const uint8_t dtype = static_cast<uint8_t>(tensor.dtype);
    const uint8_t rank = static_cast<uint8_t>(tensor.dims.size());
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&rank), 1);
    out.write(reinterpret_cast<const char*>(tensor.dims.data()),
              static_cast<std::streamsize>(tensor.dims.size() * 4));
    switch (tensor.dtype) {
      case TensorDtype::kFloat32:
        out.write(reinterpret_cast<const char*>(tensor.f32.data()),
                  static_cast<std::streamsize>(tensor.f32.size() * 4));
        break;
      case TensorDtype::kUint16:
        out.write(reinterpret_cast<const char*>(tensor.u16.data()),
                  static_cast<std::streamsize>(tensor.u16.size() * 2));
        break;
      case TensorDtype::kUint8:
        out.write(reinterpret_cast<const char*>(tensor.u8.data()),
                  static_cast<std::streamsize>(tensor.u8.size()));
        break;
    }
    if (!out) {
      throw Error(ErrorCode::kIo, "short write: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot rename " + tmp + " to " + path);
  }
}

Tensor load_tensor(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open tensor file: " + path);
  }
  char magic[4];
  uint8_t dtype_raw = 0, rank = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&dtype_raw), 1);
  in.read(reinterpret_cast<char*>(&rank), 1);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormat, "bad tensor magic in " + path);
  }
  if (dtype_raw > 2) {
    throw Error(ErrorCode::kFormat, "bad tensor dtype in " + path);
  }
  if (rank < 1 || rank > kMaxRank) {
    throw Error(ErrorCode::kFormat, "bad tensor rank in " + path);
  }
  Tensor t;
  t.dtype = static_cast<TensorDtype>(dtype_raw);
  t.dims.resize(rank);
  in.read(reinterpret_cast<char*>(t.dims.data()), rank * 4);
  if (!in) {
    throw Error(ErrorCode::kFormat, "truncated tensor header in " + path);
  }
  size_t n = 1;
  for (uint32_t d : t.dims) {
    if (d == 0) {
      throw Error(ErrorCode::kFormat, "zero tensor dim in " + path);
    }
    n *= d;
  }
  const size_t bytes = n * dtype_size(t.dtype);
  std::vector<char> payload(bytes);
  in.read(payload.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<size_t>(in.gcount()) != bytes) {
    throw Error(ErrorCode::kFormat, "truncated tensor payload in " + path);
  }
  // A well-formed file ends exactly at the payload.
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw Error(ErrorCode::kFormat, "trailing bytes in " + path);
  }
  switch (t.dtype) {
    case TensorDtype::kFloat32: {
      t.f32.resize(n);
      std::memcpy(t.f32.data(), payload.data(), bytes);
      for (float v : t.f32) {
        if (std::isnan(v)) {
          throw Error(ErrorCode::kFormat, "NaN float payload in " + path);
        }
      }
      break;
    }
    case TensorDtype::kUint16: {
      t.u16.resize(n);
      std::memcpy(t.u16.data(), payload.data(), bytes);
      break;
    }
    case TensorDtype::kUint8: {
      t.u8.resize(n);
      std::memcpy(t.u8.data(), payload.data(), bytes);
      break;
    }
  }
  return t;
}

Tensor tensor_from_f32(std::vector<uint32_t> dims, std::vector<float> values) {
  Tensor t;
  t.dtype = TensorDtype::kFloat32;
  t.dims = std::move(dims);
  t.f32 = std::move(values);
  check_payload(t);
  return t;
}

Tensor tensor_from_u16(std::vector<uint32_t> dims,
                       std::vector<uint16_t> values) {
  Tensor t;
  t.dtype = TensorDtype::kUint16;
  t.dims = std::move(dims);
  t.u16 = std::move(values);
  check_payload(t);
  return t;
}

Tensor tensor_from_u8(std::vector<uint32_t> dims, std::vector<uint8_t> values) {
  Tensor t;
  t.dtype = TensorDtype::kUint8;
  t.dims = std::move(dims);
  t.u8 = std::move(values);
  check_payload(t);
  return t;
}

}  // namespace primivox
