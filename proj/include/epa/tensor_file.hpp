#pragma once

// EPAT tensor files. Layout, all integers little-endian:
//
//   offset 0   magic "EPAT"
//   offset 4   u32 version (= 1)
//   offset 8   u8  dtype (0 = real32, 1 = real64)
//   offset 9   u8  ndim
//   offset 10  u64 dims[ndim]
//   then       payload, row-major, little-endian IEEE-754
//
// Feature dumps and classifier heads use real32. Model bundles store their
// fitted tensors as real64 so a reloaded model scores bit-identically.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "epa/error.hpp"
#include "epa/tensor.hpp"

namespace epa::io {

enum class Dtype : std::uint8_t { Real32 = 0, Real64 = 1 };

inline constexpr std::string_view kTensorMagic = "EPAT";
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::size_t kFixedHeaderBytes = 10;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
  Dtype dtype = Dtype::Real32;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(std::string_view bytes, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    value |= static_cast<U>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return value;
}

inline std::string at(std::string_view source, std::size_t offset) {
  return std::string(source) + " at byte offset " + std::to_string(offset);
}

}  // namespace detail

inline std::string encode_tensor(std::span<const std::uint64_t> dims, std::span<const double> values,
                                 Dtype dtype = Dtype::Real32) {
  if (dims.size() > 255) throw Error(ErrorCode::InvalidArgument, "tensor rank above 255");
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  if (count != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "dims describe " + std::to_string(count) + " values, got " +
                                              std::to_string(values.size()));
  }

  std::string out(kTensorMagic);
  detail::put_le<std::uint32_t>(out, kTensorVersion);
  out.push_back(static_cast<char>(dtype));
  out.push_back(static_cast<char>(dims.size()));
  for (auto d : dims) detail::put_le<std::uint64_t>(out, d);

  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "value " + std::to_string(i) + " is not finite");
    if (dtype == Dtype::Real32) {
      if (std::abs(v) > static_cast<double>(std::numeric_limits<float>::max())) {
        throw Error(ErrorCode::NonFinite, "value " + std::to_string(i) + " overflows real32");
      }
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

/// Parses an EPAT byte string. `source` names the origin in error messages.
inline Tensor decode_tensor(std::string_view bytes, std::string_view source = "tensor") {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedHeader, detail::at(source, bytes.size()) + ": missing magic");
  if (bytes.substr(0, 4) != kTensorMagic) throw Error(ErrorCode::BadMagic, detail::at(source, 0) + ": expected \"EPAT\"");
  if (bytes.size() < kFixedHeaderBytes) {
    throw Error(ErrorCode::TruncatedHeader, detail::at(source, bytes.size()) + ": header needs 10 bytes");
  }
  const auto version = detail::get_le<std::uint32_t>(bytes, 4);
  if (version != kTensorVersion) {
    throw Error(ErrorCode::UnsupportedVersion, detail::at(source, 4) + ": version " + std::to_string(version));
  }
  const auto dtype_code = static_cast<std::uint8_t>(bytes[8]);
  if (dtype_code > 1) {
    throw Error(ErrorCode::UnsupportedDtype, detail::at(source, 8) + ": dtype code " + std::to_string(dtype_code));
  }

  Tensor t;
  t.dtype = static_cast<Dtype>(dtype_code);
  const std::size_t ndim = static_cast<std::uint8_t>(bytes[9]);
  const std::size_t payload_offset = kFixedHeaderBytes + 8 * ndim;
  if (bytes.size() < payload_offset) {
    throw Error(ErrorCode::TruncatedHeader,
                detail::at(source, bytes.size()) + ": header declares " + std::to_string(ndim) + " dims");
  }
  std::uint64_t count = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    const auto dim = detail::get_le<std::uint64_t>(bytes, kFixedHeaderBytes + 8 * d);
    if (dim != 0 && count > std::numeric_limits<std::uint64_t>::max() / dim) {
      throw Error(ErrorCode::TruncatedPayload, detail::at(source, kFixedHeaderBytes + 8 * d) + ": dims overflow");
    }
    count *= dim;
    t.dims.push_back(dim);
  }

  const std::size_t width = t.dtype == Dtype::Real32 ? 4 : 8;
  const std::size_t available = (bytes.size() - payload_offset) / width;
  if (count > available || bytes.size() - payload_offset != count * width) {
    const bool truncated = count > available || (bytes.size() - payload_offset) < count * width;
    throw Error(truncated ? ErrorCode::TruncatedPayload : ErrorCode::ShapeMismatch,
                detail::at(source, bytes.size()) + ": payload holds " +
                    std::to_string(bytes.size() - payload_offset) + " bytes, header declares " +
                    std::to_string(count) + " values of " + std::to_string(width) + " bytes starting at offset " +
                    std::to_string(payload_offset));
  }

  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t offset = payload_offset + i * width;
    const double v = t.dtype == Dtype::Real32
                         ? static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, offset)))
                         : std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, offset));
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, detail::at(source, offset) + ": non-finite value");
    t.values[i] = v;
  }
  return t;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path), path.string()); }

inline void write_tensor(const std::filesystem::path& path, const DenseMatrix& m, Dtype dtype = Dtype::Real32) {
  const std::uint64_t dims[] = {m.rows(), m.cols()};
  write_file(path, encode_tensor(dims, m.values(), dtype));
}

inline void write_tensor(const std::filesystem::path& path, const DenseVector& v, Dtype dtype = Dtype::Real32) {
  const std::uint64_t dims[] = {v.size()};
  write_file(path, encode_tensor(dims, v.values(), dtype));
}

inline DenseMatrix to_matrix(Tensor t, std::string_view source = "tensor") {
  if (t.dims.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(source) + ": expected a 2-d tensor, got " + std::to_string(t.dims.size()) + "-d");
  }
  return DenseMatrix(t.dims[0], t.dims[1], std::move(t.values));
}

inline DenseVector to_vector(Tensor t, std::string_view source = "tensor") {
  if (t.dims.size() != 1) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(source) + ": expected a 1-d tensor, got " + std::to_string(t.dims.size()) + "-d");
  }
  return DenseVector(std::move(t.values));
}

inline DenseMatrix read_matrix(const std::filesystem::path& path) { return to_matrix(read_tensor(path), path.string()); }

inline DenseVector read_vector(const std::filesystem::path& path) { return to_vector(read_tensor(path), path.string()); }

}  // namespace epa::io
