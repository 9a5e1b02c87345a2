// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/named_array.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "gsr/errors.hpp"

namespace gsr {

namespace {

constexpr std::array<char, 8> kMagic = {'G', 'S', 'R', 'N', 'A', '\0', '\0', '\1'};

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError(path.string() + ": truncated named-array container");
  }
  return value;
}

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat64: return 8;
    case DType::kFloat32: return 4;
    case DType::kInt64: return 8;
  }
  throw IoError("unknown dtype");
}

}  // namespace

void write_named_arrays(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    if (shape_numel(a.shape) != a.values.size()) {
      throw ShapeError("array '" + a.name + "' shape " + shape_string(a.shape) + " does not match payload");
    }
    put<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(a.dtype));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t extent : a.shape) put<std::uint64_t>(os, extent);
    put<std::uint64_t>(os, a.values.size() * dtype_size(a.dtype));
    for (double v : a.values) {
      switch (a.dtype) {
        case DType::kFloat64: put<double>(os, v); break;
        case DType::kFloat32: put<float>(os, static_cast<float>(v)); break;
        case DType::kInt64: put<std::int64_t>(os, static_cast<std::int64_t>(v)); break;
      }
    }
  }
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<NamedArray> read_named_arrays(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError(path.string() + ": not a named-array container");
  }
  const auto count = get<std::uint32_t>(is, path);
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    const auto name_len = get<std::uint32_t>(is, path);
    a.name.resize(name_len);
    if (!is.read(a.name.data(), name_len)) throw IoError(path.string() + ": truncated array name");
    const auto dtype = get<std::uint8_t>(is, path);
    if (dtype > 2) throw IoError(path.string() + ": array '" + a.name + "' has unknown dtype " + std::to_string(dtype));
    a.dtype = static_cast<DType>(dtype);
    const auto ndim = get<std::uint32_t>(is, path);
    for (std::uint32_t i = 0; i < ndim; ++i) a.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(is, path)));
    const auto payload = get<std::uint64_t>(is, path);
    const std::size_t n = shape_numel(a.shape);
    if (payload != n * dtype_size(a.dtype)) {
      throw IoError(path.string() + ": array '" + a.name + "' payload size does not match its shape");
    }
    a.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      switch (a.dtype) {
        case DType::kFloat64: a.values[i] = get<double>(is, path); break;
        case DType::kFloat32: a.values[i] = get<float>(is, path); break;
        case DType::kInt64: a.values[i] = static_cast<double>(get<std::int64_t>(is, path)); break;
      }
    }
    arrays.push_back(std::move(a));
  }
  return arrays;
}

std::optional<NamedArray> find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  auto it = std::find_if(arrays.begin(), arrays.end(), [&](const NamedArray& a) { return a.name == name; });
  if (it == arrays.end()) return std::nullopt;
  return *it;
}

}  // namespace gsr
