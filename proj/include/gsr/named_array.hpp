// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named-array container shared by parameter checkpoints and feature grids.
// Layout (all integers little-endian), see docs/formats.md:
//
//   magic    8 bytes  "GSRNA\0\0\1"
//   count    u32
//   count x { name_len u32, name bytes (UTF-8), dtype u8, ndim u32,
//             dims u64[ndim], payload_bytes u64, payload (row-major) }

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsr/tensor.hpp"

namespace gsr {

enum class DType : std::uint8_t { kFloat64 = 0, kFloat32 = 1, kInt64 = 2 };

struct NamedArray {
  std::string name;
  DType dtype = DType::kFloat64;
  Shape shape;
  std::vector<double> values;  // widened on read; narrowed on write for f32/i64
};

void write_named_arrays(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_named_arrays(const std::filesystem::path& path);

std::optional<NamedArray> find_array(const std::vector<NamedArray>& arrays, const std::string& name);

}  // namespace gsr
