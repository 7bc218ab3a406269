// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lmaudit {

enum class DType { F32, F16, BF16 };

std::string_view to_string(DType dtype);
std::optional<DType> parse_dtype(std::string_view name);
std::size_t dtype_width(DType dtype);

/// The V x d output projection, rows indexed by token ID, stored row-major in binary32.
///
/// Built only by the loaders below (or by tests), which guarantee
/// rows * cols == data.size() and that every value is finite. Once built it
/// is treated as immutable and can be shared across threads.
struct WeightMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;
    std::string source_tensor_name;
    DType source_dtype = DType::F32;
    std::string model_label;

    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// Builds a WeightMatrix from in-memory values, applying the same validation as the loaders.
WeightMatrix make_weight_matrix(std::size_t rows, std::size_t cols, std::vector<float> data,
                                std::string label = {});

struct TensorEntry {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::string dtype_name;
    std::optional<DType> dtype; // empty for dtypes this tool does not load
    std::uint64_t begin = 0;    // relative to the start of the data region
    std::uint64_t end = 0;

    std::uint64_t element_count() const;
};

/// Header-only view of a checkpoint container; no tensor payload is read.
struct CheckpointIndex {
    std::vector<TensorEntry> tensors; // header order is not preserved; sorted by name
    std::uint64_t data_start = 0;     // absolute file offset of the data region
    std::uint64_t data_size = 0;

    const TensorEntry* find(std::string_view name) const;
};

/// Tensor names tried, in order, when no explicit name is given.
inline constexpr std::string_view kLmHeadCandidates[] = {
    "lm_head.weight",
    "output.weight",
    "model.embed_tokens.weight",
};

CheckpointIndex parse_checkpoint(const std::filesystem::path& path);

WeightMatrix load_lm_head(const CheckpointIndex& index, const std::filesystem::path& path,
                          const std::optional<std::string>& name_override = std::nullopt);

WeightMatrix load_raw(const std::filesystem::path& matrix_path,
                      const std::filesystem::path& sidecar_path);

} // namespace lmaudit
