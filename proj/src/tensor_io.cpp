// SPDX-License-Identifier: Apache-2.0
#include "lmaudit/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "lmaudit/errors.hpp"
#include "lmaudit/half.hpp"

namespace lmaudit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(ErrorKind kind, const std::string& message) {
    throw Error(Stage::tensor_io, kind, message);
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16_le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

float decode_one(DType dtype, const unsigned char* p) {
    switch (dtype) {
    case DType::F32: return std::bit_cast<float>(read_u32_le(p));
    case DType::F16: return f16_to_f32(read_u16_le(p));
    case DType::BF16: return bf16_to_f32(read_u16_le(p));
    }
    return 0.0f;
}

std::uint64_t file_size_or_throw(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        fail(ErrorKind::unreadable, fmt::format("cannot stat '{}': {}", path.string(), ec.message()));
    }
    return size;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::unreadable, fmt::format("cannot open '{}'", path.string()));
    }
    return in;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const std::string& what) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
        fail(ErrorKind::malformed_header, fmt::format("{}: size overflows 64 bits", what));
    }
    return a * b;
}

std::uint64_t as_u64(const json& value, const std::string& what) {
    if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
        fail(ErrorKind::malformed_header, fmt::format("{} must be a non-negative integer", what));
    }
    return value.get<std::uint64_t>();
}

TensorEntry parse_entry(const std::string& name, const json& value) {
    if (!value.is_object()) {
        fail(ErrorKind::malformed_header, fmt::format("entry '{}' is not an object", name));
    }
    TensorEntry entry;
    entry.name = name;

    const auto dtype = value.find("dtype");
    const auto shape = value.find("shape");
    const auto offsets = value.find("data_offsets");
    if (dtype == value.end() || !dtype->is_string()) {
        fail(ErrorKind::malformed_header, fmt::format("entry '{}' lacks a string dtype", name));
    }
    if (shape == value.end() || !shape->is_array()) {
        fail(ErrorKind::malformed_header, fmt::format("entry '{}' lacks a shape array", name));
    }
    if (offsets == value.end() || !offsets->is_array() || offsets->size() != 2) {
        fail(ErrorKind::malformed_header, fmt::format("entry '{}' lacks [begin, end] data_offsets", name));
    }

    entry.dtype_name = dtype->get<std::string>();
    entry.dtype = parse_dtype(entry.dtype_name);
    for (const auto& dim : *shape) {
        entry.shape.push_back(as_u64(dim, fmt::format("shape of '{}'", name)));
    }
    entry.begin = as_u64((*offsets)[0], fmt::format("data_offsets of '{}'", name));
    entry.end = as_u64((*offsets)[1], fmt::format("data_offsets of '{}'", name));
    if (entry.end < entry.begin) {
        fail(ErrorKind::bad_range, fmt::format("entry '{}' has end < begin", name));
    }

    std::uint64_t count = 1;
    for (auto dim : entry.shape) {
        count = checked_mul(count, dim, name);
    }
    if (entry.dtype) {
        const auto expected = checked_mul(count, dtype_width(*entry.dtype), name);
        if (entry.end - entry.begin != expected) {
            fail(ErrorKind::bad_range,
                 fmt::format("entry '{}' spans {} bytes but {} elements of {} need {}", name,
                             entry.end - entry.begin, count, entry.dtype_name, expected));
        }
    }
    return entry;
}

void check_finite(std::span<const float> values, std::size_t offset, const std::string& name) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorKind::non_finite,
                 fmt::format("tensor '{}' holds a non-finite value at element {}", name, offset + i));
        }
    }
}

// Streams `count` elements starting at absolute `offset` and widens them to binary32.
std::vector<float> read_converted(std::ifstream& in, std::uint64_t offset, std::size_t count, DType dtype,
                                  const std::string& name) {
    constexpr std::size_t kChunkElements = std::size_t{1} << 20;
    const std::size_t width = dtype_width(dtype);

    std::vector<float> out(count);
    std::vector<unsigned char> buffer(std::min(count, kChunkElements) * width);
    in.seekg(static_cast<std::streamoff>(offset));
    for (std::size_t done = 0; done < count;) {
        const std::size_t n = std::min(kChunkElements, count - done);
        in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(n * width));
        if (static_cast<std::size_t>(in.gcount()) != n * width) {
            fail(ErrorKind::length_mismatch, fmt::format("short read in tensor '{}'", name));
        }
        for (std::size_t i = 0; i < n; ++i) {
            out[done + i] = decode_one(dtype, buffer.data() + i * width);
        }
        check_finite(std::span<const float>(out).subspan(done, n), done, name);
        done += n;
    }
    return out;
}

} // namespace

std::string_view to_string(DType dtype) {
    switch (dtype) {
    case DType::F32: return "F32";
    case DType::F16: return "F16";
    case DType::BF16: return "BF16";
    }
    return "?";
}

std::optional<DType> parse_dtype(std::string_view name) {
    if (name == "F32") return DType::F32;
    if (name == "F16") return DType::F16;
    if (name == "BF16") return DType::BF16;
    return std::nullopt;
}

std::size_t dtype_width(DType dtype) {
    return dtype == DType::F32 ? 4 : 2;
}

std::uint64_t TensorEntry::element_count() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

const TensorEntry* CheckpointIndex::find(std::string_view name) const {
    auto it = std::lower_bound(tensors.begin(), tensors.end(), name,
                               [](const TensorEntry& e, std::string_view n) { return e.name < n; });
    return it != tensors.end() && it->name == name ? &*it : nullptr;
}

WeightMatrix make_weight_matrix(std::size_t rows, std::size_t cols, std::vector<float> data, std::string label) {
    if (rows == 0 || cols == 0) {
        fail(ErrorKind::shape, fmt::format("matrix must be non-empty, got {}x{}", rows, cols));
    }
    if (rows * cols != data.size()) {
        fail(ErrorKind::length_mismatch,
             fmt::format("{}x{} matrix needs {} values, got {}", rows, cols, rows * cols, data.size()));
    }
    check_finite(data, 0, label.empty() ? "<memory>" : label);
    WeightMatrix w;
    w.rows = rows;
    w.cols = cols;
    w.data = std::move(data);
    w.source_tensor_name = "<memory>";
    w.model_label = std::move(label);
    return w;
}

CheckpointIndex parse_checkpoint(const std::filesystem::path& path) {
    const auto size = file_size_or_throw(path);
    auto in = open_or_throw(path);
    if (size < 8) {
        fail(ErrorKind::truncated_header, fmt::format("'{}' is {} bytes, shorter than the 8-byte prefix",
                                                      path.string(), size));
    }

    std::array<unsigned char, 8> prefix{};
    in.read(reinterpret_cast<char*>(prefix.data()), 8);
    if (in.gcount() != 8) {
        fail(ErrorKind::truncated_header, fmt::format("cannot read header length of '{}'", path.string()));
    }
    const auto header_len = read_u64_le(prefix.data());
    if (header_len > size - 8) {
        fail(ErrorKind::header_overrun, fmt::format("header length {} exceeds the {} bytes after the prefix",
                                                    header_len, size - 8));
    }

    std::string header(static_cast<std::size_t>(header_len), '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::uint64_t>(in.gcount()) != header_len) {
        fail(ErrorKind::truncated_header, fmt::format("short read of {}-byte header", header_len));
    }

    json doc;
    try {
        doc = json::parse(header);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::malformed_header, fmt::format("header is not valid JSON: {}", e.what()));
    }
    if (!doc.is_object()) {
        fail(ErrorKind::malformed_header, "header JSON is not an object");
    }

    CheckpointIndex index;
    index.data_start = 8 + header_len;
    index.data_size = size - index.data_start;
    for (const auto& [name, value] : doc.items()) {
        if (name == "__metadata__") {
            continue;
        }
        auto entry = parse_entry(name, value);
        if (entry.end > index.data_size) {
            fail(ErrorKind::bad_range, fmt::format("entry '{}' ends at {} past the {}-byte data region", name,
                                                   entry.end, index.data_size));
        }
        index.tensors.push_back(std::move(entry));
    }

    std::vector<const TensorEntry*> by_offset;
    for (const auto& e : index.tensors) {
        if (e.end > e.begin) by_offset.push_back(&e);
    }
    std::sort(by_offset.begin(), by_offset.end(),
              [](const TensorEntry* a, const TensorEntry* b) { return a->begin < b->begin; });
    for (std::size_t i = 1; i < by_offset.size(); ++i) {
        if (by_offset[i]->begin < by_offset[i - 1]->end) {
            fail(ErrorKind::overlapping_ranges,
                 fmt::format("'{}' [{}, {}) overlaps '{}' [{}, {})", by_offset[i - 1]->name,
                             by_offset[i - 1]->begin, by_offset[i - 1]->end, by_offset[i]->name,
                             by_offset[i]->begin, by_offset[i]->end));
        }
    }
    // json objects iterate in key order already; keep the guarantee explicit for find()
    std::sort(index.tensors.begin(), index.tensors.end(),
              [](const TensorEntry& a, const TensorEntry& b) { return a.name < b.name; });
    return index;
}

WeightMatrix load_lm_head(const CheckpointIndex& index, const std::filesystem::path& path,
                          const std::optional<std::string>& name_override) {
    const TensorEntry* entry = nullptr;
    if (name_override) {
        entry = index.find(*name_override);
        if (!entry) {
            fail(ErrorKind::no_candidate_tensor, fmt::format("tensor '{}' not found", *name_override));
        }
    } else {
        for (auto name : kLmHeadCandidates) {
            if ((entry = index.find(name))) break;
        }
        if (!entry) {
            fail(ErrorKind::no_candidate_tensor,
                 "none of lm_head.weight, output.weight, model.embed_tokens.weight is present");
        }
    }

    if (entry->shape.size() != 2) {
        fail(ErrorKind::not_2d, fmt::format("tensor '{}' has {} dimensions, expected 2", entry->name,
                                            entry->shape.size()));
    }
    if (!entry->dtype) {
        fail(ErrorKind::unsupported_dtype,
             fmt::format("tensor '{}' has unsupported dtype {}", entry->name, entry->dtype_name));
    }
    const auto rows = static_cast<std::size_t>(entry->shape[0]);
    const auto cols = static_cast<std::size_t>(entry->shape[1]);
    if (rows == 0 || cols == 0) {
        fail(ErrorKind::shape, fmt::format("tensor '{}' has an empty dimension", entry->name));
    }

    auto in = open_or_throw(path);
    WeightMatrix w;
    w.rows = rows;
    w.cols = cols;
    w.data = read_converted(in, index.data_start + entry->begin, rows * cols, *entry->dtype, entry->name);
    w.source_tensor_name = entry->name;
    w.source_dtype = *entry->dtype;
    w.model_label = path.stem().string();
    return w;
}

WeightMatrix load_raw(const std::filesystem::path& matrix_path, const std::filesystem::path& sidecar_path) {
    json sidecar;
    {
        std::ifstream in(sidecar_path);
        if (!in) {
            fail(ErrorKind::unreadable, fmt::format("cannot open sidecar '{}'", sidecar_path.string()));
        }
        try {
            sidecar = json::parse(in);
        } catch (const json::parse_error& e) {
            fail(ErrorKind::unreadable, fmt::format("sidecar is not valid JSON: {}", e.what()));
        }
    }
    if (!sidecar.is_object() || !sidecar.contains("rows") || !sidecar.contains("cols") ||
        !sidecar.contains("dtype") || !sidecar["dtype"].is_string()) {
        fail(ErrorKind::unreadable, "sidecar must be an object with rows, cols and dtype");
    }
    const auto rows = as_u64(sidecar["rows"], "sidecar rows");
    const auto cols = as_u64(sidecar["cols"], "sidecar cols");
    const auto dtype_name = sidecar["dtype"].get<std::string>();
    const auto dtype = parse_dtype(dtype_name);
    if (!dtype) {
        fail(ErrorKind::unsupported_dtype, fmt::format("sidecar dtype {} is not supported", dtype_name));
    }
    if (rows == 0 || cols == 0) {
        fail(ErrorKind::shape, "sidecar declares an empty matrix");
    }

    const auto expected = checked_mul(checked_mul(rows, cols, "sidecar"), dtype_width(*dtype), "sidecar");
    const auto actual = file_size_or_throw(matrix_path);
    if (actual != expected) {
        fail(ErrorKind::length_mismatch, fmt::format("'{}' is {} bytes; {}x{} {} needs {}", matrix_path.string(),
                                                     actual, rows, cols, dtype_name, expected));
    }

    auto in = open_or_throw(matrix_path);
    WeightMatrix w;
    w.rows = static_cast<std::size_t>(rows);
    w.cols = static_cast<std::size_t>(cols);
    w.data = read_converted(in, 0, w.rows * w.cols, *dtype, matrix_path.filename().string());
    w.source_tensor_name = matrix_path.filename().string();
    w.source_dtype = *dtype;
    w.model_label = matrix_path.stem().string();
    return w;
}

} // namespace lmaudit
