// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <bit>
#include <functional>
#include <cmath>
#include <limits>

#include "lmaudit/errors.hpp"
#include "lmaudit/half.hpp"
#include "lmaudit/tensor_io.hpp"
#include "test_support.hpp"

using namespace lmaudit;
using lmaudit::testing::data;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        EXPECT_EQ(e.stage(), Stage::tensor_io);
        return e.kind();
    }
    ADD_FAILURE() << "expected an lmaudit::Error";
    return ErrorKind::unreadable;
}

WeightMatrix load(const std::string& name, std::optional<std::string> tensor = std::nullopt) {
    const auto path = data(name);
    return load_lm_head(parse_checkpoint(path), path, tensor);
}

// Reference decoder for binary16 built from the value formula rather than bit surgery.
double half_value(std::uint16_t bits) {
    const int sign = (bits >> 15) ? -1 : 1;
    const int exponent = (bits >> 10) & 0x1F;
    const int mantissa = bits & 0x3FF;
    if (exponent == 0) return sign * std::ldexp(mantissa, -24);
    if (exponent == 31) return mantissa ? std::numeric_limits<double>::quiet_NaN() : sign * INFINITY;
    return sign * std::ldexp(1024 + mantissa, exponent - 25);
}

} // namespace

TEST(Half, EveryBinary16PatternWidensExactly) {
    for (std::uint32_t bits = 0; bits <= 0xFFFF; ++bits) {
        const float got = f16_to_f32(static_cast<std::uint16_t>(bits));
        const double want = half_value(static_cast<std::uint16_t>(bits));
        if (std::isnan(want)) {
            ASSERT_TRUE(std::isnan(got)) << bits;
        } else {
            ASSERT_EQ(static_cast<double>(got), want) << bits;
            ASSERT_EQ(std::signbit(got), (bits & 0x8000) != 0) << bits;
        }
    }
}

TEST(Half, Bfloat16IsTheUpperHalfOfBinary32) {
    EXPECT_EQ(bf16_to_f32(0x3F80), 1.0f);
    EXPECT_EQ(bf16_to_f32(0xC000), -2.0f);
    for (std::uint32_t bits = 0; bits <= 0xFFFF; bits += 7) {
        const float f = bf16_to_f32(static_cast<std::uint16_t>(bits));
        EXPECT_EQ(std::bit_cast<std::uint32_t>(f), bits << 16);
    }
}

TEST(ParseCheckpoint, IndexesSingleF32Tensor) {
    const auto index = parse_checkpoint(data("f32_lm_head.safetensors"));
    ASSERT_EQ(index.tensors.size(), 1u); // __metadata__ skipped
    const auto& t = index.tensors[0];
    EXPECT_EQ(t.name, "lm_head.weight");
    EXPECT_EQ(t.shape, (std::vector<std::uint64_t>{2, 2}));
    EXPECT_EQ(t.dtype, DType::F32);
    EXPECT_EQ(t.end - t.begin, 16u);
}

TEST(ParseCheckpoint, IndexesUnsupportedDtypesWithoutFailing) {
    const auto index = parse_checkpoint(data("int8.safetensors"));
    ASSERT_EQ(index.tensors.size(), 1u);
    EXPECT_FALSE(index.tensors[0].dtype.has_value());
    EXPECT_EQ(index.tensors[0].dtype_name, "I8");
}

TEST(ParseCheckpoint, RejectsCorruptContainers) {
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("empty.safetensors")); }), ErrorKind::truncated_header);
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("short.safetensors")); }), ErrorKind::truncated_header);
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("header_overrun.safetensors")); }), ErrorKind::header_overrun);
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("malformed_json.safetensors")); }), ErrorKind::malformed_header);
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("not_object.safetensors")); }), ErrorKind::malformed_header);
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("overlap.safetensors")); }), ErrorKind::overlapping_ranges);
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("wrong_length.safetensors")); }), ErrorKind::bad_range);
    EXPECT_EQ(kind_of([] { parse_checkpoint(data("does_not_exist.safetensors")); }), ErrorKind::unreadable);
}

TEST(LoadLmHead, ConvertsEachDtype) {
    const auto f32 = load("f32_lm_head.safetensors");
    EXPECT_EQ(f32.data, (std::vector<float>{1, 2, 3, 4}));
    EXPECT_EQ(f32.source_dtype, DType::F32);
    EXPECT_EQ(f32.model_label, "f32_lm_head");

    const auto f16 = load("f16_lm_head.safetensors");
    EXPECT_EQ(f16.rows, 3u);
    EXPECT_EQ(f16.data, (std::vector<float>{1.0f, -2.0f, 0.5f, 65504.0f, std::ldexp(1.0f, -24), -0.0f}));
    EXPECT_TRUE(std::signbit(f16.data[5]));

    const auto bf16 = load("bf16_lm_head.safetensors");
    EXPECT_EQ(bf16.data, (std::vector<float>(4, 1.0f)));
    EXPECT_EQ(bf16.source_dtype, DType::BF16);
}

TEST(LoadLmHead, FollowsResolutionOrder) {
    const auto tied = load("tied_embed.safetensors");
    EXPECT_EQ(tied.source_tensor_name, "model.embed_tokens.weight");
    EXPECT_EQ(tied.rows, 4u);
    EXPECT_EQ(tied.cols, 2u);
    EXPECT_EQ(tied(3, 1), 2.0f);

    const auto output = load("output_weight.safetensors");
    EXPECT_EQ(output.source_tensor_name, "output.weight");
    EXPECT_EQ(output(2, 1), 6.0f);

    const auto overridden = load("output_weight.safetensors", "model.embed_tokens.weight");
    EXPECT_EQ(overridden(0, 0), 9.0f);
}

TEST(LoadLmHead, RejectsUnusableTensors) {
    EXPECT_EQ(kind_of([] { load("nan_payload.safetensors"); }), ErrorKind::non_finite);
    EXPECT_EQ(kind_of([] { load("one_d.safetensors"); }), ErrorKind::not_2d);
    EXPECT_EQ(kind_of([] { load("int8.safetensors"); }), ErrorKind::unsupported_dtype);
    EXPECT_EQ(kind_of([] { load("no_candidate.safetensors"); }), ErrorKind::no_candidate_tensor);
    EXPECT_EQ(kind_of([] { load("f32_lm_head.safetensors", "missing.weight"); }), ErrorKind::no_candidate_tensor);
}

TEST(LoadRaw, ReadsSidecarDescribedMatrices) {
    const auto identity = load_raw(data("raw_identity.bin"), data("raw_identity.json"));
    EXPECT_EQ(identity.rows, 2u);
    EXPECT_EQ(identity.data, (std::vector<float>{1, 0, 0, 1}));

    const auto ones = load_raw(data("raw_f16_ones.bin"), data("raw_f16_ones.json"));
    EXPECT_EQ(ones.data, (std::vector<float>(4, 1.0f)));
    EXPECT_EQ(ones.source_dtype, DType::F16);

    EXPECT_EQ(kind_of([] { load_raw(data("raw_bad_length.bin"), data("raw_bad_length.json")); }),
              ErrorKind::length_mismatch);
    EXPECT_EQ(kind_of([] { load_raw(data("raw_bad_dtype.bin"), data("raw_bad_dtype.json")); }),
              ErrorKind::unsupported_dtype);
    EXPECT_EQ(kind_of([] { load_raw(data("raw_identity.bin"), data("missing.json")); }), ErrorKind::unreadable);
}

TEST(LoadLmHead, RoundTripsRandomMatricesBitExactly) {
    lmaudit::testing::Rng rng(11);
    const auto dir = std::filesystem::temp_directory_path() / "lmaudit_roundtrip";
    std::filesystem::create_directories(dir);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t rows = 1 + rng.index(40), cols = 1 + rng.index(12);
        auto w = lmaudit::testing::gaussian_matrix(rng, rows, cols);
        const auto path = dir / ("m" + std::to_string(trial) + ".safetensors");
        lmaudit::testing::write_container(path, "lm_head.weight", w);

        const auto a = load_lm_head(parse_checkpoint(path), path);
        const auto b = load_lm_head(parse_checkpoint(path), path);
        ASSERT_EQ(a.rows, rows);
        ASSERT_EQ(a.cols, cols);
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            ASSERT_EQ(std::bit_cast<std::uint32_t>(a.data[i]), std::bit_cast<std::uint32_t>(w.data[i]));
        }
        EXPECT_EQ(a.data, b.data);
        EXPECT_EQ(a.source_tensor_name, b.source_tensor_name);
        EXPECT_EQ(a.model_label, b.model_label);
    }
    std::filesystem::remove_all(dir);
}

TEST(MakeWeightMatrix, ValidatesShapeAndValues) {
    EXPECT_EQ(kind_of([] { make_weight_matrix(0, 2, {}); }), ErrorKind::shape);
    EXPECT_EQ(kind_of([] { make_weight_matrix(2, 2, {1, 2, 3}); }), ErrorKind::length_mismatch);
    EXPECT_EQ(kind_of([] { make_weight_matrix(1, 2, {1, INFINITY}); }), ErrorKind::non_finite);
}
