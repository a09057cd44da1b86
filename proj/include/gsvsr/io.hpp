#pragma once

// File formats. Binary formats are little-endian with 32-bit float payloads;
// in-memory values that are not float-representable are rounded on save.
//
//   GSF  "GSF1" u32 lr_w, u32 lr_h, u8 density, f32 timestamp, u32 count,
//        count x 8 f32 (dmu_x, dmu_y, sigma_x, sigma_y, rho, r, g, b)
//   FLO  Middlebury: f32 202021.25, i32 w, i32 h, w*h interleaved f32 (u, v)
//   FRM  "FRM1" u32 w, u32 h, w*h*3 f32
//   PPM  binary P6, 8 bit
//   weights / bank: JSON object of named tensors {"shape": [...], "data": [...]}

#include "gsvsr/core.hpp"
#include "gsvsr/cpb.hpp"
#include "gsvsr/motion.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gsvsr {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

Bytes encode_gsf(const GaussianField& f);
GaussianField decode_gsf(std::span<const std::uint8_t> data);
void save_gsf(const GaussianField& f, const std::filesystem::path& path);
GaussianField load_gsf(const std::filesystem::path& path);

Bytes encode_flo(const FlowField& f);
FlowField decode_flo(std::span<const std::uint8_t> data);
void save_flo(const FlowField& f, const std::filesystem::path& path);
FlowField load_flo(const std::filesystem::path& path);

Bytes encode_frm(const FrameBuffer& f);
FrameBuffer decode_frm(std::span<const std::uint8_t> data);
void save_frm(const FrameBuffer& f, const std::filesystem::path& path);
FrameBuffer load_frm(const std::filesystem::path& path);

/// Values are written as round(clamp01(v) * 255).
Bytes encode_ppm(const FrameBuffer& f);
FrameBuffer decode_ppm(std::span<const std::uint8_t> data);
void save_ppm(const FrameBuffer& f, const std::filesystem::path& path);
FrameBuffer load_ppm(const std::filesystem::path& path);

/// Loads FRM or PPM by magic.
FrameBuffer load_frame(const std::filesystem::path& path);

/// Every entry is optional. Tensor names:
///   bank [K, 3]; fuser.weight [K, 7, k, k], fuser.bias [K];
///   fusion_head.weight [1 + C, 2C, k, k], fusion_head.bias [1 + C];
///   decoder.weight [5, C, k, k], decoder.bias [5]; window_logits [gh, gw, K].
struct WeightsFile {
    std::optional<CpbBank> bank;
    std::optional<FuserWeights> fuser;
    std::optional<FusionHeadWeights> fusion_head;
    std::optional<DecoderWeights> decoder;
    std::optional<LogitField> window_logits;
};

std::string encode_weights(const WeightsFile& w);
WeightsFile decode_weights(std::string_view text);
void save_weights(const WeightsFile& w, const std::filesystem::path& path);
WeightsFile load_weights(const std::filesystem::path& path);

/// A weights document holding only "bank".
void save_bank(const CpbBank& bank, const std::filesystem::path& path);
CpbBank load_bank(const std::filesystem::path& path);

} // namespace gsvsr
