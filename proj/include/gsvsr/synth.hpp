#pragma once

// Synthetic frames, flows and fields for self-contained tests and benchmarks.

#include "gsvsr/core.hpp"

#include <cstdint>
#include <random>

namespace gsvsr {

/// Isotropic blob color * exp(-|p - center|^2 / (2 radius^2)) on black,
/// sampled at pixel centers.
FrameBuffer gaussian_blob(int width, int height, Vec2 center, double radius, Rgb color);

struct TextureOptions {
    double min_period = 3.0;
    double max_period = 8.0;
    int waves = 6;
    /// Per-channel standard deviation before clipping is about 0.4 * contrast.
    double contrast = 0.3;
};

/// Band-limited sum of random sinusoids around mid-gray, clipped to [0, 1] and
/// shifted by `shift` (content at p in the result is the unshifted content at
/// p - shift).
FrameBuffer smooth_texture(int width, int height, Vec2 shift, std::uint64_t seed, const TextureOptions& opt = {});

FlowField uniform_flow(int width, int height, Vec2 v);
/// v(p) = (factor - 1) * (p - center) at pixel centers.
FlowField zoom_flow(int width, int height, Vec2 center, double factor);

struct RandomFieldRanges {
    double offset_min = 0.0, offset_max = 1.0;
    double sigma_min = 0.4, sigma_max = 1.5;
    double rho_max = 0.7;
    double color_min = 0.0, color_max = 1.0;
};

GaussianField random_field(int lr_width, int lr_height, Density d, std::mt19937_64& rng,
                           const RandomFieldRanges& ranges = {});

} // namespace gsvsr
