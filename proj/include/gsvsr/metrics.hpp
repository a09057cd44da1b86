#pragma once

// Luma-domain quality metrics and the temporal-stability correlation report.

#include "gsvsr/core.hpp"

#include <array>
#include <span>
#include <vector>

namespace gsvsr {

/// BT.601 full-range weights.
inline constexpr std::array<double, 3> kLumaWeights{0.299, 0.587, 0.114};

inline double luma(const Rgb& p)
{
    return kLumaWeights[0] * p[0] + kLumaWeights[1] * p[1] + kLumaWeights[2] * p[2];
}

FeatureMap to_luma(const FrameBuffer& frame);

/// 10 log10(1 / MSE) over luma, peak 1. Identical inputs give +infinity.
double psnr_y(const FrameBuffer& a, const FrameBuffer& b);

/// Mean SSIM over luma: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, range 1, averaged over window positions fully inside the image.
double ssim_y(const FrameBuffer& a, const FrameBuffer& b);

/// Sample Pearson correlation. Throws NumericalError if either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);
/// Throws NumericalError if either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

struct StabilityReport {
    std::vector<int> gaps;
    std::vector<double> pixel_pearson;
    std::vector<double> pixel_cosine;
    std::vector<double> cov_pearson;
    std::vector<double> cov_cosine;
};

/// Correlates frame 0 (luma) and field 0 (flattened sigma_x, sigma_y, rho per
/// kernel) against every later index. Gap 0 is exactly 1 by definition.
StabilityReport stability_report(std::span<const FrameBuffer> frames, std::span<const GaussianField> fields);

} // namespace gsvsr
