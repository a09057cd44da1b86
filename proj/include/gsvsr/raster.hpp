#pragma once

// Rasterization of a GaussianField at an arbitrary output scale.
//
// Output pixel (px, py) samples the continuous signal at its center, which in
// LR coordinates is ((px + 0.5) / s, (py + 0.5) / s). The signal is a plain
// (unordered) sum of kernels; there is no opacity or depth ordering.

#include "gsvsr/core.hpp"

#include <vector>

namespace gsvsr {

enum class Normalization {
    PaperDet, ///< 1 / (2 pi |Sigma|)
    SqrtDet,  ///< 1 / (2 pi sqrt|Sigma|), the bivariate normal constant
};

struct RenderConfig {
    double scale = 2.0;
    /// Mahalanobis radius beyond which the tiled path drops a kernel.
    double truncation_radius = 3.0;
    Normalization normalization = Normalization::PaperDet;
    bool clamp_output = true;
    /// Evaluate the normalization prefactor on the LR covariance instead of
    /// the scaled one. Keeps image brightness independent of the output scale.
    bool lr_prefactor = true;
};

/// Throws ValidationError if the config is unusable for fields of density d.
void validate(const RenderConfig& cfg, Density d);

int output_extent(int lr_extent, double scale);

CovParams scale_covariance(const CovParams& p, double s);

/// Kernel evaluation at output-pixel coordinates (x, y) for a kernel centered
/// at `center` (LR coordinates). No truncation.
Rgb eval_kernel(Vec2 center, const CovParams& cov, const Rgb& color, double x, double y,
                const RenderConfig& cfg);
Rgb eval_gaussian(const Gaussian2D& g, Density d, double x, double y, const RenderConfig& cfg);

/// Reference renderer: every kernel contributes to every pixel.
FrameBuffer render_dense(const GaussianField& f, const RenderConfig& cfg);
/// Fast path: 16x16 output tiles, each with the kernels whose truncation
/// ellipse bounding box overlaps it.
FrameBuffer render_tiled(const GaussianField& f, const RenderConfig& cfg);

inline constexpr int kTileSize = 16;

/// Per-kernel quantities in output pixel coordinates, shared by the renderers
/// and the fitting gradients so both use the same truncation predicate.
struct PreparedKernel {
    double cx = 0.0, cy = 0.0;         ///< scaled center
    double ixx = 0.0, ixy = 0.0, iyy = 0.0; ///< inverse of the scaled covariance
    double prefactor = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1; ///< pixel range of the truncation box (clipped)
    Rgb color{};

    double mahalanobis2(double x, double y) const
    {
        const double dx = x - cx;
        const double dy = y - cy;
        return ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
    }
};

PreparedKernel prepare_kernel(Vec2 center, const CovParams& cov, const Rgb& color, const RenderConfig& cfg,
                              int out_width, int out_height);
std::vector<PreparedKernel> prepare_kernels(const GaussianField& f, const RenderConfig& cfg);

/// Upper bound on |render_tiled - render_dense| per channel: the summed
/// peak color mass times exp(-R^2 / 2).
double truncation_error_bound(const GaussianField& f, const RenderConfig& cfg);

} // namespace gsvsr
