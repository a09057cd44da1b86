#pragma once

// Temporal evolution of kernel positions and colors: flow scaling, backward
// warping, mask/residual fusion, decoding, and the motion-adaptive offset window.

#include "gsvsr/conv.hpp"
#include "gsvsr/core.hpp"

#include <utility>
#include <vector>

namespace gsvsr {

enum class FlowConvention {
    /// m_t0 = t * m10, m_t1 = (1 - t) * m01. Warping is the identity at the
    /// matching endpoint.
    Consistent,
    /// m_t1 = t * m10, m_t0 = (1 - t) * m01, the subscripts as printed.
    PaperLiteral,
};

/// Returns (m_t0, m_t1).
std::pair<FlowField, FlowField> scale_flows(const FlowField& m01, const FlowField& m10, double t,
                                            FlowConvention convention = FlowConvention::Consistent);

/// out(x, y) = bilinear sample of f at (x + dx, y + dy), clamped to the border.
FeatureMap backward_warp(const FeatureMap& f, const FlowField& flow);

/// Averages LR-pixel flow over each grid cell footprint. Values stay in LR pixels.
FlowField pool_flow_to_grid(const FlowField& lr_flow, Density d);

double logistic(double x);

/// Conv over (f0t, f1t) concatenated: channel 0 is the mask logit, 1..C the residual.
struct FusionHeadWeights {
    ConvWeights conv;
    int feature_channels() const noexcept { return conv.out_channels - 1; }
    void validate() const;
    friend bool operator==(const FusionHeadWeights&, const FusionHeadWeights&) = default;
};

/// Maps C feature channels to (dmu_x, dmu_y, r, g, b).
struct DecoderWeights {
    ConvWeights conv;
    void validate() const;
    friend bool operator==(const DecoderWeights&, const DecoderWeights&) = default;
};

struct FusionPrediction {
    FeatureMap mask; ///< one channel, values in [0, 1]
    FeatureMap residual;
};

/// Analytic baseline: mask = 1 - t, residual = 0 (a temporal linear blend).
FusionPrediction predict_fusion(const FeatureMap& f0t, const FeatureMap& f1t, double t);
FusionPrediction predict_fusion(const FeatureMap& f0t, const FeatureMap& f1t, double t, const FusionHeadWeights& w);

/// mask * f0t + (1 - mask) * f1t + residual, the mask broadcast over channels.
FeatureMap fuse_features(const FeatureMap& f0t, const FeatureMap& f1t, const FeatureMap& mask,
                         const FeatureMap& residual);

struct DecodedKernels {
    int grid_w = 0;
    int grid_h = 0;
    std::vector<Vec2> offsets; ///< in [0, 1]
    std::vector<Rgb> colors;   ///< in [0, 1]
};

/// Passthrough: channels (dmu_x, dmu_y, r, g, b) read verbatim, clamped to [0, 1].
DecodedKernels decode_gaussians(const FeatureMap& f);
/// Learned head: conv, then logistic on every output channel.
DecodedKernels decode_gaussians(const FeatureMap& f, const DecoderWeights& w);

struct WindowSet {
    std::vector<double> sizes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int size() const noexcept { return static_cast<int>(sizes.size()); }
    /// Strictly increasing and positive.
    void validate() const;
};

struct WindowMap {
    int grid_w = 0;
    int grid_h = 0;
    std::vector<double> values;

    double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * grid_w + ix]; }
    /// A map of constant window size (the all-ones map disables the window).
    static WindowMap constant(int grid_w, int grid_h, double v);
};

/// Softmax-weighted mean of the window sizes per cell.
WindowMap compute_window_map(const LogitField& v_logits, const WindowSet& s_win);

/// Analytic stand-in for a learned weight map: one-hot on the smallest window
/// not below the peak flow magnitude over the cell footprint (both flows),
/// saturating at the largest window. Footprints of 2x2 cells pool by max.
LogitField flow_magnitude_window_logits(const FlowField& m01, const FlowField& m10, const WindowSet& s_win,
                                        Density d = Density::OnePerPixel);

/// offsets * W per cell.
std::vector<Vec2> apply_window(const std::vector<Vec2>& offsets, const WindowMap& w);

} // namespace gsvsr
