#pragma once

// Per-frame fitting: gradient descent on the rendering loss stands in for a
// trained encoder. Parameters are optimized in an unconstrained space whose
// image always satisfies the field invariants.

#include "gsvsr/core.hpp"
#include "gsvsr/raster.hpp"

#include <optional>
#include <vector>

namespace gsvsr {

enum class LrSchedule { Constant, Cosine };

struct FitConfig {
    int iterations = 500;
    double learning_rate = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double freq_loss_weight = 0.05;
    /// Render scale while fitting; unset means 1 for OnePerPixel and 2 for
    /// OnePerFourPixels. Above 1 the render is box-filtered back to the
    /// target size before comparison.
    std::optional<int> scale{};
    Normalization normalization = Normalization::PaperDet;
    double truncation_radius = 4.0;
    LrSchedule schedule = LrSchedule::Cosine;
    /// Adds the frequency term's gradient to the L1 gradient.
    bool freq_in_gradients = false;
    bool optimize_covariance = true;

    void validate() const;
    int effective_scale(Density d) const;
    RenderConfig render_config(Density d) const;
};

/// Unconstrained parameters, 8 per kernel in field order:
/// u_x, u_y (offset = logistic(u)), a_x, a_y (sigma = 1e-3 + softplus(a)),
/// r (rho = 0.99 tanh(r)), c_r, c_g, c_b (color = logistic(c)).
struct ParamVector {
    static constexpr int kPerKernel = 8;
    std::vector<double> values;
};

ParamVector to_params(const GaussianField& f);
/// Writes the constrained parameters into a copy of `shape` (grid and timestamp kept).
GaussianField to_field(const ParamVector& p, const GaussianField& shape);

GaussianField init_field(const FrameBuffer& target, Density d);

/// Renders at the fitting scale with clamping off, box-filtered to LR size.
FrameBuffer render_for_fit(const GaussianField& f, const FitConfig& cfg);

struct LossValue {
    double total = 0.0;
    double l1 = 0.0;
    double freq = 0.0;
};

/// Mean absolute difference of the unnormalized 2-D DFT magnitudes of the two
/// images' luma. A plain magnitude-spectrum L1, not a focal-weighted variant.
double frequency_loss(const FrameBuffer& a, const FrameBuffer& b);

LossValue loss(const GaussianField& f, const FrameBuffer& target, const FitConfig& cfg);

/// d(l1)/d(theta) for every unconstrained parameter, in ParamVector order.
/// Sign subgradient with sign(0) = 0.
std::vector<double> gradients(const GaussianField& f, const FrameBuffer& target, const FitConfig& cfg);

struct GradientCheck {
    double max_rel_error = 0.0;
    int checked = 0;
    int excluded = 0; ///< stencil touches an L1 kink
};

/// Compares gradients() with central differences of the L1 term in the
/// unconstrained space. A parameter is excluded when any residual it moves
/// changes sign across [theta - eps, theta + eps] or comes within kink_tol of 0.
/// Relative error is |a - fd| / max(|a|, |fd|, abs_floor).
GradientCheck gradient_check(const GaussianField& f, const FrameBuffer& target, const FitConfig& cfg,
                             double eps = 1e-4, double kink_tol = 1e-6, double abs_floor = 1e-8);

struct FitResult {
    GaussianField field;
    std::vector<double> loss_trace; ///< total loss before each step
};

FitResult fit_field(const GaussianField& initial, const FrameBuffer& target, const FitConfig& cfg);
FitResult fit_frame(const FrameBuffer& target, Density d, const FitConfig& cfg);

} // namespace gsvsr
