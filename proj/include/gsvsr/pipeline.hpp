#pragma once

// End-to-end interpolation. Work that depends only on the input pair (endpoint
// fits, flows, window map, bank and heads) lives in a SharedContext built once;
// each timestamp then costs one derivation and one rasterization.
//
// Each output kernel keeps the identity of one endpoint kernel at the same
// cell and is carried by the motion from that endpoint to time t. The carried
// offset may leave the unit cell, which is what the offset window allows. The
// counterpart of that kernel in the other endpoint is found by warping, and
// the two versions are blended by the fusion mask.

#include "gsvsr/cpb.hpp"
#include "gsvsr/fit.hpp"
#include "gsvsr/io.hpp"
#include "gsvsr/motion.hpp"
#include "gsvsr/raster.hpp"

#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gsvsr {

struct InterpolateOptions {
    Density density = Density::OnePerFourPixels;
    FlowConvention convention = FlowConvention::Consistent;
    Normalization normalization = Normalization::PaperDet;
    bool adaptive_window = true;
    WindowSet windows{};
    FitConfig fit{.iterations = 200, .learning_rate = 0.1};
    /// Offset/color refinement after endpoint covariances snap to the bank.
    int refine_iterations = 100;
    double truncation_radius = 3.0;
    bool clamp_output = true;
    /// Entries present here replace the defaults (bank, endpoint-blend fuser,
    /// analytic fusion, passthrough decoding, flow-magnitude windows).
    WeightsFile weights{};
};

enum class Stage { Fit, FlowLoad, WindowMap, PerFrameDerive, Rasterize };

class StageCounters {
public:
    void bump(Stage s) { counts_[static_cast<int>(s)].fetch_add(1, std::memory_order_relaxed); }
    int get(Stage s) const { return counts_[static_cast<int>(s)].load(std::memory_order_relaxed); }
    /// Keys: fit, flow-load, window-map, per-frame-derive, rasterize.
    std::map<std::string, int> snapshot() const;

private:
    std::array<std::atomic<int>, 5> counts_{};
};

struct SharedContext {
    InterpolateOptions options;
    int lr_width = 0;
    int lr_height = 0;
    GaussianField field0;
    GaussianField field1;
    FlowField flow01; ///< LR pixels
    FlowField flow10;
    FlowField grid_flow01; ///< pooled to the kernel grid, still in LR pixels
    FlowField grid_flow10;
    WindowMap window;
    CpbBank bank;
    /// Loaded fuser; when absent the endpoint blend is used.
    std::optional<FuserWeights> fuser;
    std::unique_ptr<StageCounters> counters = std::make_unique<StageCounters>();
};

/// Endpoint fit followed by a bank snap of every covariance and an
/// offset/color refinement with covariances frozen.
GaussianField fit_endpoint(const FrameBuffer& frame, const CpbBank& bank, const InterpolateOptions& opt);

SharedContext build_shared_context(const FrameBuffer& frame0, const FrameBuffer& frame1, const FlowField& flow01,
                                   const FlowField& flow10, const InterpolateOptions& opt);

/// Kernel field at time t (offsets may exceed 1 up to the local window).
GaussianField derive_field(const SharedContext& ctx, double t);
FrameBuffer rasterize(const SharedContext& ctx, const GaussianField& f, double scale);
FrameBuffer render_timestamp(const SharedContext& ctx, double t, double scale);

/// Timestamps must be sorted and in [0, 1].
std::vector<FrameBuffer> interpolate(const FrameBuffer& frame0, const FrameBuffer& frame1, const FlowField& flow01,
                                     const FlowField& flow10, const std::vector<double>& timestamps,
                                     double spatial_scale, const InterpolateOptions& opt,
                                     SharedContext* context_out = nullptr);

} // namespace gsvsr
