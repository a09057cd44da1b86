#include "gsvsr/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace gsvsr {

namespace {

template <typename Fn>
auto in_stage(const char* name, Fn&& fn) -> decltype(fn())
{
    const std::string prefix = std::string(name) + ": ";
    try {
        return fn();
    } catch (const ShapeError& e) {
        throw ShapeError(prefix + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    }
}

constexpr int kChannels = 8; // dmu_x, dmu_y, r, g, b, sigma_x, sigma_y, rho

FeatureMap pack(const GaussianField& f)
{
    FeatureMap m(f.grid_width(), f.grid_height(), kChannels);
    for (int iy = 0; iy < f.grid_height(); ++iy)
        for (int ix = 0; ix < f.grid_width(); ++ix) {
            const Gaussian2D& g = f.at(ix, iy);
            const double v[kChannels] = {g.offset.x, g.offset.y, g.color[0], g.color[1],
                                         g.color[2], g.cov.sigma_x, g.cov.sigma_y, g.cov.rho};
            for (int c = 0; c < kChannels; ++c)
                m.at(ix, iy, c) = v[c];
        }
    return m;
}

/// Distance of both components of p outside [0, w].
double window_violation(Vec2 p, double w)
{
    auto one = [w](double v) { return std::max(0.0, -v) + std::max(0.0, v - w); };
    return one(p.x) + one(p.y);
}

} // namespace

std::map<std::string, int> StageCounters::snapshot() const
{
    return {{"fit", get(Stage::Fit)},
            {"flow-load", get(Stage::FlowLoad)},
            {"window-map", get(Stage::WindowMap)},
            {"per-frame-derive", get(Stage::PerFrameDerive)},
            {"rasterize", get(Stage::Rasterize)}};
}

GaussianField fit_endpoint(const FrameBuffer& frame, const CpbBank& bank, const InterpolateOptions& opt)
{
    FitConfig cfg = opt.fit;
    cfg.normalization = opt.normalization;
    GaussianField f = fit_frame(frame, opt.density, cfg).field;
    for (Gaussian2D& g : f.gaussians())
        g.cov = bank.entries[nearest_bank_index(g.cov, bank)];
    if (opt.refine_iterations == 0)
        return f;
    cfg.iterations = opt.refine_iterations;
    cfg.optimize_covariance = false;
    return fit_field(f, frame, cfg).field;
}

SharedContext build_shared_context(const FrameBuffer& frame0, const FrameBuffer& frame1, const FlowField& flow01,
                                   const FlowField& flow10, const InterpolateOptions& opt)
{
    if (frame0.width() != frame1.width() || frame0.height() != frame1.height())
        throw ShapeError("endpoint frames differ in size");
    opt.windows.validate();

    SharedContext ctx;
    ctx.options = opt;
    ctx.lr_width = frame0.width();
    ctx.lr_height = frame0.height();

    in_stage("flow-load", [&] {
        for (const FlowField* f : {&flow01, &flow10}) {
            if (f->width() != frame0.width() || f->height() != frame0.height())
                throw ShapeError("flow is " + std::to_string(f->width()) + "x" + std::to_string(f->height()) +
                                 ", frames are " + std::to_string(frame0.width()) + "x" +
                                 std::to_string(frame0.height()));
            require_finite(*f);
        }
        ctx.flow01 = flow01;
        ctx.flow10 = flow10;
        ctx.grid_flow01 = pool_flow_to_grid(flow01, opt.density);
        ctx.grid_flow10 = pool_flow_to_grid(flow10, opt.density);
        ctx.counters->bump(Stage::FlowLoad);
    });

    in_stage("fit", [&] {
        ctx.bank = opt.weights.bank ? *opt.weights.bank : default_bank();
        ctx.bank.validate();
        if (opt.weights.fuser) {
            ctx.fuser = *opt.weights.fuser;
            ctx.fuser->validate();
            if (ctx.fuser->k() != ctx.bank.size())
                throw ShapeError("fuser emits " + std::to_string(ctx.fuser->k()) + " logits for a bank of " +
                                 std::to_string(ctx.bank.size()));
        }
        ctx.field0 = fit_endpoint(frame0, ctx.bank, opt);
        ctx.field1 = fit_endpoint(frame1, ctx.bank, opt);
        ctx.field1.set_timestamp(1.0);
        ctx.counters->bump(Stage::Fit);
    });

    in_stage("window-map", [&] {
        const int gw = ctx.field0.grid_width();
        const int gh = ctx.field0.grid_height();
        if (!opt.adaptive_window) {
            ctx.window = WindowMap::constant(gw, gh, 1.0);
        } else if (opt.weights.window_logits) {
            const LogitField& l = *opt.weights.window_logits;
            if (l.grid_width() != gw || l.grid_height() != gh)
                throw ShapeError("window logits do not match the kernel grid");
            ctx.window = compute_window_map(l, opt.windows);
        } else {
            ctx.window = compute_window_map(flow_magnitude_window_logits(flow01, flow10, opt.windows, opt.density),
                                            opt.windows);
        }
        ctx.counters->bump(Stage::WindowMap);
    });
    return ctx;
}

GaussianField derive_field(const SharedContext& ctx, double t)
{
    return in_stage("per-frame-derive", [&] {
        if (!(t >= 0.0 && t <= 1.0))
            throw ValidationError("timestamp " + std::to_string(t) + " outside [0, 1]");
        const InterpolateOptions& opt = ctx.options;
        const int gw = ctx.field0.grid_width();
        const int gh = ctx.field0.grid_height();
        const double ext = cell_extent(opt.density);
        const auto [mt0, mt1] = scale_flows(ctx.grid_flow01, ctx.grid_flow10, t, opt.convention);

        // Pick, per cell, the endpoint whose kernel can be carried to time t
        // with the least clipping by the window.
        FlowField warp0(gw, gh), warp1(gw, gh);
        std::vector<Vec2> carry(static_cast<std::size_t>(gw) * gh);
        for (int iy = 0; iy < gh; ++iy)
            for (int ix = 0; ix < gw; ++ix) {
                const double w = ctx.window.at(ix, iy);
                const Vec2 d0{-mt0.at(ix, iy).x, -mt0.at(ix, iy).y};
                const Vec2 d1{-mt1.at(ix, iy).x, -mt1.at(ix, iy).y};
                const Vec2 o0 = ctx.field0.at(ix, iy).offset;
                const Vec2 o1 = ctx.field1.at(ix, iy).offset;
                const double v0 = window_violation({o0.x + d0.x, o0.y + d0.y}, w);
                const double v1 = window_violation({o1.x + d1.x, o1.y + d1.y}, w);
                const bool from0 = v0 < v1 || (v0 == v1 && t <= 0.5);
                const Vec2 d = from0 ? d0 : d1;
                carry[static_cast<std::size_t>(iy) * gw + ix] = d;
                warp0.at(ix, iy) = {(d.x + mt0.at(ix, iy).x) / ext, (d.y + mt0.at(ix, iy).y) / ext};
                warp1.at(ix, iy) = {(d.x + mt1.at(ix, iy).x) / ext, (d.y + mt1.at(ix, iy).y) / ext};
            }
        const FeatureMap s0 = backward_warp(pack(ctx.field0), warp0);
        const FeatureMap s1 = backward_warp(pack(ctx.field1), warp1);

        // Decoder features: offsets carried to t in window units, then colors.
        FeatureMap f0t(gw, gh, 5), f1t(gw, gh, 5);
        CovField c0t(gw, gh), c1t(gw, gh);
        for (int iy = 0; iy < gh; ++iy)
            for (int ix = 0; ix < gw; ++ix) {
                const double w = ctx.window.at(ix, iy);
                const Vec2 d = carry[static_cast<std::size_t>(iy) * gw + ix];
                for (auto [src, dst, cov] : {std::tuple{&s0, &f0t, &c0t}, std::tuple{&s1, &f1t, &c1t}}) {
                    dst->at(ix, iy, 0) = (src->at(ix, iy, 0) + d.x) / w;
                    dst->at(ix, iy, 1) = (src->at(ix, iy, 1) + d.y) / w;
                    for (int c = 2; c < 5; ++c)
                        dst->at(ix, iy, c) = src->at(ix, iy, c);
                    cov->at(ix, iy) = {src->at(ix, iy, 5), src->at(ix, iy, 6), src->at(ix, iy, 7)};
                }
            }

        const FusionPrediction fp =
            opt.weights.fusion_head ? predict_fusion(f0t, f1t, t, *opt.weights.fusion_head) : predict_fusion(f0t, f1t, t);
        const FeatureMap ft = fuse_features(f0t, f1t, fp.mask, fp.residual);
        const DecodedKernels dec = opt.weights.decoder ? decode_gaussians(ft, *opt.weights.decoder) : decode_gaussians(ft);
        const std::vector<Vec2> offsets = apply_window(dec.offsets, ctx.window);
        const CovField cov = resample(
            ctx.fuser ? fuse(c0t, c1t, t, *ctx.fuser) : blend_endpoint_logits(c0t, c1t, t, ctx.bank), ctx.bank);

        GaussianField out(ctx.lr_width, ctx.lr_height, opt.density, t);
        auto gs = out.gaussians();
        for (std::size_t i = 0; i < gs.size(); ++i) {
            gs[i].offset = offsets[i];
            gs[i].cov = cov.cells[i];
            gs[i].color = dec.colors[i];
        }
        ctx.counters->bump(Stage::PerFrameDerive);
        return out;
    });
}

FrameBuffer rasterize(const SharedContext& ctx, const GaussianField& f, double scale)
{
    return in_stage("rasterize", [&] {
        RenderConfig rc;
        rc.scale = scale;
        rc.truncation_radius = ctx.options.truncation_radius;
        rc.normalization = ctx.options.normalization;
        rc.clamp_output = ctx.options.clamp_output;
        FrameBuffer out = render_tiled(f, rc);
        require_finite(out);
        ctx.counters->bump(Stage::Rasterize);
        return out;
    });
}

FrameBuffer render_timestamp(const SharedContext& ctx, double t, double scale)
{
    return rasterize(ctx, derive_field(ctx, t), scale);
}

std::vector<FrameBuffer> interpolate(const FrameBuffer& frame0, const FrameBuffer& frame1, const FlowField& flow01,
                                     const FlowField& flow10, const std::vector<double>& timestamps,
                                     double spatial_scale, const InterpolateOptions& opt,
                                     SharedContext* context_out)
{
    if (timestamps.empty())
        throw ValidationError("no timestamps requested");
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        if (!(timestamps[i] >= 0.0 && timestamps[i] <= 1.0))
            throw ValidationError("timestamp " + std::to_string(timestamps[i]) + " outside [0, 1]");
        if (i > 0 && timestamps[i] < timestamps[i - 1])
            throw ValidationError("timestamps must be sorted");
    }
    RenderConfig probe;
    probe.scale = spatial_scale;
    probe.truncation_radius = opt.truncation_radius;
    validate(probe, opt.density);

    SharedContext ctx = build_shared_context(frame0, frame1, flow01, flow10, opt);
    std::vector<FrameBuffer> out;
    out.reserve(timestamps.size());
    for (double t : timestamps)
        out.push_back(render_timestamp(ctx, t, spatial_scale));
    if (context_out)
        *context_out = std::move(ctx);
    return out;
}

} // namespace gsvsr
