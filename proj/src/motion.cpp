#include "gsvsr/motion.hpp"

#include <algorithm>
#include <cmath>

namespace gsvsr {

namespace {

void require_same_dims(const FlowField& a, const FlowField& b)
{
    if (a.width() != b.width() || a.height() != b.height())
        throw ShapeError("flow fields differ in size");
}

void require_same_dims(const FeatureMap& a, const FeatureMap& b, bool channels = true)
{
    if (a.width() != b.width() || a.height() != b.height() || (channels && a.channels() != b.channels()))
        throw ShapeError("feature maps differ in shape");
}

FlowField scaled(const FlowField& f, double k)
{
    FlowField out(f.width(), f.height());
    auto src = f.vectors();
    auto dst = out.vectors();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = {k * src[i].x, k * src[i].y};
    return out;
}

FeatureMap concat(const FeatureMap& a, const FeatureMap& b)
{
    FeatureMap out(a.width(), a.height(), a.channels() + b.channels());
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            for (int c = 0; c < a.channels(); ++c)
                out.at(x, y, c) = a.at(x, y, c);
            for (int c = 0; c < b.channels(); ++c)
                out.at(x, y, a.channels() + c) = b.at(x, y, c);
        }
    return out;
}

DecodedKernels unpack(const FeatureMap& f, auto&& map)
{
    DecodedKernels d;
    d.grid_w = f.width();
    d.grid_h = f.height();
    d.offsets.reserve(static_cast<std::size_t>(f.width()) * f.height());
    d.colors.reserve(d.offsets.capacity());
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) {
            d.offsets.push_back({map(f.at(x, y, 0)), map(f.at(x, y, 1))});
            d.colors.push_back({map(f.at(x, y, 2)), map(f.at(x, y, 3)), map(f.at(x, y, 4))});
        }
    return d;
}

} // namespace

std::pair<FlowField, FlowField> scale_flows(const FlowField& m01, const FlowField& m10, double t,
                                            FlowConvention convention)
{
    require_same_dims(m01, m10);
    if (!(t >= 0.0 && t <= 1.0))
        throw ValidationError("timestamp outside [0, 1]");
    if (convention == FlowConvention::Consistent)
        return {scaled(m10, t), scaled(m01, 1.0 - t)};
    return {scaled(m01, 1.0 - t), scaled(m10, t)};
}

FeatureMap backward_warp(const FeatureMap& f, const FlowField& flow)
{
    if (f.width() != flow.width() || f.height() != flow.height())
        throw ShapeError("warp flow does not match feature map size");
    const int w = f.width();
    const int h = f.height();
    const int ch = f.channels();
    FeatureMap out(w, h, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec2 d = flow.at(x, y);
            if (d.x == 0.0 && d.y == 0.0) {
                for (int c = 0; c < ch; ++c)
                    out.at(x, y, c) = f.at(x, y, c);
                continue;
            }
            const double sx = std::clamp(x + d.x, 0.0, static_cast<double>(w - 1));
            const double sy = std::clamp(y + d.y, 0.0, static_cast<double>(h - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double fx = sx - x0;
            const double fy = sy - y0;
            for (int c = 0; c < ch; ++c) {
                const double top = (1.0 - fx) * f.at(x0, y0, c) + fx * f.at(x1, y0, c);
                const double bottom = (1.0 - fx) * f.at(x0, y1, c) + fx * f.at(x1, y1, c);
                out.at(x, y, c) = (1.0 - fy) * top + fy * bottom;
            }
        }
    }
    return out;
}

FlowField pool_flow_to_grid(const FlowField& lr_flow, Density d)
{
    if (d == Density::OnePerPixel)
        return lr_flow;
    const int gw = grid_width(lr_flow.width(), d);
    const int gh = grid_height(lr_flow.height(), d);
    FlowField out(gw, gh);
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx) {
            Vec2 sum;
            int n = 0;
            for (int y = 2 * gy; y < std::min(2 * gy + 2, lr_flow.height()); ++y)
                for (int x = 2 * gx; x < std::min(2 * gx + 2, lr_flow.width()); ++x) {
                    sum.x += lr_flow.at(x, y).x;
                    sum.y += lr_flow.at(x, y).y;
                    ++n;
                }
            out.at(gx, gy) = {sum.x / n, sum.y / n};
        }
    return out;
}

double logistic(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void FusionHeadWeights::validate() const
{
    conv.validate();
    if (conv.out_channels < 2 || conv.in_channels != 2 * (conv.out_channels - 1))
        throw ShapeError("fusion head must map 2C channels to 1 + C");
}

void DecoderWeights::validate() const
{
    conv.validate();
    if (conv.out_channels != 5)
        throw ShapeError("decoder must emit 5 channels, got " + std::to_string(conv.out_channels));
}

FusionPrediction predict_fusion(const FeatureMap& f0t, const FeatureMap& f1t, double t)
{
    require_same_dims(f0t, f1t);
    if (!(t >= 0.0 && t <= 1.0))
        throw ValidationError("timestamp outside [0, 1]");
    return {FeatureMap(f0t.width(), f0t.height(), 1, 1.0 - t), FeatureMap(f0t.width(), f0t.height(), f0t.channels())};
}

FusionPrediction predict_fusion(const FeatureMap& f0t, const FeatureMap& f1t, double t, const FusionHeadWeights& w)
{
    require_same_dims(f0t, f1t);
    if (!(t >= 0.0 && t <= 1.0))
        throw ValidationError("timestamp outside [0, 1]");
    w.validate();
    if (w.feature_channels() != f0t.channels())
        throw ShapeError("fusion head expects " + std::to_string(w.feature_channels()) + " feature channels, got " +
                         std::to_string(f0t.channels()));
    const FeatureMap raw = conv2d_same(concat(f0t, f1t), w.conv);
    const int c = f0t.channels();
    FusionPrediction p{FeatureMap(f0t.width(), f0t.height(), 1), FeatureMap(f0t.width(), f0t.height(), c)};
    for (int y = 0; y < f0t.height(); ++y)
        for (int x = 0; x < f0t.width(); ++x) {
            p.mask.at(x, y, 0) = logistic(raw.at(x, y, 0));
            for (int k = 0; k < c; ++k)
                p.residual.at(x, y, k) = raw.at(x, y, 1 + k);
        }
    return p;
}

FeatureMap fuse_features(const FeatureMap& f0t, const FeatureMap& f1t, const FeatureMap& mask,
                         const FeatureMap& residual)
{
    require_same_dims(f0t, f1t);
    require_same_dims(f0t, residual);
    require_same_dims(f0t, mask, false);
    if (mask.channels() != 1)
        throw ShapeError("fusion mask must have one channel");
    for (double m : mask.data())
        if (!(m >= 0.0 && m <= 1.0))
            throw ValidationError("fusion mask value outside [0, 1]");

    FeatureMap out(f0t.width(), f0t.height(), f0t.channels());
    for (int y = 0; y < f0t.height(); ++y)
        for (int x = 0; x < f0t.width(); ++x) {
            const double m = mask.at(x, y, 0);
            for (int c = 0; c < f0t.channels(); ++c)
                out.at(x, y, c) = m * f0t.at(x, y, c) + (1.0 - m) * f1t.at(x, y, c) + residual.at(x, y, c);
        }
    return out;
}

DecodedKernels decode_gaussians(const FeatureMap& f)
{
    if (f.channels() != 5)
        throw ShapeError("passthrough decoding needs 5 channels, got " + std::to_string(f.channels()));
    return unpack(f, [](double v) { return std::clamp(v, 0.0, 1.0); });
}

DecodedKernels decode_gaussians(const FeatureMap& f, const DecoderWeights& w)
{
    w.validate();
    return unpack(conv2d_same(f, w.conv), [](double v) { return logistic(v); });
}

void WindowSet::validate() const
{
    if (sizes.empty())
        throw ValidationError("window set is empty");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(std::isfinite(sizes[i]) && sizes[i] > 0.0))
            throw ValidationError("window sizes must be positive");
        if (i > 0 && !(sizes[i] > sizes[i - 1]))
            throw ValidationError("window sizes must be strictly increasing");
    }
}

WindowMap WindowMap::constant(int grid_w, int grid_h, double v)
{
    if (grid_w <= 0 || grid_h <= 0)
        throw ValidationError("window map dimensions must be positive");
    return {grid_w, grid_h, std::vector<double>(static_cast<std::size_t>(grid_w) * grid_h, v)};
}

WindowMap compute_window_map(const LogitField& v_logits, const WindowSet& s_win)
{
    s_win.validate();
    if (v_logits.k() != s_win.size())
        throw ShapeError("window logits have " + std::to_string(v_logits.k()) + " channels for " +
                         std::to_string(s_win.size()) + " windows");
    WindowMap out = WindowMap::constant(v_logits.grid_width(), v_logits.grid_height(), 0.0);
    const double lo = s_win.sizes.front();
    const double hi = s_win.sizes.back();
    for (int iy = 0; iy < out.grid_h; ++iy)
        for (int ix = 0; ix < out.grid_w; ++ix) {
            const auto v = softmax(v_logits.cell(ix, iy));
            double w = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i)
                w += v[i] * s_win.sizes[i];
            // Rounding can step a hair outside the hull.
            out.values[static_cast<std::size_t>(iy) * out.grid_w + ix] = std::clamp(w, lo, hi);
        }
    return out;
}

LogitField flow_magnitude_window_logits(const FlowField& m01, const FlowField& m10, const WindowSet& s_win, Density d)
{
    require_same_dims(m01, m10);
    s_win.validate();
    const int ext = cell_extent(d);
    const int gw = grid_width(m01.width(), d);
    const int gh = grid_height(m01.height(), d);
    LogitField out(gw, gh, s_win.size());
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx) {
            double g = 0.0;
            for (int y = ext * gy; y < std::min(ext * gy + ext, m01.height()); ++y)
                for (int x = ext * gx; x < std::min(ext * gx + ext, m01.width()); ++x) {
                    const Vec2 a = m01.at(x, y);
                    const Vec2 b = m10.at(x, y);
                    g = std::max({g, std::hypot(a.x, a.y), std::hypot(b.x, b.y)});
                }
            g = std::min(g, s_win.sizes.back());
            int pick = s_win.size() - 1;
            for (int i = 0; i < s_win.size(); ++i)
                if (s_win.sizes[i] >= g) {
                    pick = i;
                    break;
                }
            out.cell(gx, gy)[pick] = 50.0;
        }
    return out;
}

std::vector<Vec2> apply_window(const std::vector<Vec2>& offsets, const WindowMap& w)
{
    if (offsets.size() != w.values.size())
        throw ShapeError("offset grid does not match window map");
    std::vector<Vec2> out(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const Vec2 o = offsets[i];
        if (!(o.x >= 0.0 && o.x <= 1.0 && o.y >= 0.0 && o.y <= 1.0))
            throw ValidationError("offset outside [0, 1] before windowing");
        out[i] = {o.x * w.values[i], o.y * w.values[i]};
    }
    return out;
}

} // namespace gsvsr
