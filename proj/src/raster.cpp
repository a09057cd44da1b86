#include "gsvsr/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gsvsr {

void validate(const RenderConfig& cfg, Density d)
{
    if (!std::isfinite(cfg.scale))
        throw ValidationError("render scale must be finite");
    const double floor = d == Density::OnePerFourPixels ? 2.0 : 1.0;
    if (cfg.scale < floor)
        throw ValidationError("render scale " + std::to_string(cfg.scale) + " below the density floor " +
                              std::to_string(floor));
    if (!(cfg.truncation_radius >= 1.0))
        throw ValidationError("truncation radius must be at least 1");
}

int output_extent(int lr_extent, double scale)
{
    return static_cast<int>(std::lround(scale * lr_extent));
}

CovParams scale_covariance(const CovParams& p, double s)
{
    require_valid(p);
    if (!(s > 0.0))
        throw ValidationError("covariance scale must be positive");
    return {s * p.sigma_x, s * p.sigma_y, p.rho};
}

PreparedKernel prepare_kernel(Vec2 center, const CovParams& cov, const Rgb& color, const RenderConfig& cfg,
                              int out_width, int out_height)
{
    const double s = cfg.scale;
    const Sym2 inv = cov_inverse(cov);
    const double inv_s2 = 1.0 / (s * s);

    PreparedKernel k;
    k.cx = s * center.x;
    k.cy = s * center.y;
    k.ixx = inv.xx * inv_s2;
    k.ixy = inv.xy * inv_s2;
    k.iyy = inv.yy * inv_s2;
    k.color = color;

    double det = cov_det(cov);
    if (!cfg.lr_prefactor)
        det *= s * s * s * s;
    const double norm = cfg.normalization == Normalization::PaperDet ? det : std::sqrt(det);
    k.prefactor = 1.0 / (2.0 * std::numbers::pi * norm);

    // Axis-aligned box of the ellipse d^T Sigma_s^-1 d <= R^2.
    const double ex = cfg.truncation_radius * s * cov.sigma_x;
    const double ey = cfg.truncation_radius * s * cov.sigma_y;
    k.x0 = std::max(0, static_cast<int>(std::ceil(k.cx - ex - 0.5)));
    k.x1 = std::min(out_width - 1, static_cast<int>(std::floor(k.cx + ex - 0.5)));
    k.y0 = std::max(0, static_cast<int>(std::ceil(k.cy - ey - 0.5)));
    k.y1 = std::min(out_height - 1, static_cast<int>(std::floor(k.cy + ey - 0.5)));
    return k;
}

std::vector<PreparedKernel> prepare_kernels(const GaussianField& f, const RenderConfig& cfg)
{
    validate(cfg, f.density());
    require_valid(f, std::numeric_limits<double>::infinity());
    const int w = output_extent(f.lr_width(), cfg.scale);
    const int h = output_extent(f.lr_height(), cfg.scale);
    std::vector<PreparedKernel> out;
    out.reserve(f.size());
    for (const Gaussian2D& g : f.gaussians())
        out.push_back(prepare_kernel(f.center(g), g.cov, g.color, cfg, w, h));
    return out;
}

Rgb eval_kernel(Vec2 center, const CovParams& cov, const Rgb& color, double x, double y, const RenderConfig& cfg)
{
    const PreparedKernel k = prepare_kernel(center, cov, color, cfg, 0, 0);
    const double w = k.prefactor * std::exp(-0.5 * k.mahalanobis2(x, y));
    return {color[0] * w, color[1] * w, color[2] * w};
}

Rgb eval_gaussian(const Gaussian2D& g, Density d, double x, double y, const RenderConfig& cfg)
{
    const Vec2 c = cell_center(g.anchor, d);
    return eval_kernel({c.x + g.offset.x, c.y + g.offset.y}, g.cov, g.color, x, y, cfg);
}

namespace {

void finish(FrameBuffer& out, const RenderConfig& cfg)
{
    if (!cfg.clamp_output)
        return;
    for (Rgb& p : out.pixels())
        for (double& v : p)
            v = std::clamp(v, 0.0, 1.0);
}

} // namespace

FrameBuffer render_dense(const GaussianField& f, const RenderConfig& cfg)
{
    const auto kernels = prepare_kernels(f, cfg);
    const int w = output_extent(f.lr_width(), cfg.scale);
    const int h = output_extent(f.lr_height(), cfg.scale);
    FrameBuffer out(w, h);
    for (int py = 0; py < h; ++py) {
        const double y = py + 0.5;
        for (int px = 0; px < w; ++px) {
            const double x = px + 0.5;
            Rgb acc{0.0, 0.0, 0.0};
            for (const PreparedKernel& k : kernels) {
                const double wgt = k.prefactor * std::exp(-0.5 * k.mahalanobis2(x, y));
                acc[0] += k.color[0] * wgt;
                acc[1] += k.color[1] * wgt;
                acc[2] += k.color[2] * wgt;
            }
            out.at(px, py) = acc;
        }
    }
    finish(out, cfg);
    return out;
}

FrameBuffer render_tiled(const GaussianField& f, const RenderConfig& cfg)
{
    const auto kernels = prepare_kernels(f, cfg);
    const int w = output_extent(f.lr_width(), cfg.scale);
    const int h = output_extent(f.lr_height(), cfg.scale);
    const int tiles_x = (w + kTileSize - 1) / kTileSize;
    const int tiles_y = (h + kTileSize - 1) / kTileSize;

    std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        const PreparedKernel& k = kernels[i];
        if (k.x1 < k.x0 || k.y1 < k.y0)
            continue;
        const bool dark = k.color[0] == 0.0 && k.color[1] == 0.0 && k.color[2] == 0.0;
        if (dark)
            continue;
        for (int ty = k.y0 / kTileSize; ty <= k.y1 / kTileSize; ++ty)
            for (int tx = k.x0 / kTileSize; tx <= k.x1 / kTileSize; ++tx)
                bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(static_cast<std::uint32_t>(i));
    }

    const double r2 = cfg.truncation_radius * cfg.truncation_radius;
    FrameBuffer out(w, h);
    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            const auto& bin = bins[static_cast<std::size_t>(ty) * tiles_x + tx];
            if (bin.empty())
                continue;
            const int px_end = std::min(w, (tx + 1) * kTileSize);
            const int py_end = std::min(h, (ty + 1) * kTileSize);
            for (int py = ty * kTileSize; py < py_end; ++py) {
                const double y = py + 0.5;
                for (int px = tx * kTileSize; px < px_end; ++px) {
                    const double x = px + 0.5;
                    Rgb acc{0.0, 0.0, 0.0};
                    for (std::uint32_t idx : bin) {
                        const PreparedKernel& k = kernels[idx];
                        if (px < k.x0 || px > k.x1 || py < k.y0 || py > k.y1)
                            continue;
                        const double q = k.mahalanobis2(x, y);
                        if (q > r2)
                            continue;
                        const double wgt = k.prefactor * std::exp(-0.5 * q);
                        acc[0] += k.color[0] * wgt;
                        acc[1] += k.color[1] * wgt;
                        acc[2] += k.color[2] * wgt;
                    }
                    out.at(px, py) = acc;
                }
            }
        }
    }
    finish(out, cfg);
    return out;
}

double truncation_error_bound(const GaussianField& f, const RenderConfig& cfg)
{
    const auto kernels = prepare_kernels(f, cfg);
    double mass = 0.0;
    for (const PreparedKernel& k : kernels)
        mass += std::max({k.color[0], k.color[1], k.color[2]}) * k.prefactor;
    const double r = cfg.truncation_radius;
    return mass * std::exp(-0.5 * r * r);
}

} // namespace gsvsr
