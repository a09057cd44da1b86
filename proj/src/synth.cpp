#include "gsvsr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace gsvsr {

FrameBuffer gaussian_blob(int width, int height, Vec2 center, double radius, Rgb color)
{
    FrameBuffer f(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double dx = x + 0.5 - center.x;
            const double dy = y + 0.5 - center.y;
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
            f.at(x, y) = {color[0] * w, color[1] * w, color[2] * w};
        }
    return f;
}

FrameBuffer smooth_texture(int width, int height, Vec2 shift, std::uint64_t seed, const TextureOptions& opt)
{
    if (opt.waves < 1 || !(opt.min_period > 0.0) || opt.max_period < opt.min_period || !(opt.contrast >= 0.0))
        throw ValidationError("invalid texture options");
    struct Wave {
        double kx, ky, phase;
        Rgb amp;
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Wave> waves(static_cast<std::size_t>(opt.waves));
    for (Wave& w : waves) {
        const double period = opt.min_period + (opt.max_period - opt.min_period) * unit(rng);
        const double angle = 2.0 * std::numbers::pi * unit(rng);
        const double k = 2.0 * std::numbers::pi / period;
        w = {k * std::cos(angle), k * std::sin(angle), 2.0 * std::numbers::pi * unit(rng),
             {unit(rng), unit(rng), unit(rng)}};
    }
    const double norm = opt.contrast / std::sqrt(static_cast<double>(waves.size()));
    FrameBuffer f(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double px = x + 0.5 - shift.x;
            const double py = y + 0.5 - shift.y;
            Rgb v{0.5, 0.5, 0.5};
            for (const Wave& w : waves) {
                const double s = std::sin(w.kx * px + w.ky * py + w.phase);
                for (int c = 0; c < 3; ++c)
                    v[c] += norm * w.amp[c] * s;
            }
            for (int c = 0; c < 3; ++c)
                v[c] = std::clamp(v[c], 0.0, 1.0);
            f.at(x, y) = v;
        }
    return f;
}

FlowField uniform_flow(int width, int height, Vec2 v)
{
    return FlowField(width, height, v);
}

FlowField zoom_flow(int width, int height, Vec2 center, double factor)
{
    FlowField f(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            f.at(x, y) = {(factor - 1.0) * (x + 0.5 - center.x), (factor - 1.0) * (y + 0.5 - center.y)};
    return f;
}

GaussianField random_field(int lr_width, int lr_height, Density d, std::mt19937_64& rng,
                           const RandomFieldRanges& r)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    GaussianField f(lr_width, lr_height, d, 0.0);
    for (Gaussian2D& g : f.gaussians()) {
        g.offset = {in(r.offset_min, r.offset_max), in(r.offset_min, r.offset_max)};
        g.cov = {in(r.sigma_min, r.sigma_max), in(r.sigma_min, r.sigma_max), in(-r.rho_max, r.rho_max)};
        g.color = {in(r.color_min, r.color_max), in(r.color_min, r.color_max), in(r.color_min, r.color_max)};
    }
    return f;
}

} // namespace gsvsr
