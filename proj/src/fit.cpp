#include "gsvsr/fit.hpp"

#include "gsvsr/metrics.hpp"
#include "gsvsr/motion.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

namespace gsvsr {

namespace {

constexpr double kRhoScale = 0.99;
constexpr double kColorFloor = 1e-3;
constexpr double kOffsetFloor = 1e-6;

double softplus(double a)
{
    return a > 30.0 ? a : std::log1p(std::exp(a));
}

double inv_softplus(double y)
{
    y = std::max(y, 1e-12);
    return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

double logit(double p, double floor)
{
    p = std::clamp(p, floor, 1.0 - floor);
    return std::log(p / (1.0 - p));
}

FrameBuffer box_downsample(const FrameBuffer& hr, int s)
{
    if (s == 1)
        return hr;
    const int w = hr.width() / s;
    const int h = hr.height() / s;
    FrameBuffer out(w, h);
    const double inv = 1.0 / (s * s);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Rgb acc{0.0, 0.0, 0.0};
            for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx) {
                    const Rgb& p = hr.at(s * x + dx, s * y + dy);
                    for (int c = 0; c < 3; ++c)
                        acc[c] += p[c];
                }
            for (int c = 0; c < 3; ++c)
                acc[c] *= inv;
            out.at(x, y) = acc;
        }
    return out;
}

void require_same_size(const FrameBuffer& a, const FrameBuffer& b)
{
    if (a.width() != b.width() || a.height() != b.height())
        throw ShapeError("render is " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         " but target is " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

// FFTW planning is not thread-safe.
std::mutex& fftw_mutex()
{
    static std::mutex m;
    return m;
}

using Spectrum = std::vector<std::complex<double>>;

/// Unnormalized forward DFT of a real or complex row-major h x w array.
Spectrum dft2(const Spectrum& in, int w, int h)
{
    Spectrum out(in.size());
    Spectrum src = in;
    std::lock_guard lock(fftw_mutex());
    fftw_plan plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(src.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return out;
}

Spectrum luma_spectrum(const FrameBuffer& f)
{
    Spectrum in(static_cast<std::size_t>(f.width()) * f.height());
    auto px = f.pixels();
    for (std::size_t i = 0; i < in.size(); ++i)
        in[i] = luma(px[i]);
    return dft2(in, f.width(), f.height());
}

/// d(frequency_loss)/d(luma of a), per pixel.
std::vector<double> frequency_gradient(const FrameBuffer& a, const FrameBuffer& b)
{
    const int w = a.width();
    const int h = a.height();
    const Spectrum fa = luma_spectrum(a);
    const Spectrum fb = luma_spectrum(b);
    Spectrum coef(fa.size());
    for (std::size_t k = 0; k < fa.size(); ++k) {
        const double ma = std::abs(fa[k]);
        const double diff = ma - std::abs(fb[k]);
        if (ma == 0.0 || diff == 0.0)
            continue;
        coef[k] = (diff > 0.0 ? 1.0 : -1.0) * std::conj(fa[k]) / ma;
    }
    // d|F_k|/dY(x) = Re(conj(F_k) / |F_k| * exp(-i 2 pi k.x / N)), a forward DFT.
    const Spectrum g = dft2(coef, w, h);
    std::vector<double> out(g.size());
    const double inv_n = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        out[i] = g[i].real() * inv_n;
    return out;
}

struct Evaluation {
    LossValue loss;
    std::vector<double> grad;
};

Evaluation evaluate(const GaussianField& f, const FrameBuffer& target, const FitConfig& cfg, bool want_grad)
{
    cfg.validate();
    const int s = cfg.effective_scale(f.density());
    const RenderConfig rc = cfg.render_config(f.density());
    const FrameBuffer lr = box_downsample(render_tiled(f, rc), s);
    require_same_size(lr, target);

    const int w = target.width();
    const int h = target.height();
    const double n = 3.0 * w * h;

    Evaluation ev;
    double l1 = 0.0;
    auto rp = lr.pixels();
    auto tp = target.pixels();
    for (std::size_t i = 0; i < rp.size(); ++i)
        for (int c = 0; c < 3; ++c)
            l1 += std::abs(rp[i][c] - tp[i][c]);
    ev.loss.l1 = l1 / n;
    ev.loss.freq = frequency_loss(lr, target);
    ev.loss.total = ev.loss.l1 + cfg.freq_loss_weight * ev.loss.freq;
    if (!want_grad)
        return ev;

    // dL/d(render) at LR resolution.
    std::vector<Rgb> g_lr(rp.size());
    for (std::size_t i = 0; i < rp.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double r = rp[i][c] - tp[i][c];
            g_lr[i][c] = (r > 0.0 ? 1.0 : r < 0.0 ? -1.0 : 0.0) / n;
        }
    if (cfg.freq_in_gradients && cfg.freq_loss_weight > 0.0) {
        const auto gy = frequency_gradient(lr, target);
        for (std::size_t i = 0; i < g_lr.size(); ++i)
            for (int c = 0; c < 3; ++c)
                g_lr[i][c] += cfg.freq_loss_weight * gy[i] * kLumaWeights[c];
    }

    const auto kernels = prepare_kernels(f, rc);
    const double r2 = rc.truncation_radius * rc.truncation_radius;
    const double inv_s2 = 1.0 / (s * s);
    const double det_power = cfg.normalization == Normalization::PaperDet ? 1.0 : 0.5;
    const bool fit_cov = cfg.optimize_covariance;

    ev.grad.assign(f.size() * ParamVector::kPerKernel, 0.0);
    auto gs = f.gaussians();
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const Gaussian2D& g = gs[i];
        const PreparedKernel& k = kernels[i];
        const double sx = g.cov.sigma_x;
        const double sy = g.cov.sigma_y;
        const double rho = g.cov.rho;
        const double d = 1.0 - rho * rho;
        const double inv_ssx = 1.0 / (s * sx);
        const double inv_ssy = 1.0 / (s * sy);
        const double dlogp_sx = -2.0 * det_power / sx;
        const double dlogp_sy = -2.0 * det_power / sy;
        const double dlogp_rho = 2.0 * det_power * rho / d;

        double g_ox = 0.0, g_oy = 0.0, g_sx = 0.0, g_sy = 0.0, g_rho = 0.0;
        Rgb g_col{0.0, 0.0, 0.0};
        for (int py = k.y0; py <= k.y1; ++py) {
            const double y = py + 0.5;
            for (int px = k.x0; px <= k.x1; ++px) {
                const double x = px + 0.5;
                const double q = k.mahalanobis2(x, y);
                if (q > r2)
                    continue;
                const double wgt = k.prefactor * std::exp(-0.5 * q);
                const Rgb& gp = g_lr[static_cast<std::size_t>(py / s) * w + px / s];
                const double gw = (gp[0] * k.color[0] + gp[1] * k.color[1] + gp[2] * k.color[2]) * inv_s2;
                for (int c = 0; c < 3; ++c)
                    g_col[c] += gp[c] * inv_s2 * wgt;
                if (gw == 0.0)
                    continue;
                const double X = (x - k.cx) * inv_ssx;
                const double Y = (y - k.cy) * inv_ssy;
                const double dq_dx = (2.0 * X - 2.0 * rho * Y) / d;
                const double dq_dy = (2.0 * Y - 2.0 * rho * X) / d;
                const double a = gw * wgt;
                g_ox += a * 0.5 * dq_dx / sx;
                g_oy += a * 0.5 * dq_dy / sy;
                if (fit_cov) {
                    g_sx += a * (dlogp_sx + 0.5 * dq_dx * X / sx);
                    g_sy += a * (dlogp_sy + 0.5 * dq_dy * Y / sy);
                    g_rho += a * (dlogp_rho - 0.5 * (-2.0 * X * Y + 2.0 * rho * q) / d);
                }
            }
        }

        double* out = ev.grad.data() + i * ParamVector::kPerKernel;
        out[0] = g_ox * g.offset.x * (1.0 - g.offset.x);
        out[1] = g_oy * g.offset.y * (1.0 - g.offset.y);
        if (fit_cov) {
            out[2] = g_sx * -std::expm1(-(sx - kSigmaMin));
            out[3] = g_sy * -std::expm1(-(sy - kSigmaMin));
            const double th = rho / kRhoScale;
            out[4] = g_rho * kRhoScale * (1.0 - th * th);
        }
        for (int c = 0; c < 3; ++c)
            out[5 + c] = g_col[c] * g.color[c] * (1.0 - g.color[c]);
    }
    return ev;
}

} // namespace

void FitConfig::validate() const
{
    if (iterations < 0)
        throw ValidationError("iteration count must be non-negative");
    if (!(learning_rate > 0.0))
        throw ValidationError("learning rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ValidationError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0))
        throw ValidationError("Adam epsilon must be positive");
    if (!(freq_loss_weight >= 0.0))
        throw ValidationError("frequency loss weight must be non-negative");
    if (scale && *scale < 1)
        throw ValidationError("fit scale must be at least 1");
    if (!(truncation_radius >= 1.0))
        throw ValidationError("truncation radius must be at least 1");
}

int FitConfig::effective_scale(Density d) const
{
    if (scale)
        return *scale;
    return d == Density::OnePerPixel ? 1 : 2;
}

RenderConfig FitConfig::render_config(Density d) const
{
    RenderConfig rc;
    rc.scale = effective_scale(d);
    rc.truncation_radius = truncation_radius;
    rc.normalization = normalization;
    rc.clamp_output = false;
    gsvsr::validate(rc, d);
    return rc;
}

ParamVector to_params(const GaussianField& f)
{
    ParamVector p;
    p.values.reserve(f.size() * ParamVector::kPerKernel);
    for (const Gaussian2D& g : f.gaussians()) {
        p.values.push_back(logit(g.offset.x, kOffsetFloor));
        p.values.push_back(logit(g.offset.y, kOffsetFloor));
        p.values.push_back(inv_softplus(g.cov.sigma_x - kSigmaMin));
        p.values.push_back(inv_softplus(g.cov.sigma_y - kSigmaMin));
        p.values.push_back(std::atanh(std::clamp(g.cov.rho / kRhoScale, -1.0 + 1e-9, 1.0 - 1e-9)));
        for (int c = 0; c < 3; ++c)
            p.values.push_back(logit(g.color[c], kColorFloor));
    }
    return p;
}

GaussianField to_field(const ParamVector& p, const GaussianField& shape)
{
    if (p.values.size() != shape.size() * ParamVector::kPerKernel)
        throw ShapeError("parameter vector length does not match the field");
    GaussianField f = shape;
    auto gs = f.gaussians();
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const double* v = p.values.data() + i * ParamVector::kPerKernel;
        for (int j = 0; j < ParamVector::kPerKernel; ++j)
            if (!std::isfinite(v[j]))
                throw NumericalError("non-finite fit parameter");
        Gaussian2D& g = gs[i];
        g.offset = {logistic(v[0]), logistic(v[1])};
        g.cov = {kSigmaMin + softplus(v[2]), kSigmaMin + softplus(v[3]), kRhoScale * std::tanh(v[4])};
        g.color = {logistic(v[5]), logistic(v[6]), logistic(v[7])};
    }
    return f;
}

GaussianField init_field(const FrameBuffer& target, Density d)
{
    if (target.width() <= 0 || target.height() <= 0)
        throw ValidationError("empty target frame");
    GaussianField f(target.width(), target.height(), d, 0.0);
    const int ext = cell_extent(d);
    for (int iy = 0; iy < f.grid_height(); ++iy)
        for (int ix = 0; ix < f.grid_width(); ++ix) {
            Rgb acc{0.0, 0.0, 0.0};
            int n = 0;
            for (int y = ext * iy; y < std::min(ext * iy + ext, target.height()); ++y)
                for (int x = ext * ix; x < std::min(ext * ix + ext, target.width()); ++x) {
                    for (int c = 0; c < 3; ++c)
                        acc[c] += target.at(x, y)[c];
                    ++n;
                }
            Gaussian2D& g = f.at(ix, iy);
            g.offset = {0.5, 0.5};
            g.cov = {0.7, 0.7, 0.0};
            for (int c = 0; c < 3; ++c)
                g.color[c] = std::clamp(acc[c] / n, 0.0, 1.0);
        }
    return f;
}

FrameBuffer render_for_fit(const GaussianField& f, const FitConfig& cfg)
{
    return box_downsample(render_tiled(f, cfg.render_config(f.density())), cfg.effective_scale(f.density()));
}

double frequency_loss(const FrameBuffer& a, const FrameBuffer& b)
{
    require_same_size(a, b);
    const Spectrum fa = luma_spectrum(a);
    const Spectrum fb = luma_spectrum(b);
    double sum = 0.0;
    for (std::size_t k = 0; k < fa.size(); ++k)
        sum += std::abs(std::abs(fa[k]) - std::abs(fb[k]));
    return sum / static_cast<double>(fa.size());
}

LossValue loss(const GaussianField& f, const FrameBuffer& target, const FitConfig& cfg)
{
    return evaluate(f, target, cfg, false).loss;
}

std::vector<double> gradients(const GaussianField& f, const FrameBuffer& target, const FitConfig& cfg)
{
    return evaluate(f, target, cfg, true).grad;
}

GradientCheck gradient_check(const GaussianField& f, const FrameBuffer& target, const FitConfig& cfg, double eps,
                             double kink_tol, double abs_floor)
{
    FitConfig l1_only = cfg;
    l1_only.freq_in_gradients = false;
    const ParamVector base = to_params(f);
    // Both sides are evaluated on the field rebuilt from parameters.
    const GaussianField center_field = to_field(base, f);
    const std::vector<double> analytic = gradients(center_field, target, l1_only);
    const FrameBuffer center = render_for_fit(center_field, cfg);
    auto residuals = [&](const FrameBuffer& r) {
        std::vector<double> out;
        out.reserve(r.pixels().size() * 3);
        for (std::size_t i = 0; i < r.pixels().size(); ++i)
            for (int c = 0; c < 3; ++c)
                out.push_back(r.pixels()[i][c] - target.pixels()[i][c]);
        return out;
    };
    const auto r0 = residuals(center);
    const double n = static_cast<double>(r0.size());

    GradientCheck res;
    ParamVector p = base;
    for (std::size_t j = 0; j < p.values.size(); ++j) {
        p.values[j] = base.values[j] + eps;
        const auto rp = residuals(render_for_fit(to_field(p, f), cfg));
        p.values[j] = base.values[j] - eps;
        const auto rm = residuals(render_for_fit(to_field(p, f), cfg));
        p.values[j] = base.values[j];

        bool kink = false;
        double lp = 0.0, lm = 0.0;
        for (std::size_t i = 0; i < r0.size(); ++i) {
            lp += std::abs(rp[i]);
            lm += std::abs(rm[i]);
            if (rp[i] == rm[i])
                continue;
            const double lo = std::min({rp[i], rm[i], r0[i]});
            const double hi = std::max({rp[i], rm[i], r0[i]});
            if (lo <= kink_tol && hi >= -kink_tol)
                kink = true;
        }
        if (kink) {
            ++res.excluded;
            continue;
        }
        const double fd = (lp - lm) / n / (2.0 * eps);
        const double a = analytic[j];
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), abs_floor});
        res.max_rel_error = std::max(res.max_rel_error, rel);
        ++res.checked;
    }
    return res;
}

FitResult fit_field(const GaussianField& initial, const FrameBuffer& target, const FitConfig& cfg)
{
    cfg.validate();
    FitResult result{initial, {}};
    if (cfg.iterations == 0)
        return result;

    ParamVector p = to_params(initial);
    std::vector<double> m(p.values.size(), 0.0);
    std::vector<double> v(p.values.size(), 0.0);
    // Frozen covariances stay bit-identical; the softplus round trip is not exact.
    auto materialize = [&] {
        GaussianField f = to_field(p, initial);
        if (!cfg.optimize_covariance) {
            auto out = f.gaussians();
            auto in = initial.gaussians();
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i].cov = in[i].cov;
        }
        return f;
    };
    double b1t = 1.0, b2t = 1.0;
    result.loss_trace.reserve(cfg.iterations);
    for (int it = 0; it < cfg.iterations; ++it) {
        const GaussianField f = materialize();
        const Evaluation ev = evaluate(f, target, cfg, true);
        if (!std::isfinite(ev.loss.total))
            throw NumericalError("non-finite loss at iteration " + std::to_string(it));
        result.loss_trace.push_back(ev.loss.total);

        double lr = cfg.learning_rate;
        if (cfg.schedule == LrSchedule::Cosine)
            lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * it / cfg.iterations));
        b1t *= cfg.adam_beta1;
        b2t *= cfg.adam_beta2;
        for (std::size_t j = 0; j < p.values.size(); ++j) {
            const double g = ev.grad[j];
            m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g;
            v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g * g;
            const double mh = m[j] / (1.0 - b1t);
            const double vh = v[j] / (1.0 - b2t);
            p.values[j] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
        }
    }
    result.field = materialize();
    return result;
}

FitResult fit_frame(const FrameBuffer& target, Density d, const FitConfig& cfg)
{
    return fit_field(init_field(target, d), target, cfg);
}

} // namespace gsvsr
