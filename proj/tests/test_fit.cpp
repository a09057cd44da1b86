#include "gsvsr/fit.hpp"

#include "gsvsr/metrics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace gsvsr;
using namespace gsvsr::testing;

namespace {

// O(N^4) direct DFT of luma, unnormalized.
std::vector<std::complex<double>> naive_dft(const FrameBuffer& f)
{
    const int w = f.width(), h = f.height();
    std::vector<std::complex<double>> out(static_cast<std::size_t>(w) * h);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            std::complex<double> acc = 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const Rgb& p = f.at(x, y);
                    const double l = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
                    const double ang = -2.0 * std::numbers::pi * (static_cast<double>(u) * x / w +
                                                                  static_cast<double>(v) * y / h);
                    acc += l * std::polar(1.0, ang);
                }
            out[static_cast<std::size_t>(v) * w + u] = acc;
        }
    return out;
}

double naive_frequency_loss(const FrameBuffer& a, const FrameBuffer& b)
{
    const auto fa = naive_dft(a), fb = naive_dft(b);
    double s = 0.0;
    for (std::size_t k = 0; k < fa.size(); ++k)
        s += std::abs(std::abs(fa[k]) - std::abs(fb[k]));
    return s / static_cast<double>(fa.size());
}

FrameBuffer shifted(const FrameBuffer& f, double d)
{
    FrameBuffer out = f;
    for (Rgb& p : out.pixels())
        for (double& c : p)
            c += d;
    return out;
}

GaussianField small_field(std::mt19937_64& rng, int w, int h)
{
    RandomFieldRanges r;
    r.color_min = 0.05;
    r.color_max = 0.95;
    return random_field(w, h, Density::OnePerPixel, rng, r);
}

} // namespace

TEST(InitField, Examples)
{
    const GaussianField gray = init_field(FrameBuffer(4, 3, {0.5, 0.5, 0.5}), Density::OnePerPixel);
    for (const Gaussian2D& g : gray.gaussians()) {
        EXPECT_EQ(g.offset, (Vec2{0.5, 0.5}));
        EXPECT_EQ(g.cov, (CovParams{0.7, 0.7, 0.0}));
        EXPECT_EQ(g.color, (Rgb{0.5, 0.5, 0.5}));
    }

    FrameBuffer checker(2, 2);
    checker.at(0, 0) = {1, 1, 1};
    checker.at(1, 1) = {1, 1, 1};
    const GaussianField c = init_field(checker, Density::OnePerPixel);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            EXPECT_EQ(c.at(x, y).color, checker.at(x, y));

    std::mt19937_64 rng(51);
    const FrameBuffer t = random_frame(rng, 4, 4);
    const GaussianField q = init_field(t, Density::OnePerFourPixels);
    ASSERT_EQ(q.grid_width(), 2);
    ASSERT_EQ(q.grid_height(), 2);
    for (int c = 0; c < 3; ++c) {
        const double mean = (t.at(2, 2)[c] + t.at(3, 2)[c] + t.at(2, 3)[c] + t.at(3, 3)[c]) / 4.0;
        EXPECT_NEAR(q.at(1, 1).color[c], mean, 1e-15);
    }
    EXPECT_EQ(init_field(t, Density::OnePerPixel), init_field(t, Density::OnePerPixel));
}

TEST(FrequencyLoss, UniformOffsetOnlyMovesDc)
{
    std::mt19937_64 rng(52);
    const FrameBuffer a = random_frame(rng, 8, 6, 0.2, 0.8);
    // Luma shifts by 0.1, so only the DC bin changes, by 0.1 * 48.
    EXPECT_NEAR(frequency_loss(shifted(a, 0.1), a), 0.1 * 48 / 48, 1e-12);
    EXPECT_EQ(frequency_loss(a, a), 0.0);
}

TEST(FrequencyLoss, MatchesNaiveDft)
{
    std::mt19937_64 rng(53);
    for (int i = 0; i < 5; ++i) {
        const FrameBuffer a = random_frame(rng, 8, 8), b = random_frame(rng, 8, 8);
        EXPECT_NEAR(frequency_loss(a, b), naive_frequency_loss(a, b), 1e-12);
    }
    const FrameBuffer a = random_frame(rng, 7, 5), b = random_frame(rng, 7, 5);
    EXPECT_NEAR(frequency_loss(a, b), naive_frequency_loss(a, b), 1e-12);
    EXPECT_THROW(frequency_loss(a, random_frame(rng, 5, 7)), ShapeError);
}

TEST(Loss, Examples)
{
    std::mt19937_64 rng(54);
    const GaussianField f = small_field(rng, 5, 4);
    FitConfig cfg;
    const FrameBuffer exact = render_for_fit(f, cfg);
    const LossValue zero = loss(f, exact, cfg);
    EXPECT_EQ(zero.total, 0.0);
    EXPECT_EQ(zero.l1, 0.0);
    EXPECT_EQ(zero.freq, 0.0);

    const LossValue off = loss(f, shifted(exact, -0.1), cfg);
    EXPECT_NEAR(off.l1, 0.1, 1e-12);
    EXPECT_NEAR(off.freq, 0.1, 1e-12);
    EXPECT_NEAR(off.total, off.l1 + 0.05 * off.freq, 1e-15);

    const FrameBuffer target = random_frame(rng, 5, 4);
    const LossValue r = loss(f, target, cfg);
    double l1 = 0.0;
    for (std::size_t k = 0; k < exact.pixels().size(); ++k)
        for (int c = 0; c < 3; ++c)
            l1 += std::abs(exact.pixels()[k][c] - target.pixels()[k][c]);
    EXPECT_NEAR(r.l1, l1 / (3.0 * 20), 1e-14);
    EXPECT_NEAR(r.freq, naive_frequency_loss(exact, target), 1e-12);

    EXPECT_THROW(loss(f, random_frame(rng, 4, 4), cfg), ShapeError);
}

TEST(Loss, FourPixelDensityFitsAtScaleTwo)
{
    std::mt19937_64 rng(55);
    const GaussianField f = random_field(6, 4, Density::OnePerFourPixels, rng);
    FitConfig cfg;
    EXPECT_EQ(cfg.effective_scale(Density::OnePerFourPixels), 2);
    const FrameBuffer r = render_for_fit(f, cfg);
    EXPECT_EQ(r.width(), 6);
    EXPECT_EQ(r.height(), 4);
    RenderConfig rc = cfg.render_config(Density::OnePerFourPixels);
    const FrameBuffer hi = render_tiled(f, rc);
    for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(r.at(2, 1)[c],
                    0.25 * (hi.at(4, 2)[c] + hi.at(5, 2)[c] + hi.at(4, 3)[c] + hi.at(5, 3)[c]), 1e-15);
}

TEST(Gradients, ZeroAtExactFit)
{
    std::mt19937_64 rng(56);
    const GaussianField f = small_field(rng, 4, 4);
    FitConfig cfg;
    const GaussianField g = to_field(to_params(f), f);
    for (double v : gradients(g, render_for_fit(g, cfg), cfg))
        EXPECT_EQ(v, 0.0);
}

TEST(Gradients, SingleKernelSignMatchesFiniteDifference)
{
    GaussianField f(3, 3, Density::OnePerPixel);
    Gaussian2D& g = f.at(1, 1);
    g.offset = {0.4, 0.5};
    g.cov = {0.6, 0.6, 0.0};
    g.color = {0.8, 0.8, 0.8};
    FitConfig cfg;
    cfg.truncation_radius = 30.0;
    // Target: the same kernel moved toward +x.
    GaussianField moved = f;
    moved.at(1, 1).offset.x = 0.7;
    const FrameBuffer target = render_for_fit(moved, cfg);
    const ParamVector p = to_params(f);
    const GaussianField base = to_field(p, f);
    const auto grad = gradients(base, target, cfg);
    const std::size_t ux = 4 * ParamVector::kPerKernel;
    ParamVector hi = p, lo = p;
    hi.values[ux] += 1e-4;
    lo.values[ux] -= 1e-4;
    const double fd = (loss(to_field(hi, f), target, cfg).l1 - loss(to_field(lo, f), target, cfg).l1) / 2e-4;
    EXPECT_LT(grad[ux], 0.0);
    EXPECT_LT(fd, 0.0);
    EXPECT_NEAR(grad[ux], fd, 1e-3 * std::abs(fd));
}

TEST(Gradients, MatchFiniteDifferencesOnRandomFields)
{
    std::mt19937_64 rng(57);
    FitConfig cfg;
    cfg.truncation_radius = 30.0;
    for (int i = 0; i < 4; ++i) {
        const GaussianField f = small_field(rng, 4, 4);
        const GradientCheck c = gradient_check(f, random_frame(rng, 4, 4), cfg);
        EXPECT_LE(c.max_rel_error, 1e-3);
        EXPECT_GT(c.checked, 100);
    }
}

TEST(Gradients, FourPixelDensity)
{
    std::mt19937_64 rng(58);
    FitConfig cfg;
    cfg.truncation_radius = 30.0;
    RandomFieldRanges r;
    r.color_min = 0.05;
    r.color_max = 0.95;
    const GaussianField f = random_field(6, 6, Density::OnePerFourPixels, rng, r);
    const GradientCheck c = gradient_check(f, random_frame(rng, 6, 6), cfg);
    EXPECT_LE(c.max_rel_error, 1e-3);
    EXPECT_GT(c.checked, 50);
}

TEST(Reparameterization, AnyVectorGivesValidField)
{
    std::mt19937_64 rng(59);
    const GaussianField shape(10, 10, Density::OnePerPixel);
    ParamVector p;
    p.values.resize(shape.size() * ParamVector::kPerKernel);
    for (int i = 0; i < 1000; ++i) {
        const double mag = i % 10 == 0 ? 800.0 : uniform(rng, 0.1, 40.0);
        for (double& v : p.values)
            v = uniform(rng, -mag, mag);
        const GaussianField f = to_field(p, shape);
        ASSERT_TRUE(validate_field(f).empty()) << "vector " << i;
    }
    p.values[3] = std::nan("");
    EXPECT_THROW(to_field(p, shape), NumericalError);
    p.values.pop_back();
    EXPECT_THROW(to_field(p, shape), ShapeError);
}

TEST(Reparameterization, RoundTrip)
{
    std::mt19937_64 rng(60);
    const GaussianField f = small_field(rng, 5, 5);
    const GaussianField g = to_field(to_params(f), f);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const Gaussian2D &a = f.gaussians()[k], &b = g.gaussians()[k];
        EXPECT_NEAR(a.offset.x, b.offset.x, 1e-9);
        EXPECT_NEAR(a.cov.sigma_y, b.cov.sigma_y, 1e-9);
        EXPECT_NEAR(a.cov.rho, b.cov.rho, 1e-9);
        EXPECT_NEAR(a.color[2], b.color[2], 1e-9);
    }
}

TEST(FitFrame, ZeroIterationsReturnsInit)
{
    std::mt19937_64 rng(61);
    const FrameBuffer t = random_frame(rng, 5, 5);
    FitConfig cfg;
    cfg.iterations = 0;
    const FitResult r = fit_frame(t, Density::OnePerPixel, cfg);
    EXPECT_EQ(r.field, init_field(t, Density::OnePerPixel));
    EXPECT_TRUE(r.loss_trace.empty());
}

TEST(FitFrame, DescentOnUniformAndRandomTargets)
{
    std::mt19937_64 rng(62);
    FitConfig cfg;
    cfg.iterations = 60;
    cfg.learning_rate = 0.05;
    for (const FrameBuffer& t : {FrameBuffer(6, 6, {0.3, 0.6, 0.2}), random_frame(rng, 6, 6)})
        for (Density d : {Density::OnePerPixel, Density::OnePerFourPixels}) {
            const FitResult r = fit_frame(t, d, cfg);
            ASSERT_EQ(r.loss_trace.size(), 60u);
            const double initial = loss(init_field(t, d), t, cfg).l1;
            EXPECT_LE(loss(r.field, t, cfg).l1, initial);
            EXPECT_LE(loss(r.field, t, cfg).total, r.loss_trace.front());
            EXPECT_TRUE(validate_field(r.field).empty());
        }
}

TEST(FitFrame, Deterministic)
{
    std::mt19937_64 rng(63);
    const FrameBuffer t = random_frame(rng, 6, 5);
    FitConfig cfg;
    cfg.iterations = 30;
    EXPECT_EQ(fit_frame(t, Density::OnePerPixel, cfg).field, fit_frame(t, Density::OnePerPixel, cfg).field);
}

TEST(FitFrame, FrequencyGradientOptionStillDescends)
{
    std::mt19937_64 rng(64);
    const FrameBuffer t = random_frame(rng, 6, 6);
    FitConfig cfg;
    cfg.iterations = 40;
    cfg.learning_rate = 0.05;
    cfg.freq_in_gradients = true;
    const FitResult r = fit_frame(t, Density::OnePerPixel, cfg);
    EXPECT_LT(loss(r.field, t, cfg).total, r.loss_trace.front());
}

TEST(FitField, FrozenCovarianceStaysBitIdentical)
{
    std::mt19937_64 rng(65);
    const GaussianField f = small_field(rng, 5, 5);
    FitConfig cfg;
    cfg.iterations = 20;
    cfg.optimize_covariance = false;
    const FitResult r = fit_field(f, random_frame(rng, 5, 5), cfg);
    for (std::size_t k = 0; k < f.size(); ++k)
        EXPECT_EQ(r.field.gaussians()[k].cov, f.gaussians()[k].cov);
}

TEST(FitConfigCheck, RejectsBadValues)
{
    FitConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = {};
    cfg.iterations = -1;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = {};
    cfg.freq_loss_weight = -0.1;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = {};
    cfg.scale = 1;
    EXPECT_THROW(cfg.render_config(Density::OnePerFourPixels), ValidationError);
}
