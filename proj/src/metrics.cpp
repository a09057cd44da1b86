#include "gsvsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gsvsr {

namespace {

void require_same_size(const FrameBuffer& a, const FrameBuffer& b)
{
    if (a.width() != b.width() || a.height() != b.height())
        throw ShapeError("frames differ in size");
}

std::vector<double> flat_luma(const FrameBuffer& f)
{
    std::vector<double> y;
    y.reserve(f.pixels().size());
    for (const Rgb& p : f.pixels())
        y.push_back(luma(p));
    return y;
}

std::vector<double> flat_cov(const GaussianField& f)
{
    std::vector<double> v;
    v.reserve(f.size() * 3);
    for (const Gaussian2D& g : f.gaussians()) {
        v.push_back(g.cov.sigma_x);
        v.push_back(g.cov.sigma_y);
        v.push_back(g.cov.rho);
    }
    return v;
}

} // namespace

FeatureMap to_luma(const FrameBuffer& frame)
{
    FeatureMap y(frame.width(), frame.height(), 1);
    for (int py = 0; py < frame.height(); ++py)
        for (int px = 0; px < frame.width(); ++px)
            y.at(px, py, 0) = luma(frame.at(px, py));
    return y;
}

double psnr_y(const FrameBuffer& a, const FrameBuffer& b)
{
    require_same_size(a, b);
    const auto ya = flat_luma(a);
    const auto yb = flat_luma(b);
    double mse = 0.0;
    for (std::size_t i = 0; i < ya.size(); ++i)
        mse += (ya[i] - yb[i]) * (ya[i] - yb[i]);
    mse /= static_cast<double>(ya.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

double ssim_y(const FrameBuffer& a, const FrameBuffer& b)
{
    require_same_size(a, b);
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    if (a.width() < kWin || a.height() < kWin)
        throw ValidationError("SSIM needs frames of at least 11x11");

    double win[kWin][kWin];
    double wsum = 0.0;
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x) {
            const double dx = x - kWin / 2;
            const double dy = y - kWin / 2;
            win[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            wsum += win[y][x];
        }
    for (auto& row : win)
        for (double& v : row)
            v /= wsum;

    const FeatureMap ya = to_luma(a);
    const FeatureMap yb = to_luma(b);
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    double total = 0.0;
    int count = 0;
    for (int oy = 0; oy + kWin <= a.height(); ++oy) {
        for (int ox = 0; ox + kWin <= a.width(); ++ox) {
            double mu_a = 0.0, mu_b = 0.0;
            for (int y = 0; y < kWin; ++y)
                for (int x = 0; x < kWin; ++x) {
                    mu_a += win[y][x] * ya.at(ox + x, oy + y, 0);
                    mu_b += win[y][x] * yb.at(ox + x, oy + y, 0);
                }
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (int y = 0; y < kWin; ++y)
                for (int x = 0; x < kWin; ++x) {
                    const double da = ya.at(ox + x, oy + y, 0) - mu_a;
                    const double db = yb.at(ox + x, oy + y, 0) - mu_b;
                    va += win[y][x] * da * da;
                    vb += win[y][x] * db * db;
                    cov += win[y][x] * da * db;
                }
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                     ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / count;
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw ShapeError("correlation inputs differ in length");
    if (a.size() < 2)
        throw ValidationError("correlation needs at least two samples");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw NumericalError("correlation of a constant input is undefined");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double cosine(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw ShapeError("cosine inputs differ in length");
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa += a[i] * a[i];
        bb += b[i] * b[i];
        ab += a[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0)
        throw NumericalError("cosine of a zero vector is undefined");
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

StabilityReport stability_report(std::span<const FrameBuffer> frames, std::span<const GaussianField> fields)
{
    if (frames.size() != fields.size())
        throw ShapeError("frame and field sequences differ in length");
    if (frames.size() < 2)
        throw ValidationError("stability report needs at least two frames");

    const auto y0 = flat_luma(frames[0]);
    const auto c0 = flat_cov(fields[0]);
    StabilityReport r;
    for (std::size_t g = 0; g < frames.size(); ++g) {
        r.gaps.push_back(static_cast<int>(g));
        if (g == 0) {
            r.pixel_pearson.push_back(1.0);
            r.pixel_cosine.push_back(1.0);
            r.cov_pearson.push_back(1.0);
            r.cov_cosine.push_back(1.0);
            continue;
        }
        const auto yg = flat_luma(frames[g]);
        const auto cg = flat_cov(fields[g]);
        r.pixel_pearson.push_back(pearson(y0, yg));
        r.pixel_cosine.push_back(cosine(y0, yg));
        r.cov_pearson.push_back(pearson(c0, cg));
        r.cov_cosine.push_back(cosine(c0, cg));
    }
    return r;
}

} // namespace gsvsr
