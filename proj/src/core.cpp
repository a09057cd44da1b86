#include "gsvsr/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gsvsr {

std::optional<std::string> cov_violation(const CovParams& p)
{
    if (!std::isfinite(p.sigma_x) || !std::isfinite(p.sigma_y) || !std::isfinite(p.rho))
        return "non-finite covariance parameter";
    if (p.sigma_x < kSigmaMin)
        return "sigma_x below " + std::to_string(kSigmaMin);
    if (p.sigma_y < kSigmaMin)
        return "sigma_y below " + std::to_string(kSigmaMin);
    if (std::abs(p.rho) >= kRhoLimit)
        return "|rho| not strictly below 1";
    return std::nullopt;
}

void require_valid(const CovParams& p)
{
    if (auto v = cov_violation(p)) {
        std::ostringstream os;
        os << "invalid covariance (" << p.sigma_x << ", " << p.sigma_y << ", " << p.rho << "): " << *v;
        throw ValidationError(os.str());
    }
}

Sym2 cov_matrix(const CovParams& p)
{
    require_valid(p);
    return {p.sigma_x * p.sigma_x, p.rho * p.sigma_x * p.sigma_y, p.sigma_y * p.sigma_y};
}

double cov_det(const CovParams& p)
{
    require_valid(p);
    const double sxsy = p.sigma_x * p.sigma_y;
    return sxsy * sxsy * (1.0 - p.rho * p.rho);
}

Sym2 cov_inverse(const CovParams& p)
{
    require_valid(p);
    // Closed form in (sigma, rho) avoids cancellation in det.
    const double k = 1.0 / (1.0 - p.rho * p.rho);
    return {k / (p.sigma_x * p.sigma_x), -k * p.rho / (p.sigma_x * p.sigma_y), k / (p.sigma_y * p.sigma_y)};
}

int cell_extent(Density d)
{
    return d == Density::OnePerPixel ? 1 : 2;
}

Vec2 cell_center(CellIndex c, Density d)
{
    if (d == Density::OnePerPixel)
        return {c.ix + 0.5, c.iy + 0.5};
    return {2.0 * c.ix + 1.0, 2.0 * c.iy + 1.0};
}

int grid_width(int lr_width, Density d)
{
    return d == Density::OnePerPixel ? lr_width : (lr_width + 1) / 2;
}

int grid_height(int lr_height, Density d)
{
    return d == Density::OnePerPixel ? lr_height : (lr_height + 1) / 2;
}

GaussianField::GaussianField(int lr_width, int lr_height, Density density, double timestamp)
    : lr_width_(lr_width), lr_height_(lr_height), density_(density), timestamp_(timestamp)
{
    if (lr_width <= 0 || lr_height <= 0)
        throw ValidationError("field dimensions must be positive");
    grid_w_ = gsvsr::grid_width(lr_width, density);
    grid_h_ = gsvsr::grid_height(lr_height, density);
    gaussians_.resize(static_cast<std::size_t>(grid_w_) * grid_h_);
    for (int iy = 0; iy < grid_h_; ++iy)
        for (int ix = 0; ix < grid_w_; ++ix)
            at(ix, iy).anchor = {ix, iy};
}

Vec2 GaussianField::center(const Gaussian2D& g) const
{
    const Vec2 c = cell_center(g.anchor, density_);
    return {c.x + g.offset.x, c.y + g.offset.y};
}

std::vector<ValidationIssue> validate_field(const GaussianField& f, double offset_limit)
{
    std::vector<ValidationIssue> issues;
    if (!std::isfinite(f.timestamp()) || f.timestamp() < 0.0 || f.timestamp() > 1.0)
        issues.push_back({0, "timestamp", f.timestamp()});

    auto gs = f.gaussians();
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const Gaussian2D& g = gs[i];
        const int ix = static_cast<int>(i % f.grid_width());
        const int iy = static_cast<int>(i / f.grid_width());
        if (g.anchor.ix != ix || g.anchor.iy != iy)
            issues.push_back({i, "anchor", static_cast<double>(g.anchor.ix)});

        auto check_offset = [&](const char* name, double v) {
            if (!(v >= 0.0 && v <= offset_limit))
                issues.push_back({i, name, v});
        };
        check_offset("offset.x", g.offset.x);
        check_offset("offset.y", g.offset.y);

        if (!(std::isfinite(g.cov.sigma_x) && g.cov.sigma_x >= kSigmaMin))
            issues.push_back({i, "sigma_x", g.cov.sigma_x});
        if (!(std::isfinite(g.cov.sigma_y) && g.cov.sigma_y >= kSigmaMin))
            issues.push_back({i, "sigma_y", g.cov.sigma_y});
        if (!(std::abs(g.cov.rho) < kRhoLimit))
            issues.push_back({i, "rho", g.cov.rho});

        static constexpr const char* kColorNames[3] = {"color.r", "color.g", "color.b"};
        for (int c = 0; c < 3; ++c)
            if (!(g.color[c] >= 0.0 && g.color[c] <= 1.0))
                issues.push_back({i, kColorNames[c], g.color[c]});
    }
    return issues;
}

void require_valid(const GaussianField& f, double offset_limit)
{
    auto issues = validate_field(f, offset_limit);
    if (issues.empty())
        return;
    const auto& first = issues.front();
    std::ostringstream os;
    os << "invalid Gaussian field: cell " << first.cell << " " << first.field << " = " << first.value;
    if (issues.size() > 1)
        os << " (+" << issues.size() - 1 << " more)";
    throw ValidationError(os.str());
}

FrameBuffer::FrameBuffer(int width, int height, Rgb fill)
    : width_(width), height_(height)
{
    if (width <= 0 || height <= 0)
        throw ValidationError("frame dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

FlowField::FlowField(int width, int height, Vec2 fill)
    : width_(width), height_(height)
{
    if (width <= 0 || height <= 0)
        throw ValidationError("flow dimensions must be positive");
    vectors_.assign(static_cast<std::size_t>(width) * height, fill);
}

FeatureMap::FeatureMap(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels)
{
    if (width <= 0 || height <= 0 || channels <= 0)
        throw ValidationError("feature map dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

LogitField::LogitField(int grid_w, int grid_h, int k, double fill)
    : grid_w_(grid_w), grid_h_(grid_h), k_(k)
{
    if (grid_w <= 0 || grid_h <= 0 || k <= 0)
        throw ValidationError("logit field dimensions must be positive");
    logits_.assign(static_cast<std::size_t>(grid_w) * grid_h * k, fill);
}

std::vector<double> softmax(std::span<const double> logits)
{
    std::vector<double> w(logits.begin(), logits.end());
    if (w.empty())
        return w;
    double top = w[0];
    for (double v : w) {
        if (!std::isfinite(v))
            throw NumericalError("non-finite logit");
        top = std::max(top, v);
    }
    double sum = 0.0;
    for (double& v : w) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : w)
        v /= sum;
    return w;
}

void require_finite(const FrameBuffer& f)
{
    for (const Rgb& p : f.pixels())
        for (double v : p)
            if (!std::isfinite(v))
                throw NumericalError("non-finite value in frame buffer");
}

void require_finite(const FlowField& f)
{
    for (const Vec2& v : f.vectors())
        if (!std::isfinite(v.x) || !std::isfinite(v.y))
            throw NumericalError("non-finite value in flow field");
}

void require_finite(const FeatureMap& f)
{
    for (double v : f.data())
        if (!std::isfinite(v))
            throw NumericalError("non-finite value in feature map");
}

} // namespace gsvsr
