#include "gsvsr/cpb.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <tuple>

namespace gsvsr {

void CpbBank::validate() const
{
    if (entries.empty())
        throw ValidationError("covariance bank is empty");
    std::set<std::tuple<double, double, double>> seen;
    for (const CovParams& e : entries) {
        require_valid(e);
        if (!seen.emplace(e.sigma_x, e.sigma_y, e.rho).second)
            throw ValidationError("covariance bank has duplicate entries");
    }
}

CpbBank build_bank(std::span<const double> sigma_levels, std::span<const double> rho_levels)
{
    if (sigma_levels.empty() || rho_levels.empty())
        throw ValidationError("bank level lists must be non-empty");
    for (double s : sigma_levels)
        if (!std::isfinite(s) || s < kSigmaMin)
            throw ValidationError("invalid sigma level " + std::to_string(s));
    for (double r : rho_levels)
        if (!std::isfinite(r) || std::abs(r) >= kRhoLimit)
            throw ValidationError("invalid rho level " + std::to_string(r));

    CpbBank bank;
    bank.entries.reserve(sigma_levels.size() * sigma_levels.size() * rho_levels.size());
    for (double sx : sigma_levels)
        for (double sy : sigma_levels)
            for (double r : rho_levels)
                bank.entries.push_back({sx, sy, r});
    bank.validate();
    return bank;
}

std::vector<double> default_sigma_levels()
{
    std::vector<double> v(8);
    for (int k = 0; k < 8; ++k)
        v[k] = 0.3 * std::pow(10.0, k / 7.0);
    return v;
}

std::vector<double> default_rho_levels()
{
    std::vector<double> v(5);
    for (int k = 0; k < 5; ++k)
        v[k] = -0.6 + 0.3 * k;
    return v;
}

CpbBank default_bank()
{
    const auto s = default_sigma_levels();
    const auto r = default_rho_levels();
    return build_bank(s, r);
}

CovField::CovField(int w, int h, CovParams fill) : grid_w(w), grid_h(h)
{
    if (w <= 0 || h <= 0)
        throw ValidationError("covariance field dimensions must be positive");
    cells.assign(static_cast<std::size_t>(w) * h, fill);
}

CovField cov_field_of(const GaussianField& f)
{
    CovField c(f.grid_width(), f.grid_height());
    auto gs = f.gaussians();
    for (std::size_t i = 0; i < gs.size(); ++i)
        c.cells[i] = gs[i].cov;
    return c;
}

CovField resample(const LogitField& e, const CpbBank& bank)
{
    if (e.k() != bank.size())
        throw ShapeError("logit field has " + std::to_string(e.k()) + " channels, bank has " +
                         std::to_string(bank.size()) + " entries");
    CovField out(e.grid_width(), e.grid_height());
    for (int iy = 0; iy < e.grid_height(); ++iy) {
        for (int ix = 0; ix < e.grid_width(); ++ix) {
            const auto w = softmax(e.cell(ix, iy));
            CovParams p{0.0, 0.0, 0.0};
            for (std::size_t k = 0; k < w.size(); ++k) {
                p.sigma_x += w[k] * bank.entries[k].sigma_x;
                p.sigma_y += w[k] * bank.entries[k].sigma_y;
                p.rho += w[k] * bank.entries[k].rho;
            }
            out.at(ix, iy) = p;
        }
    }
    return out;
}

void FuserWeights::validate() const
{
    conv.validate();
    if (conv.in_channels != kInChannels)
        throw ShapeError("fuser expects 7 input channels, got " + std::to_string(conv.in_channels));
}

LogitField fuse(const CovField& cov0, const CovField& cov1, double t, const FuserWeights& w)
{
    if (cov0.grid_w != cov1.grid_w || cov0.grid_h != cov1.grid_h)
        throw ShapeError("endpoint covariance grids differ");
    if (!(t >= 0.0 && t <= 1.0))
        throw ValidationError("timestamp outside [0, 1]");
    w.validate();

    FeatureMap in(cov0.grid_w, cov0.grid_h, FuserWeights::kInChannels);
    for (int iy = 0; iy < cov0.grid_h; ++iy) {
        for (int ix = 0; ix < cov0.grid_w; ++ix) {
            const CovParams& a = cov0.at(ix, iy);
            const CovParams& b = cov1.at(ix, iy);
            const double v[7] = {a.sigma_x, a.sigma_y, a.rho, b.sigma_x, b.sigma_y, b.rho, t};
            for (int c = 0; c < 7; ++c)
                in.at(ix, iy, c) = v[c];
        }
    }
    const FeatureMap out = conv2d_same(in, w.conv);
    LogitField logits(cov0.grid_w, cov0.grid_h, w.k());
    std::copy(out.data().begin(), out.data().end(), logits.data().begin());
    return logits;
}

namespace {

std::array<double, 3> embed(const CovParams& p)
{
    return {std::log(p.sigma_x), std::log(p.sigma_y), std::atanh(p.rho)};
}

} // namespace

int nearest_bank_index(const CovParams& p, const CpbBank& bank)
{
    require_valid(p);
    if (bank.entries.empty())
        throw ValidationError("covariance bank is empty");
    const auto q = embed(p);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < bank.size(); ++k) {
        const auto e = embed(bank.entries[k]);
        const double d = (q[0] - e[0]) * (q[0] - e[0]) + (q[1] - e[1]) * (q[1] - e[1]) + (q[2] - e[2]) * (q[2] - e[2]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

std::vector<double> project_to_bank(const CovParams& p, const CpbBank& bank)
{
    std::vector<double> logits(bank.entries.size(), 0.0);
    logits[nearest_bank_index(p, bank)] = kOneHotLogit;
    return logits;
}

LogitField project_to_bank(const CovField& c, const CpbBank& bank)
{
    LogitField out(c.grid_w, c.grid_h, bank.size());
    for (int iy = 0; iy < c.grid_h; ++iy)
        for (int ix = 0; ix < c.grid_w; ++ix)
            out.cell(ix, iy)[nearest_bank_index(c.at(ix, iy), bank)] = kOneHotLogit;
    return out;
}

LogitField blend_endpoint_logits(const CovField& cov0, const CovField& cov1, double t, const CpbBank& bank)
{
    if (cov0.grid_w != cov1.grid_w || cov0.grid_h != cov1.grid_h)
        throw ShapeError("endpoint covariance grids differ");
    if (!(t >= 0.0 && t <= 1.0))
        throw ValidationError("timestamp outside [0, 1]");
    LogitField out(cov0.grid_w, cov0.grid_h, bank.size());
    for (int iy = 0; iy < cov0.grid_h; ++iy)
        for (int ix = 0; ix < cov0.grid_w; ++ix) {
            const int i0 = nearest_bank_index(cov0.at(ix, iy), bank);
            const int i1 = nearest_bank_index(cov1.at(ix, iy), bank);
            std::span<double> cell = out.cell(ix, iy);
            if (i0 == i1) {
                cell[i0] = kOneHotLogit;
                continue;
            }
            // log of the mixture weight, shifted so a lone endpoint matches project_to_bank
            if (t < 1.0)
                cell[i0] = kOneHotLogit + std::log1p(-t);
            if (t > 0.0)
                cell[i1] = kOneHotLogit + std::log(t);
        }
    return out;
}

FuserWeights calibrate_baseline_fuser(const CpbBank& bank, const CalibrationOptions& opt)
{
    bank.validate();
    if (bank.size() < 2)
        throw ValidationError("baseline fuser needs at least two bank entries");
    if (opt.samples < 16)
        throw ValidationError("too few calibration samples");

    double smin = std::numeric_limits<double>::infinity(), smax = 0.0;
    double rmin = 1.0, rmax = -1.0;
    for (const CovParams& e : bank.entries) {
        smin = std::min({smin, e.sigma_x, e.sigma_y});
        smax = std::max({smax, e.sigma_x, e.sigma_y});
        rmin = std::min(rmin, e.rho);
        rmax = std::max(rmax, e.rho);
    }

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw_sigma = [&] { return smin * std::pow(smax / smin, unit(rng)); };
    auto draw_rho = [&] { return rmin + (rmax - rmin) * unit(rng); };

    const int n = opt.samples;
    Eigen::MatrixXd x(2 * n, 8);
    Eigen::MatrixXd y(2 * n, 3);
    for (int i = 0; i < n; ++i) {
        const double p0[3] = {draw_sigma(), draw_sigma(), draw_rho()};
        const double p1[3] = {p0[0] * std::exp(opt.sigma_jitter * gauss(rng)),
                              p0[1] * std::exp(opt.sigma_jitter * gauss(rng)),
                              std::clamp(p0[2] + opt.rho_jitter * gauss(rng), -0.99, 0.99)};
        const double t = unit(rng);
        for (int m = 0; m < 3; ++m) {
            x(2 * i, m) = p0[m];
            x(2 * i, 3 + m) = p1[m];
            x(2 * i + 1, m) = p1[m];
            x(2 * i + 1, 3 + m) = p0[m];
            y(2 * i, m) = (1.0 - t) * p0[m] + t * p1[m];
            y(2 * i + 1, m) = y(2 * i, m);
        }
        x(2 * i, 6) = t;
        x(2 * i + 1, 6) = 1.0 - t;
        x(2 * i, 7) = 1.0;
        x(2 * i + 1, 7) = 1.0;
    }
    // 8x3 solution: rows 0..6 are channel coefficients, row 7 the intercept.
    const Eigen::MatrixXd a = x.colPivHouseholderQr().solve(y);

    const int k = bank.size();
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const CovParams& p = bank.entries[i];
            const CovParams& q = bank.entries[j];
            const double d = (p.sigma_x - q.sigma_x) * (p.sigma_x - q.sigma_x) +
                             (p.sigma_y - q.sigma_y) * (p.sigma_y - q.sigma_y) + (p.rho - q.rho) * (p.rho - q.rho);
            min_gap = std::min(min_gap, d);
        }
    }
    const double beta = kOneHotLogit / min_gap;

    FuserWeights w;
    w.conv = ConvWeights::zeros(k, FuserWeights::kInChannels, 1);
    for (int o = 0; o < k; ++o) {
        const CovParams& e = bank.entries[o];
        const double q[3] = {e.sigma_x, e.sigma_y, e.rho};
        for (int c = 0; c < FuserWeights::kInChannels; ++c) {
            double v = 0.0;
            for (int m = 0; m < 3; ++m)
                v += q[m] * a(c, m);
            w.conv.w(o, c, 0, 0) = 2.0 * beta * v;
        }
        double b = 0.0;
        for (int m = 0; m < 3; ++m)
            b += q[m] * (2.0 * a(7, m) - q[m]);
        w.conv.bias[o] = beta * b;
    }
    w.validate();
    return w;
}

} // namespace gsvsr
