#pragma once

// Covariance prior bank: a fixed set of covariance triples. Intermediate
// covariances are never predicted directly; a fuser emits per-cell logits over
// the bank and the result is the softmax-weighted mean of bank entries, which
// keeps every output inside the bank's convex hull.

#include "gsvsr/conv.hpp"
#include "gsvsr/core.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsvsr {

struct CpbBank {
    std::vector<CovParams> entries;

    int size() const noexcept { return static_cast<int>(entries.size()); }
    /// Throws ValidationError on an empty bank, invalid or duplicate entries.
    void validate() const;

    friend bool operator==(const CpbBank&, const CpbBank&) = default;
};

/// Cartesian product of the levels, ordered lexicographically by
/// (sigma_x, sigma_y, rho) in the order the levels are given.
CpbBank build_bank(std::span<const double> sigma_levels, std::span<const double> rho_levels);

std::vector<double> default_sigma_levels(); ///< 8 log-spaced values over [0.3, 3]
std::vector<double> default_rho_levels();   ///< 5 uniform values over [-0.6, 0.6]
CpbBank default_bank();                     ///< K = 320

/// Covariance parameters on the field grid.
struct CovField {
    int grid_w = 0;
    int grid_h = 0;
    std::vector<CovParams> cells;

    CovField() = default;
    CovField(int w, int h, CovParams fill = {});
    CovParams& at(int ix, int iy) { return cells[static_cast<std::size_t>(iy) * grid_w + ix]; }
    const CovParams& at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * grid_w + ix]; }

    friend bool operator==(const CovField&, const CovField&) = default;
};

CovField cov_field_of(const GaussianField& f);

/// Softmax over each cell's logits, then a parameter-space convex combination
/// of bank entries.
CovField resample(const LogitField& e, const CpbBank& bank);

/// Maps the 7-channel image (sx0, sy0, rho0, sx1, sy1, rho1, t) to K logits.
struct FuserWeights {
    static constexpr int kInChannels = 7;
    ConvWeights conv;

    int k() const noexcept { return conv.out_channels; }
    void validate() const;

    friend bool operator==(const FuserWeights&, const FuserWeights&) = default;
};

LogitField fuse(const CovField& cov0, const CovField& cov1, double t, const FuserWeights& w);

inline constexpr double kOneHotLogit = 50.0;

/// Index of the entry nearest to p in (log sx, log sy, atanh rho); lowest index on ties.
int nearest_bank_index(const CovParams& p, const CpbBank& bank);
/// One-hot logits (+50 at nearest_bank_index, 0 elsewhere).
std::vector<double> project_to_bank(const CovParams& p, const CpbBank& bank);
LogitField project_to_bank(const CovField& c, const CpbBank& bank);

/// Default fuser without learned weights. Each endpoint covariance is snapped
/// to its nearest entry and the two one-hots are mixed with weights (1 - t, t),
/// so resample() returns (1 - t) q_i0 + t q_i1: the endpoint entry itself at
/// t = 0 and t = 1, a parameter-space blend in between.
LogitField blend_endpoint_logits(const CovField& cov0, const CovField& cov1, double t, const CpbBank& bank);

struct CalibrationOptions {
    int samples = 4096;
    double sigma_jitter = 0.15; ///< std of log-sigma difference between endpoints
    double rho_jitter = 0.1;
    std::uint64_t seed = 7;
};

/// Conv-form fuser with 1x1 kernels that can be stored as "fuser" weights,
/// built offline without training:
///  1. sample endpoint pairs (p0, p1) around the bank range with small
///     temporal jitter, plus every pair mirrored as (p1, p0, 1 - t);
///  2. least-squares fit an affine map A [p0, p1, t, 1] -> (1 - t) p0 + t p1;
///  3. turn "nearest entry to A x" into logits: beta (2 q_k . A x - |q_k|^2),
///     which ranks entries exactly as negative squared distance, with beta
///     chosen so the closest pair of bank entries is separated by +50.
/// A linear map cannot represent the t-weighted product, so the fit settles
/// near the endpoint midpoint; the mirrored samples make it symmetric. The
/// pipeline default is therefore blend_endpoint_logits.
FuserWeights calibrate_baseline_fuser(const CpbBank& bank, const CalibrationOptions& opt = {});

} // namespace gsvsr
