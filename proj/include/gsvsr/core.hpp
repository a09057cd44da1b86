#pragma once

// Domain types shared by every stage: covariance parameters, Gaussian kernels,
// the per-frame kernel grid, and dense image/flow/feature buffers.
//
// Coordinates are y-down, storage is row-major. Kernel positions are in
// low-resolution (LR) pixel units, with pixel (x, y) covering [x, x+1) x [y, y+1).

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsvsr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Mismatched dimensions, channel counts or bank sizes.
class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Malformed serialized data. Carries the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kRhoLimit = 1.0 - 1e-6;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

using Rgb = std::array<double, 3>;

/// (sigma_x, sigma_y, rho) form of a 2x2 SPD covariance.
struct CovParams {
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double rho = 0.0;
    friend bool operator==(const CovParams&, const CovParams&) = default;
};

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

/// Returns a description of the first broken invariant, if any.
std::optional<std::string> cov_violation(const CovParams& p);
void require_valid(const CovParams& p);

Sym2 cov_matrix(const CovParams& p);
double cov_det(const CovParams& p);
Sym2 cov_inverse(const CovParams& p);

enum class Density { OnePerPixel, OnePerFourPixels };

struct CellIndex {
    int ix = 0;
    int iy = 0;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct Gaussian2D {
    CellIndex anchor;
    Vec2 offset{0.5, 0.5};
    CovParams cov;
    Rgb color{0.0, 0.0, 0.0};
    friend bool operator==(const Gaussian2D&, const Gaussian2D&) = default;
};

/// LR pixels per grid cell along each axis.
int cell_extent(Density d);
Vec2 cell_center(CellIndex c, Density d);
int grid_width(int lr_width, Density d);
int grid_height(int lr_height, Density d);

class GaussianField {
public:
    GaussianField() = default;
    /// Creates a full grid of default kernels with anchors filled in.
    GaussianField(int lr_width, int lr_height, Density density, double timestamp = 0.0);

    int lr_width() const noexcept { return lr_width_; }
    int lr_height() const noexcept { return lr_height_; }
    int grid_width() const noexcept { return grid_w_; }
    int grid_height() const noexcept { return grid_h_; }
    Density density() const noexcept { return density_; }
    double timestamp() const noexcept { return timestamp_; }
    void set_timestamp(double t) { timestamp_ = t; }

    std::size_t size() const noexcept { return gaussians_.size(); }
    std::span<const Gaussian2D> gaussians() const noexcept { return gaussians_; }
    std::span<Gaussian2D> gaussians() noexcept { return gaussians_; }
    Gaussian2D& at(int ix, int iy) { return gaussians_[static_cast<std::size_t>(iy) * grid_w_ + ix]; }
    const Gaussian2D& at(int ix, int iy) const {
        return gaussians_[static_cast<std::size_t>(iy) * grid_w_ + ix];
    }

    /// Absolute kernel center in LR pixel coordinates.
    Vec2 center(const Gaussian2D& g) const;

    friend bool operator==(const GaussianField&, const GaussianField&) = default;

private:
    int lr_width_ = 0;
    int lr_height_ = 0;
    int grid_w_ = 0;
    int grid_h_ = 0;
    Density density_ = Density::OnePerPixel;
    double timestamp_ = 0.0;
    std::vector<Gaussian2D> gaussians_;
};

struct ValidationIssue {
    std::size_t cell;
    std::string field;
    double value;
};

/// Lists every broken invariant of the field. Offsets are checked against
/// [0, offset_limit]; the default limit 1 is the pre-window range.
std::vector<ValidationIssue> validate_field(const GaussianField& f, double offset_limit = 1.0);
/// Throws ValidationError naming the first issue, if any.
void require_valid(const GaussianField& f, double offset_limit = 1.0);

class FrameBuffer {
public:
    FrameBuffer() = default;
    FrameBuffer(int width, int height, Rgb fill = {0.0, 0.0, 0.0});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    const Rgb& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<Rgb> pixels() noexcept { return pixels_; }
    std::span<const Rgb> pixels() const noexcept { return pixels_; }

    friend bool operator==(const FrameBuffer&, const FrameBuffer&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

class FlowField {
public:
    FlowField() = default;
    FlowField(int width, int height, Vec2 fill = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    Vec2& at(int x, int y) { return vectors_[static_cast<std::size_t>(y) * width_ + x]; }
    const Vec2& at(int x, int y) const { return vectors_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<Vec2> vectors() noexcept { return vectors_; }
    std::span<const Vec2> vectors() const noexcept { return vectors_; }

    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Vec2> vectors_;
};

class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int width, int height, int channels, double fill = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    double& at(int x, int y, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int x, int y, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Per-cell vectors of K unnormalized log-weights.
class LogitField {
public:
    LogitField() = default;
    LogitField(int grid_w, int grid_h, int k, double fill = 0.0);

    int grid_width() const noexcept { return grid_w_; }
    int grid_height() const noexcept { return grid_h_; }
    int k() const noexcept { return k_; }
    std::span<double> cell(int ix, int iy)
    {
        return {logits_.data() + (static_cast<std::size_t>(iy) * grid_w_ + ix) * k_, static_cast<std::size_t>(k_)};
    }
    std::span<const double> cell(int ix, int iy) const
    {
        return {logits_.data() + (static_cast<std::size_t>(iy) * grid_w_ + ix) * k_, static_cast<std::size_t>(k_)};
    }
    std::span<double> data() noexcept { return logits_; }
    std::span<const double> data() const noexcept { return logits_; }

    friend bool operator==(const LogitField&, const LogitField&) = default;

private:
    int grid_w_ = 0;
    int grid_h_ = 0;
    int k_ = 0;
    std::vector<double> logits_;
};

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

void require_finite(const FrameBuffer& f);
void require_finite(const FlowField& f);
void require_finite(const FeatureMap& f);

} // namespace gsvsr
