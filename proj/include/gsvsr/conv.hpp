#pragma once

// Dense 2-D convolution with zero padding and stride 1, the building block of
// the loadable linear heads (covariance fuser, fusion head, decoder).

#include "gsvsr/core.hpp"

#include <vector>

namespace gsvsr {

struct ConvWeights {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_size = 1;
    std::vector<double> weights; // (out, in, ky, kx), row-major
    std::vector<double> bias;    // out

    static ConvWeights zeros(int out_channels, int in_channels, int kernel_size);

    double& w(int o, int i, int ky, int kx) { return weights[index(o, i, ky, kx)]; }
    double w(int o, int i, int ky, int kx) const { return weights[index(o, i, ky, kx)]; }

    /// Throws ShapeError on inconsistent sizes or an even kernel,
    /// NumericalError on non-finite entries.
    void validate() const;

    friend bool operator==(const ConvWeights&, const ConvWeights&) = default;

private:
    std::size_t index(int o, int i, int ky, int kx) const
    {
        return ((static_cast<std::size_t>(o) * in_channels + i) * kernel_size + ky) * kernel_size + kx;
    }
};

FeatureMap conv2d_same(const FeatureMap& input, const ConvWeights& w);

} // namespace gsvsr
