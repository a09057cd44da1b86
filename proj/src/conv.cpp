#include "gsvsr/conv.hpp"

#include <cmath>
#include <string>

namespace gsvsr {

ConvWeights ConvWeights::zeros(int out_channels, int in_channels, int kernel_size)
{
    ConvWeights w;
    w.out_channels = out_channels;
    w.in_channels = in_channels;
    w.kernel_size = kernel_size;
    w.weights.assign(static_cast<std::size_t>(out_channels) * in_channels * kernel_size * kernel_size, 0.0);
    w.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
    return w;
}

void ConvWeights::validate() const
{
    if (out_channels <= 0 || in_channels <= 0)
        throw ShapeError("conv channel counts must be positive");
    if (kernel_size <= 0 || kernel_size % 2 == 0)
        throw ShapeError("conv kernel size must be odd and positive, got " + std::to_string(kernel_size));
    const std::size_t expected =
        static_cast<std::size_t>(out_channels) * in_channels * kernel_size * kernel_size;
    if (weights.size() != expected)
        throw ShapeError("conv weight count " + std::to_string(weights.size()) + " != " + std::to_string(expected));
    if (bias.size() != static_cast<std::size_t>(out_channels))
        throw ShapeError("conv bias count " + std::to_string(bias.size()) + " != " + std::to_string(out_channels));
    for (double v : weights)
        if (!std::isfinite(v))
            throw NumericalError("non-finite conv weight");
    for (double v : bias)
        if (!std::isfinite(v))
            throw NumericalError("non-finite conv bias");
}

FeatureMap conv2d_same(const FeatureMap& input, const ConvWeights& w)
{
    w.validate();
    if (input.channels() != w.in_channels)
        throw ShapeError("conv expects " + std::to_string(w.in_channels) + " input channels, got " +
                         std::to_string(input.channels()));
    const int width = input.width();
    const int height = input.height();
    const int half = w.kernel_size / 2;
    FeatureMap out(width, height, w.out_channels);

    std::vector<double> acc(static_cast<std::size_t>(w.out_channels));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            acc.assign(w.bias.begin(), w.bias.end());
            for (int ky = 0; ky < w.kernel_size; ++ky) {
                const int sy = y + ky - half;
                if (sy < 0 || sy >= height)
                    continue;
                for (int kx = 0; kx < w.kernel_size; ++kx) {
                    const int sx = x + kx - half;
                    if (sx < 0 || sx >= width)
                        continue;
                    for (int i = 0; i < w.in_channels; ++i) {
                        const double v = input.at(sx, sy, i);
                        if (v == 0.0)
                            continue;
                        for (int o = 0; o < w.out_channels; ++o)
                            acc[o] += w.w(o, i, ky, kx) * v;
                    }
                }
            }
            for (int o = 0; o < w.out_channels; ++o)
                out.at(x, y, o) = acc[o];
        }
    }
    return out;
}

} // namespace gsvsr
