#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dwdn/image.hpp"

namespace dwdn {

enum class Scale {
    down2,
    up2,
};

namespace detail {

// Keys cubic convolution kernel, a = -0.5.
inline double cubic_weight(double x)
{
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0)
        return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0)
        return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

/// Four-tap interpolation matrix along one axis (half-pixel centers, clamped edges).
struct ResampleAxis {
    int in_size = 0;
    int out_size = 0;
    std::vector<std::array<int, 4>> index;
    std::vector<std::array<double, 4>> weight;

    ResampleAxis(int n_in, int n_out) : in_size(n_in), out_size(n_out), index(n_out), weight(n_out)
    {
        const double ratio = static_cast<double>(n_in) / n_out;
        for (int o = 0; o < n_out; ++o) {
            const double src = (o + 0.5) * ratio - 0.5;
            const int i0 = static_cast<int>(std::floor(src));
            const double t = src - i0;
            for (int j = 0; j < 4; ++j) {
                index[o][j] = std::clamp(i0 - 1 + j, 0, n_in - 1);
                weight[o][j] = cubic_weight(t - (j - 1));
            }
        }
    }
};

inline void resample_rows(const double* in, int h, int w_in, const ResampleAxis& ax, double* out)
{
    for (int y = 0; y < h; ++y) {
        const double* row = in + static_cast<std::size_t>(y) * w_in;
        double* dst = out + static_cast<std::size_t>(y) * ax.out_size;
        for (int o = 0; o < ax.out_size; ++o) {
            const auto& id = ax.index[o];
            const auto& wt = ax.weight[o];
            dst[o] = wt[0] * row[id[0]] + wt[1] * row[id[1]] + wt[2] * row[id[2]] + wt[3] * row[id[3]];
        }
    }
}

inline void resample_cols(const double* in, int w, const ResampleAxis& ax, double* out)
{
    for (int o = 0; o < ax.out_size; ++o) {
        const auto& id = ax.index[o];
        const auto& wt = ax.weight[o];
        double* dst = out + static_cast<std::size_t>(o) * w;
        for (int x = 0; x < w; ++x)
            dst[x] = wt[0] * in[static_cast<std::size_t>(id[0]) * w + x] + wt[1] * in[static_cast<std::size_t>(id[1]) * w + x]
                   + wt[2] * in[static_cast<std::size_t>(id[2]) * w + x] + wt[3] * in[static_cast<std::size_t>(id[3]) * w + x];
    }
}

// Transposed operators, accumulating into `in_grad`.
inline void resample_rows_adjoint(const double* out_grad, int h, int w_in, const ResampleAxis& ax, double* in_grad)
{
    for (int y = 0; y < h; ++y) {
        double* row = in_grad + static_cast<std::size_t>(y) * w_in;
        const double* g = out_grad + static_cast<std::size_t>(y) * ax.out_size;
        for (int o = 0; o < ax.out_size; ++o)
            for (int j = 0; j < 4; ++j)
                row[ax.index[o][j]] += ax.weight[o][j] * g[o];
    }
}

inline void resample_cols_adjoint(const double* out_grad, int w, const ResampleAxis& ax, double* in_grad)
{
    for (int o = 0; o < ax.out_size; ++o)
        for (int j = 0; j < 4; ++j) {
            const double wt = ax.weight[o][j];
            double* dst = in_grad + static_cast<std::size_t>(ax.index[o][j]) * w;
            const double* g = out_grad + static_cast<std::size_t>(o) * w;
            for (int x = 0; x < w; ++x)
                dst[x] += wt * g[x];
        }
}

inline std::pair<int, int> scaled_extent(int h, int w, Scale s)
{
    if (s == Scale::down2) {
        if (h % 2 != 0 || w % 2 != 0)
            throw DimensionError("down2 needs even extents, got " + std::to_string(h) + "x" + std::to_string(w));
        return {h / 2, w / 2};
    }
    return {h * 2, w * 2};
}

} // namespace detail

/// Separable bicubic resampling by a factor of two (no antialiasing prefilter).
inline Plane resample_bicubic(const Plane& in, Scale s)
{
    if (in.empty())
        throw DimensionError("cannot resample an empty plane");
    const auto [oh, ow] = detail::scaled_extent(in.height(), in.width(), s);
    detail::ResampleAxis ax_x(in.width(), ow), ax_y(in.height(), oh);
    std::vector<double> tmp(static_cast<std::size_t>(in.height()) * ow);
    detail::resample_rows(in.data().data(), in.height(), in.width(), ax_x, tmp.data());
    Plane out(oh, ow);
    detail::resample_cols(tmp.data(), ow, ax_y, out.data().data());
    return out;
}

inline Image resample_bicubic(const Image& in, Scale s)
{
    std::vector<Plane> planes;
    for (int c = 0; c < in.channels(); ++c)
        planes.push_back(resample_bicubic(in.channel(c), s));
    return Image::from_planes(planes);
}

} // namespace dwdn
