#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "dwdn/fft.hpp"
#include "dwdn/image.hpp"

namespace dwdn {

enum class Boundary {
    circular,
    replicate_pad_crop,
};

namespace detail {

inline int wrap(int i, int n)
{
    i %= n;
    return i < 0 ? i + n : i;
}

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

} // namespace detail

/// True convolution: out(y,x) = sum_{a,b} t(a,b) * in(y - (a - ry), x - (b - rx)).
inline Plane convolve(const Plane& in, const Taps& t, Boundary boundary)
{
    if (t.height > in.height() || t.width > in.width())
        throw DimensionError("filter larger than image");
    const int h = in.height(), w = in.width();
    const int ry = t.radius_y(), rx = t.radius_x();
    // Extended copy so the tap loops need no index arithmetic: ext(Y, X) = in(Y - ry, X - rx).
    const int eh = h + 2 * ry, ew = w + 2 * rx;
    std::vector<double> ext(static_cast<std::size_t>(eh) * ew);
    for (int yy = 0; yy < eh; ++yy) {
        const int sy = boundary == Boundary::circular ? detail::wrap(yy - ry, h) : detail::clamp_index(yy - ry, h);
        for (int xx = 0; xx < ew; ++xx) {
            const int sx = boundary == Boundary::circular ? detail::wrap(xx - rx, w) : detail::clamp_index(xx - rx, w);
            ext[static_cast<std::size_t>(yy) * ew + xx] = in(sy, sx);
        }
    }
    Plane out(h, w);
    double* o = out.data().data();
    for (int a = 0; a < t.height; ++a)
        for (int b = 0; b < t.width; ++b) {
            const double tap = t(a, b);
            if (tap == 0.0)
                continue;
            // in(y - (a - ry), x - (b - rx)) = ext(y - a + 2ry, x - b + 2rx)
            for (int y = 0; y < h; ++y) {
                const double* src = ext.data() + static_cast<std::size_t>(y - a + 2 * ry) * ew + (2 * rx - b);
                double* dst = o + static_cast<std::size_t>(y) * w;
                for (int x = 0; x < w; ++x)
                    dst[x] += tap * src[x];
            }
        }
    return out;
}

inline Plane convolve(const Plane& in, const Kernel& k, Boundary boundary)
{
    return convolve(in, k.taps(), boundary);
}

inline Image convolve(const Image& in, const Kernel& k, Boundary boundary)
{
    std::vector<Plane> planes;
    for (int c = 0; c < in.channels(); ++c)
        planes.push_back(convolve(in.channel(c), k, boundary));
    return Image::from_planes(planes);
}

/// Transfer function of `t` on an H x W grid: taps zero-padded with the
/// center moved to the origin, so circular convolution is a pointwise product.
inline Spectrum taps_spectrum(const Taps& t, int height, int width)
{
    if (t.height > height || t.width > width)
        throw DimensionError("kernel larger than transform grid");
    Plane pad(height, width);
    for (int a = 0; a < t.height; ++a)
        for (int b = 0; b < t.width; ++b)
            pad(detail::wrap(a - t.radius_y(), height), detail::wrap(b - t.radius_x(), width)) += t(a, b);
    return fft2(pad);
}

inline Spectrum kernel_spectrum(const Kernel& k, int height, int width)
{
    return taps_spectrum(k.taps(), height, width);
}

inline Plane pad_replicate(const Plane& in, int top, int bottom, int left, int right)
{
    if (in.empty())
        throw DimensionError("cannot pad an empty plane");
    Plane out(in.height() + top + bottom, in.width() + left + right);
    for (int y = 0; y < out.height(); ++y) {
        const int sy = detail::clamp_index(y - top, in.height());
        for (int x = 0; x < out.width(); ++x)
            out(y, x) = in(sy, detail::clamp_index(x - left, in.width()));
    }
    return out;
}

inline Plane crop(const Plane& in, int top, int left, int height, int width)
{
    if (top < 0 || left < 0 || top + height > in.height() || left + width > in.width())
        throw DimensionError("crop window outside plane");
    Plane out(height, width);
    for (int y = 0; y < height; ++y)
        std::copy_n(in.data().begin() + static_cast<std::ptrdiff_t>(y + top) * in.width() + left, width,
                    out.data().begin() + static_cast<std::ptrdiff_t>(y) * width);
    return out;
}

inline Image crop(const Image& in, int top, int left, int height, int width)
{
    std::vector<Plane> planes;
    for (int c = 0; c < in.channels(); ++c)
        planes.push_back(crop(in.channel(c), top, left, height, width));
    return Image::from_planes(planes);
}

namespace detail {

// 1 at distance >= radius from the border, sin^2 ramp toward 0 inside the band.
inline double taper_weight(int i, int n, int radius)
{
    const int d = std::min(i, n - 1 - i);
    if (d >= radius)
        return 1.0;
    const double s = std::sin(std::numbers::pi * (d + 1) / (2.0 * (radius + 1)));
    return s * s;
}

} // namespace detail

/// Blend the border band (kernel radius wide) toward the circularly blurred
/// image so the periodic extension has no hard seams.
inline Plane edge_taper(const Plane& in, const Kernel& k)
{
    if (k.height() > in.height() || k.width() > in.width())
        throw DimensionError("kernel larger than image");
    const int ry = k.radius_y(), rx = k.radius_x();
    if (ry == 0 && rx == 0)
        return in;
    const Plane blurred = convolve(in, k, Boundary::circular);
    Plane out = in;
    for (int y = 0; y < in.height(); ++y) {
        const double wy = detail::taper_weight(y, in.height(), ry);
        for (int x = 0; x < in.width(); ++x) {
            const double wgt = wy * detail::taper_weight(x, in.width(), rx);
            if (wgt < 1.0)
                out(y, x) = wgt * in(y, x) + (1.0 - wgt) * blurred(y, x);
        }
    }
    return out;
}

inline Image edge_taper(const Image& in, const Kernel& k)
{
    std::vector<Plane> planes;
    for (int c = 0; c < in.channels(); ++c)
        planes.push_back(edge_taper(in.channel(c), k));
    return Image::from_planes(planes);
}

/// size x size box average with circular wrap.
inline Plane box_filter(const Plane& in, int size)
{
    Taps t{size, size, std::vector<double>(static_cast<std::size_t>(size) * size, 1.0 / (size * size))};
    return convolve(in, t, Boundary::circular);
}

} // namespace dwdn
