#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "dwdn/image.hpp"

namespace dwdn {

inline double mse(const Image& a, const Image& b)
{
    if (!a.same_extent(b))
        throw DimensionError("metric inputs differ in extent");
    if (a.empty())
        throw DimensionError("metric of empty images");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data().size());
}

/// 10*log10(peak^2 / MSE); +infinity for identical inputs.
inline double psnr(const Image& a, const Image& b, double peak = 1.0)
{
    const double e = mse(a, b);
    if (e == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / e);
}

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double peak = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_window_1d(int size, double sigma)
{
    std::vector<double> g(size);
    double sum = 0.0;
    const int r = size / 2;
    for (int i = 0; i < size; ++i) {
        g[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
        sum += g[i];
    }
    for (double& v : g)
        v /= sum;
    return g;
}

// Separable Gaussian weighted sum over every fully-contained window.
inline std::vector<double> valid_filter(std::span<const double> in, int h, int w, const std::vector<double>& g)
{
    const int n = static_cast<int>(g.size());
    const int oh = h - n + 1, ow = w - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += g[k] * in[static_cast<std::size_t>(y) * w + x + k];
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

} // namespace detail

/// Mean windowed SSIM over all valid window positions, averaged over channels.
inline double ssim(const Image& a, const Image& b, const SsimOptions& opt = {})
{
    if (!a.same_extent(b))
        throw DimensionError("metric inputs differ in extent");
    if (a.height() < opt.window || a.width() < opt.window)
        throw DimensionError("image smaller than the SSIM window");
    const double c1 = (0.01 * opt.peak) * (0.01 * opt.peak);
    const double c2 = (0.03 * opt.peak) * (0.03 * opt.peak);
    const auto g = detail::gaussian_window_1d(opt.window, opt.sigma);
    const int h = a.height(), w = a.width();

    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> aa(a.plane_size()), bb(a.plane_size()), ab(a.plane_size());
    for (int c = 0; c < a.channels(); ++c) {
        auto pa = a.channel_values(c);
        auto pb = b.channel_values(c);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto mu_a = detail::valid_filter(pa, h, w, g);
        const auto mu_b = detail::valid_filter(pb, h, w, g);
        const auto e_aa = detail::valid_filter(aa, h, w, g);
        const auto e_bb = detail::valid_filter(bb, h, w, g);
        const auto e_ab = detail::valid_filter(ab, h, w, g);
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = e_aa[i] - ma * ma;
            const double vb = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        count += mu_a.size();
    }
    return total / static_cast<double>(count);
}

} // namespace dwdn
