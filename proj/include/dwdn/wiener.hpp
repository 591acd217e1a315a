#pragma once

// Feature-space Wiener deconvolution. For every feature plane F_i y the
// operator G_i = conj(F(K)) / (|F(K)|^2 + s_n/s_x) is applied in the Fourier
// domain, with scalar per-feature power estimates s_x, s_n.

#include <cmath>
#include <optional>
#include <vector>

#include "dwdn/autodiff.hpp"
#include "dwdn/convolve.hpp"
#include "dwdn/fft.hpp"
#include "dwdn/filter_bank.hpp"

namespace dwdn {

/// Added to every denominator so zeros of F(K) stay finite when s_n = 0.
inline constexpr double wiener_denominator_floor = 1e-12;
/// Lower bound on s_x (a constant plane has zero deviation).
inline constexpr double wiener_signal_floor = 1e-8;

struct StatsOptions {
    int mean_filter = 3;     // box size for the noise residual
    bool squared_sx = false; // use var instead of std for s_x
};

struct WienerStats {
    std::vector<double> s_x;
    std::vector<double> s_n;

    std::size_t size() const { return s_x.size(); }
    double ratio(std::size_t i) const { return s_n.at(i) / s_x.at(i); }

    /// Stats that reproduce a fixed regularization ratio on every feature.
    static WienerStats fixed_ratio(std::size_t features, double ratio)
    {
        if (!(ratio >= 0.0) || !std::isfinite(ratio))
            throw ParameterError("regularization ratio must be finite and >= 0");
        return WienerStats{std::vector<double>(features, 1.0), std::vector<double>(features, ratio)};
    }
};

namespace detail {

inline std::pair<double, double> plane_stats(std::span<const double> v, int h, int w, const StatsOptions& opt)
{
    const double n = static_cast<double>(v.size());
    const double mu = mean(v);
    double var = 0.0;
    for (double x : v)
        var += (x - mu) * (x - mu);
    var /= n;
    double sx = opt.squared_sx ? var : std::sqrt(var);
    sx = std::max(sx, wiener_signal_floor);

    const Plane p(h, w, std::vector<double>(v.begin(), v.end()));
    const Plane smooth = box_filter(p, opt.mean_filter);
    std::vector<double> diff(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        diff[i] = v[i] - smooth.data()[i];
    const double dmu = mean(diff);
    double sn = 0.0;
    for (double d : diff)
        sn += (d - dmu) * (d - dmu);
    sn /= n;
    return {sx, sn};
}

} // namespace detail

/// s_x = std of each plane (floored), s_n = variance of plane - box_filter(plane).
inline WienerStats estimate_stats(const Tensor& stack, const StatsOptions& opt = {})
{
    if (stack.shape.size() != 3 || stack.size() == 0)
        throw DimensionError("cannot estimate stats of an empty stack");
    if (opt.mean_filter < 1 || opt.mean_filter % 2 == 0)
        throw ParameterError("mean filter size must be odd and positive");
    WienerStats s;
    for (int c = 0; c < stack.channels(); ++c) {
        const auto [sx, sn] = detail::plane_stats(std::span<const double>(stack.plane(c), stack.plane_size()),
                                                  stack.height(), stack.width(), opt);
        s.s_x.push_back(sx);
        s.s_n.push_back(sn);
    }
    return s;
}

inline WienerStats estimate_stats(const FeatureStack& stack, const StatsOptions& opt = {})
{
    if (stack.planes.empty())
        throw DimensionError("cannot estimate stats of an empty stack");
    return estimate_stats(to_tensor(stack.planes), opt);
}

/// Per-feature frequency responses on the H x W grid.
using WienerOperator = ops::SpectralFilter;

inline WienerOperator build_operator(const Kernel& k, const WienerStats& stats, int height, int width)
{
    if (stats.size() == 0)
        throw ParameterError("operator needs at least one feature");
    const Spectrum kf = kernel_spectrum(k, height, width);
    WienerOperator op;
    op.height = height;
    op.width = width;
    op.hermitian = true; // real kernel, real ratios
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (!(stats.s_x[i] > 0.0) || !(stats.s_n[i] >= 0.0) || !std::isfinite(stats.s_x[i]) || !std::isfinite(stats.s_n[i]))
            throw ParameterError("invalid Wiener stats for feature " + std::to_string(i));
        const double lambda = stats.s_n[i] / stats.s_x[i];
        std::vector<Complex> r(kf.values.size());
        for (std::size_t j = 0; j < r.size(); ++j)
            r[j] = std::conj(kf.values[j]) / (std::norm(kf.values[j]) + lambda + wiener_denominator_floor);
        op.responses.push_back(std::move(r));
    }
    return op;
}

inline FeatureStack deconvolve_features(const FeatureStack& stack, const WienerOperator& op)
{
    if (stack.planes.size() != op.responses.size())
        throw DimensionError("operator and stack differ in feature count");
    FeatureStack out{{}, stack.provenance + "|wiener"};
    for (std::size_t i = 0; i < stack.planes.size(); ++i) {
        const Plane& p = stack.planes[i];
        if (p.height() != op.height || p.width() != op.width)
            throw DimensionError("stack extent does not match the operator grid");
        Plane r(p.height(), p.width());
        ops::detail::apply_response(p.data().data(), r.data().data(), p.height(), p.width(), op.responses[i], false);
        out.planes.push_back(std::move(r));
    }
    return out;
}

/// Where an H x W observation sits inside the padded FFT grid.
struct PaddingPlan {
    int height = 0, width = 0;       // original extent
    int top = 0, left = 0;           // offset of the original inside the grid
    int grid_h = 0, grid_w = 0;      // FFT grid
    int work_h = 0, work_w = 0;      // region kept for refinement, starting at (top, left)
};

inline int round_up(int v, int m) { return (v + m - 1) / m * m; }

/// Replicate-pad by the kernel radius (top/left offset rounded up to
/// `offset_multiple`), pick a 5-smooth grid, and size the work region to a
/// multiple of `work_multiple`. Circular boundary keeps the image as the grid.
inline PaddingPlan plan_padding(int height, int width, const Kernel& k, Boundary boundary, int work_multiple = 1,
                                int offset_multiple = 1)
{
    if (k.height() > height || k.width() > width)
        throw DimensionError("kernel (" + std::to_string(k.height()) + "x" + std::to_string(k.width())
                             + ") larger than image (" + std::to_string(height) + "x" + std::to_string(width) + ")");
    PaddingPlan p;
    p.height = height;
    p.width = width;
    if (boundary == Boundary::circular) {
        if (height % work_multiple != 0 || width % work_multiple != 0)
            throw DimensionError("circular boundary needs extents divisible by " + std::to_string(work_multiple));
        p.grid_h = p.work_h = height;
        p.grid_w = p.work_w = width;
        return p;
    }
    p.top = round_up(k.radius_y(), offset_multiple);
    p.left = round_up(k.radius_x(), offset_multiple);
    p.work_h = round_up(height, work_multiple);
    p.work_w = round_up(width, work_multiple);
    p.grid_h = fast_fft_size(std::max(p.top + height + k.radius_y(), p.top + p.work_h));
    p.grid_w = fast_fft_size(std::max(p.left + width + k.radius_x(), p.left + p.work_w));
    return p;
}

/// Observation on the FFT grid: replicate-padded and edge-tapered.
inline Image prepare_observation(const Image& y, const Kernel& k, const PaddingPlan& plan, bool taper = true)
{
    if (plan.top == 0 && plan.left == 0 && plan.grid_h == y.height() && plan.grid_w == y.width())
        return y;
    std::vector<Plane> planes;
    for (int c = 0; c < y.channels(); ++c) {
        Plane p = pad_replicate(y.channel(c), plan.top, plan.grid_h - y.height() - plan.top, plan.left,
                                plan.grid_w - y.width() - plan.left);
        planes.push_back(taper ? edge_taper(p, k) : std::move(p));
    }
    return Image::from_planes(planes);
}

struct WienerOptions {
    std::optional<double> ratio; // overrides estimated stats with s_n/s_x = ratio
    StatsOptions stats;
    bool taper = true; // edge-taper the padded observation
};

/// Classical image-space Wiener deconvolution (intensity bank, per channel).
inline Image wiener_image(const Image& y, const Kernel& k, const WienerOptions& opt = {},
                          Boundary boundary = Boundary::replicate_pad_crop)
{
    const PaddingPlan plan = plan_padding(y.height(), y.width(), k, boundary);
    const Image grid = prepare_observation(y, k, plan, opt.taper);
    const FeatureStack stack = apply_bank(builtin_bank(BankKind::intensity), grid, Boundary::circular);
    const WienerStats stats = opt.ratio ? WienerStats::fixed_ratio(stack.size(), *opt.ratio) : estimate_stats(stack, opt.stats);
    const FeatureStack out = deconvolve_features(stack, build_operator(k, stats, plan.grid_h, plan.grid_w));
    std::vector<Plane> planes;
    for (const auto& p : out.planes)
        planes.push_back(crop(p, plan.top, plan.left, y.height(), y.width()));
    return Image::from_planes(planes);
}

} // namespace dwdn
