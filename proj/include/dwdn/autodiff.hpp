#pragma once

// Tape-based reverse-mode differentiation over dense tensors. Nodes are
// appended in evaluation order, so reverse insertion order is a valid
// topological order for the backward sweep.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dwdn/error.hpp"
#include "dwdn/fft.hpp"
#include "dwdn/resample.hpp"

namespace dwdn {

/// Dense row-major tensor. Activations are [C, H, W]; conv weights [Cout, Cin, kh, kw].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s))
    {
        data.assign(element_count(shape), fill);
    }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d))
    {
        if (data.size() != element_count(shape))
            throw DimensionError("tensor data does not match its shape");
    }

    static std::size_t element_count(const std::vector<int>& s)
    {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0)
                throw DimensionError("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    int channels() const { return shape.at(0); }
    int height() const { return shape.at(1); }
    int width() const { return shape.at(2); }
    std::size_t plane_size() const { return static_cast<std::size_t>(height()) * width(); }

    double* plane(int c) { return data.data() + c * plane_size(); }
    const double* plane(int c) const { return data.data() + c * plane_size(); }
    double& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width() + x]; }
    double at(int c, int y, int x) const { return data[c * plane_size() + static_cast<std::size_t>(y) * width() + x]; }
};

enum class Activation {
    relu,
    leaky_relu,
    identity,
};

enum class Padding {
    zero,
    circular,
};

using NodeId = int;

class Graph {
public:
    using BackwardFn = std::function<void(Graph&, NodeId)>;

    NodeId constant(Tensor value) { return push(std::move(value), {}, false, nullptr); }

    /// Leaf bound to a named parameter; repeated calls with one name share the node.
    NodeId parameter(const std::string& name, const Tensor& value)
    {
        if (auto it = params_.find(name); it != params_.end())
            return it->second;
        const NodeId id = push(value, {}, true, nullptr);
        params_.emplace(name, id);
        param_order_.push_back(name);
        return id;
    }

    NodeId push(Tensor value, std::vector<NodeId> inputs, bool leaf_requires_grad, BackwardFn fn)
    {
        const NodeId id = static_cast<NodeId>(nodes_.size());
        bool needs = leaf_requires_grad;
        for (NodeId in : inputs) {
            if (in < 0 || in >= id)
                throw InternalError("graph input refers to a later node");
            needs = needs || nodes_[in].requires_grad;
        }
        nodes_.push_back(Node{std::move(value), {}, std::move(inputs), needs, std::move(fn)});
        return id;
    }

    const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
    const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
    bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Gradient buffer for `id`, allocated as zeros on first access.
    Tensor& grad(NodeId id)
    {
        Node& n = nodes_.at(id);
        if (n.grad.shape.empty() && !n.value.shape.empty())
            n.grad = Tensor(n.value.shape);
        return n.grad;
    }
    bool has_grad(NodeId id) const { return !nodes_.at(id).grad.data.empty(); }

    /// Seeds d(loss)/d(loss) = 1 and sweeps in reverse. `loss` must hold one element.
    void backward(NodeId loss)
    {
        if (nodes_.at(loss).value.size() != 1)
            throw InternalError("backward needs a scalar loss node");
        grad(loss).data[0] = 1.0;
        for (NodeId id = loss; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.requires_grad || !n.backward || n.grad.data.empty())
                continue;
            n.backward(*this, id);
        }
    }

    const std::vector<std::string>& parameter_names() const { return param_order_; }
    NodeId parameter_node(const std::string& name) const
    {
        auto it = params_.find(name);
        return it == params_.end() ? -1 : it->second;
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<NodeId> inputs;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::unordered_map<std::string, NodeId> params_;
    std::vector<std::string> param_order_;
};

namespace ops {

namespace detail {

// Products run on 64-byte aligned copies: Eigen's SIMD kernels peel unaligned
// heads, so the same arithmetic on differently aligned buffers rounds
// differently. Fixed alignment keeps results reproducible run to run.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat, Eigen::Aligned64>;
using ConstMapMat = Eigen::Map<const RowMat, Eigen::Aligned64>;
using AlignedBuf = std::vector<double, Eigen::aligned_allocator<double>>;

inline AlignedBuf aligned_copy(std::span<const double> v) { return AlignedBuf(v.begin(), v.end()); }

inline void add_into(std::span<double> dst, const AlignedBuf& src)
{
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += src[i];
}

struct ConvGeometry {
    int cin, h, w, cout, kh, kw, stride, oh, ow, pad_y, pad_x;
    Padding padding;
};

inline int wrap(int i, int n)
{
    i %= n;
    return i < 0 ? i + n : i;
}

// cols[(ci*kh + a)*kw + b][oy*ow + ox] = x[ci][oy*s + a - pad_y][ox*s + b - pad_x]
inline void im2col(const ConvGeometry& g, const double* x, double* cols)
{
    const std::size_t ohw = static_cast<std::size_t>(g.oh) * g.ow;
    for (int ci = 0; ci < g.cin; ++ci)
        for (int a = 0; a < g.kh; ++a)
            for (int b = 0; b < g.kw; ++b) {
                double* row = cols + ((static_cast<std::size_t>(ci) * g.kh + a) * g.kw + b) * ohw;
                const double* xp = x + static_cast<std::size_t>(ci) * g.h * g.w;
                // Output columns whose source lies inside the row: [lo, hi).
                const int off = b - g.pad_x;
                const int lo = std::clamp((-off + g.stride - 1) / g.stride, 0, g.ow);
                const int hi = std::clamp((g.w - off + g.stride - 1) / g.stride, lo, g.ow);
                for (int oy = 0; oy < g.oh; ++oy) {
                    int sy = oy * g.stride + a - g.pad_y;
                    double* dst = row + static_cast<std::size_t>(oy) * g.ow;
                    if (sy < 0 || sy >= g.h) {
                        if (g.padding == Padding::zero) {
                            std::fill(dst, dst + g.ow, 0.0);
                            continue;
                        }
                        sy = wrap(sy, g.h);
                    }
                    const double* src = xp + static_cast<std::size_t>(sy) * g.w;
                    for (int ox = 0; ox < lo; ++ox)
                        dst[ox] = g.padding == Padding::zero ? 0.0 : src[wrap(ox * g.stride + off, g.w)];
                    if (g.stride == 1) {
                        std::copy(src + lo + off, src + hi + off, dst + lo);
                    } else {
                        for (int ox = lo; ox < hi; ++ox)
                            dst[ox] = src[ox * g.stride + off];
                    }
                    for (int ox = hi; ox < g.ow; ++ox)
                        dst[ox] = g.padding == Padding::zero ? 0.0 : src[wrap(ox * g.stride + off, g.w)];
                }
            }
}

inline void col2im(const ConvGeometry& g, const double* cols, double* dx)
{
    const std::size_t ohw = static_cast<std::size_t>(g.oh) * g.ow;
    for (int ci = 0; ci < g.cin; ++ci)
        for (int a = 0; a < g.kh; ++a)
            for (int b = 0; b < g.kw; ++b) {
                const double* row = cols + ((static_cast<std::size_t>(ci) * g.kh + a) * g.kw + b) * ohw;
                double* xp = dx + static_cast<std::size_t>(ci) * g.h * g.w;
                const int off = b - g.pad_x;
                const int lo = std::clamp((-off + g.stride - 1) / g.stride, 0, g.ow);
                const int hi = std::clamp((g.w - off + g.stride - 1) / g.stride, lo, g.ow);
                for (int oy = 0; oy < g.oh; ++oy) {
                    int sy = oy * g.stride + a - g.pad_y;
                    if (sy < 0 || sy >= g.h) {
                        if (g.padding == Padding::zero)
                            continue;
                        sy = wrap(sy, g.h);
                    }
                    double* dst = xp + static_cast<std::size_t>(sy) * g.w;
                    const double* src = row + static_cast<std::size_t>(oy) * g.ow;
                    if (g.padding == Padding::circular) {
                        for (int ox = 0; ox < lo; ++ox)
                            dst[wrap(ox * g.stride + off, g.w)] += src[ox];
                        for (int ox = hi; ox < g.ow; ++ox)
                            dst[wrap(ox * g.stride + off, g.w)] += src[ox];
                    }
                    if (g.stride == 1) {
                        for (int ox = lo; ox < hi; ++ox)
                            dst[ox + off] += src[ox];
                    } else {
                        for (int ox = lo; ox < hi; ++ox)
                            dst[ox * g.stride + off] += src[ox];
                    }
                }
            }
}

inline void accumulate(Tensor& dst, const Tensor& src)
{
    for (std::size_t i = 0; i < dst.data.size(); ++i)
        dst.data[i] += src.data[i];
}

inline void require_chw(const Tensor& t, const char* op)
{
    if (t.shape.size() != 3)
        throw DimensionError(std::string(op) + " expects a [C,H,W] tensor");
}

} // namespace detail

/// 2-D cross-correlation with "same" padding (k/2) and the given stride.
/// `bias` may be -1 for a bias-free layer.
inline NodeId conv2d(Graph& g, NodeId x, NodeId weight, NodeId bias, int stride = 1, Padding padding = Padding::zero)
{
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(weight);
    detail::require_chw(xv, "conv2d");
    if (wv.shape.size() != 4)
        throw DimensionError("conv2d weight must be [Cout,Cin,kh,kw]");
    if (wv.dim(1) != xv.channels())
        throw TopologyError("conv2d expects " + std::to_string(wv.dim(1)) + " input channels, got "
                            + std::to_string(xv.channels()));
    if (stride < 1)
        throw ParameterError("conv2d stride must be positive");
    detail::ConvGeometry geo{xv.channels(), xv.height(), xv.width(), wv.dim(0), wv.dim(2), wv.dim(3), stride, 0, 0,
                             wv.dim(2) / 2, wv.dim(3) / 2, padding};
    geo.oh = (geo.h + 2 * geo.pad_y - geo.kh) / stride + 1;
    geo.ow = (geo.w + 2 * geo.pad_x - geo.kw) / stride + 1;
    if (geo.oh < 1 || geo.ow < 1)
        throw DimensionError("conv2d input smaller than kernel");
    if (bias >= 0 && g.value(bias).size() != static_cast<std::size_t>(geo.cout))
        throw TopologyError("conv2d bias length mismatch");

    const int kdim = geo.cin * geo.kh * geo.kw;
    const int ohw = geo.oh * geo.ow;
    const bool pointwise = geo.kh == 1 && geo.kw == 1 && stride == 1;
    // The column matrix is kept for the weight gradient when one is needed.
    auto cols = std::make_shared<detail::AlignedBuf>();
    if (pointwise) {
        cols->assign(xv.data.begin(), xv.data.end());
    } else {
        cols->resize(static_cast<std::size_t>(kdim) * ohw);
        detail::im2col(geo, xv.data.data(), cols->data());
    }
    const detail::AlignedBuf wa = detail::aligned_copy(wv.data);
    detail::AlignedBuf oa(static_cast<std::size_t>(geo.cout) * ohw);
    detail::MapMat(oa.data(), geo.cout, ohw).noalias() =
        detail::ConstMapMat(wa.data(), geo.cout, kdim) * detail::ConstMapMat(cols->data(), kdim, ohw);
    Tensor out({geo.cout, geo.oh, geo.ow});
    std::copy(oa.begin(), oa.end(), out.data.begin());
    if (bias >= 0) {
        const Tensor& bv = g.value(bias);
        for (int co = 0; co < geo.cout; ++co)
            for (int i = 0; i < ohw; ++i)
                out.data[static_cast<std::size_t>(co) * ohw + i] += bv.data[co];
    }
    if (!g.requires_grad(weight))
        cols.reset();

    std::vector<NodeId> inputs{x, weight};
    if (bias >= 0)
        inputs.push_back(bias);
    return g.push(std::move(out), inputs, false, [geo, x, weight, bias, kdim, ohw, pointwise, cols](Graph& gr, NodeId self) {
        const Tensor& go = gr.grad(self);
        const detail::AlignedBuf ga = detail::aligned_copy(go.data);
        const detail::ConstMapMat gm(ga.data(), geo.cout, ohw);
        if (gr.requires_grad(weight)) {
            detail::AlignedBuf dw(static_cast<std::size_t>(geo.cout) * kdim);
            detail::MapMat(dw.data(), geo.cout, kdim).noalias() = gm * detail::ConstMapMat(cols->data(), kdim, ohw).transpose();
            detail::add_into(gr.grad(weight).data, dw);
        }
        if (bias >= 0 && gr.requires_grad(bias)) {
            Tensor& gb = gr.grad(bias);
            for (int co = 0; co < geo.cout; ++co) {
                double acc = 0.0;
                for (int i = 0; i < ohw; ++i)
                    acc += ga[static_cast<std::size_t>(co) * ohw + i];
                gb.data[co] += acc;
            }
        }
        if (gr.requires_grad(x)) {
            const detail::AlignedBuf wa = detail::aligned_copy(gr.value(weight).data);
            Tensor& gx = gr.grad(x);
            detail::AlignedBuf dcols(static_cast<std::size_t>(kdim) * ohw);
            detail::MapMat(dcols.data(), kdim, ohw).noalias() = detail::ConstMapMat(wa.data(), geo.cout, kdim).transpose() * gm;
            if (pointwise)
                detail::add_into(gx.data, dcols);
            else
                detail::col2im(geo, dcols.data(), gx.data.data());
        }
    });
}

inline NodeId activation(Graph& g, NodeId x, Activation kind, double slope = 0.1)
{
    if (kind == Activation::identity)
        return x;
    const double neg = kind == Activation::relu ? 0.0 : slope;
    Tensor out = g.value(x);
    for (double& v : out.data)
        if (v < 0.0)
            v *= neg;
    return g.push(std::move(out), {x}, false, [x, neg](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x))
            return;
        const Tensor& go = gr.grad(self);
        const Tensor& xv = gr.value(x);
        Tensor& gx = gr.grad(x);
        for (std::size_t i = 0; i < gx.data.size(); ++i)
            gx.data[i] += xv.data[i] > 0.0 ? go.data[i] : neg * go.data[i];
    });
}

inline NodeId add(Graph& g, NodeId a, NodeId b)
{
    if (g.value(a).shape != g.value(b).shape)
        throw DimensionError("add: shape mismatch");
    Tensor out = g.value(a);
    detail::accumulate(out, g.value(b));
    return g.push(std::move(out), {a, b}, false, [a, b](Graph& gr, NodeId self) {
        const Tensor go = gr.grad(self);
        if (gr.requires_grad(a))
            detail::accumulate(gr.grad(a), go);
        if (gr.requires_grad(b))
            detail::accumulate(gr.grad(b), go);
    });
}

inline NodeId scale(Graph& g, NodeId x, double s)
{
    Tensor out = g.value(x);
    for (double& v : out.data)
        v *= s;
    return g.push(std::move(out), {x}, false, [x, s](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x))
            return;
        const Tensor& go = gr.grad(self);
        Tensor& gx = gr.grad(x);
        for (std::size_t i = 0; i < gx.data.size(); ++i)
            gx.data[i] += s * go.data[i];
    });
}

/// Channel concatenation of [C_i, H, W] tensors.
inline NodeId concat(Graph& g, const std::vector<NodeId>& xs)
{
    if (xs.empty())
        throw DimensionError("concat of nothing");
    const Tensor& first = g.value(xs[0]);
    detail::require_chw(first, "concat");
    int channels = 0;
    for (NodeId id : xs) {
        const Tensor& t = g.value(id);
        detail::require_chw(t, "concat");
        if (t.height() != first.height() || t.width() != first.width())
            throw DimensionError("concat: spatial extents differ (" + std::to_string(t.height()) + "x"
                                 + std::to_string(t.width()) + " vs " + std::to_string(first.height()) + "x"
                                 + std::to_string(first.width()) + ")");
        channels += t.channels();
    }
    Tensor out({channels, first.height(), first.width()});
    std::size_t off = 0;
    for (NodeId id : xs) {
        const Tensor& t = g.value(id);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += t.size();
    }
    return g.push(std::move(out), xs, false, [xs](Graph& gr, NodeId self) {
        const Tensor go = gr.grad(self);
        std::size_t off = 0;
        for (NodeId id : xs) {
            const std::size_t n = gr.value(id).size();
            if (gr.requires_grad(id)) {
                Tensor& gx = gr.grad(id);
                for (std::size_t i = 0; i < n; ++i)
                    gx.data[i] += go.data[off + i];
            }
            off += n;
        }
    });
}

inline NodeId slice_channels(Graph& g, NodeId x, int begin, int count)
{
    const Tensor& xv = g.value(x);
    detail::require_chw(xv, "slice_channels");
    if (begin < 0 || count < 1 || begin + count > xv.channels())
        throw DimensionError("slice_channels out of range");
    const std::size_t ps = xv.plane_size();
    Tensor out({count, xv.height(), xv.width()});
    std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>(begin * ps), count * ps, out.data.begin());
    return g.push(std::move(out), {x}, false, [x, begin, ps](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x))
            return;
        const Tensor& go = gr.grad(self);
        Tensor& gx = gr.grad(x);
        for (std::size_t i = 0; i < go.size(); ++i)
            gx.data[begin * ps + i] += go.data[i];
    });
}

inline NodeId crop(Graph& g, NodeId x, int top, int left, int height, int width)
{
    const Tensor& xv = g.value(x);
    detail::require_chw(xv, "crop");
    if (top < 0 || left < 0 || top + height > xv.height() || left + width > xv.width() || height < 1 || width < 1)
        throw DimensionError("crop window outside tensor");
    Tensor out({xv.channels(), height, width});
    for (int c = 0; c < xv.channels(); ++c)
        for (int y = 0; y < height; ++y)
            for (int xx = 0; xx < width; ++xx)
                out.at(c, y, xx) = xv.at(c, y + top, xx + left);
    return g.push(std::move(out), {x}, false, [x, top, left](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x))
            return;
        const Tensor& go = gr.grad(self);
        Tensor& gx = gr.grad(x);
        for (int c = 0; c < go.channels(); ++c)
            for (int y = 0; y < go.height(); ++y)
                for (int xx = 0; xx < go.width(); ++xx)
                    gx.at(c, y + top, xx + left) += go.at(c, y, xx);
    });
}

/// Per-channel bicubic resampling by two.
inline NodeId resample(Graph& g, NodeId x, Scale s)
{
    const Tensor& xv = g.value(x);
    detail::require_chw(xv, "resample");
    const int h = xv.height(), w = xv.width();
    const auto [oh, ow] = dwdn::detail::scaled_extent(h, w, s);
    auto ax_x = std::make_shared<dwdn::detail::ResampleAxis>(w, ow);
    auto ax_y = std::make_shared<dwdn::detail::ResampleAxis>(h, oh);
    Tensor out({xv.channels(), oh, ow});
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int c = 0; c < xv.channels(); ++c) {
        dwdn::detail::resample_rows(xv.plane(c), h, w, *ax_x, tmp.data());
        dwdn::detail::resample_cols(tmp.data(), ow, *ax_y, out.plane(c));
    }
    return g.push(std::move(out), {x}, false, [x, ax_x, ax_y, h, w, ow](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x))
            return;
        const Tensor& go = gr.grad(self);
        Tensor& gx = gr.grad(x);
        std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
        for (int c = 0; c < go.channels(); ++c) {
            std::fill(tmp.begin(), tmp.end(), 0.0);
            dwdn::detail::resample_cols_adjoint(go.plane(c), ow, *ax_y, tmp.data());
            dwdn::detail::resample_rows_adjoint(tmp.data(), h, w, *ax_x, gx.plane(c));
        }
    });
}

/// Frequency responses, one per channel, on a shared H x W grid.
struct SpectralFilter {
    int height = 0;
    int width = 0;
    std::vector<std::vector<Complex>> responses;
    bool hermitian = false; // every response satisfies R(-f) = conj(R(f)), i.e. a real filter
};

namespace detail {

inline void apply_response(const double* in, double* out, int h, int w, const std::vector<Complex>& r, bool conjugate)
{
    Spectrum s(h, w);
    std::copy(in, in + static_cast<std::ptrdiff_t>(h) * w, s.values.begin());
    dwdn::detail::transform_2d(h, w, s.values, false);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const Complex a = s.values[i];
        const double rr = r[i].real(), ri = conjugate ? -r[i].imag() : r[i].imag();
        s.values[i] = Complex(a.real() * rr - a.imag() * ri, a.real() * ri + a.imag() * rr);
    }
    dwdn::detail::transform_2d(h, w, s.values, true);
    const double inv = 1.0 / static_cast<double>(s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i)
        out[i] = s.values[i].real() * inv;
}

// Two real planes through one complex transform: valid when R is Hermitian,
// since the filter then maps real input to real output.
inline void apply_response_pair(const double* in_a, const double* in_b, double* out_a, double* out_b, int h, int w,
                                const std::vector<Complex>& ra, const std::vector<Complex>& rb, bool conjugate)
{
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<Complex> z(n);
    for (std::size_t i = 0; i < n; ++i)
        z[i] = Complex(in_a[i], in_b[i]);
    dwdn::detail::transform_2d(h, w, z, false);
    if (&ra != &rb) {
        // Split Z into the spectra of a and b, filter each, recombine as A' + iB'.
        std::vector<Complex> y(n);
        for (int u = 0; u < h; ++u)
            for (int v = 0; v < w; ++v) {
                const std::size_t i = static_cast<std::size_t>(u) * w + v;
                const std::size_t j = static_cast<std::size_t>((h - u) % h) * w + (w - v) % w;
                const Complex zc = std::conj(z[j]);
                const Complex fa = 0.5 * (z[i] + zc);
                const Complex fb = Complex(0.0, -0.5) * (z[i] - zc);
                const Complex ga = conjugate ? std::conj(ra[i]) : ra[i];
                const Complex gb = conjugate ? std::conj(rb[i]) : rb[i];
                const Complex pa(fa.real() * ga.real() - fa.imag() * ga.imag(), fa.real() * ga.imag() + fa.imag() * ga.real());
                const Complex pb(fb.real() * gb.real() - fb.imag() * gb.imag(), fb.real() * gb.imag() + fb.imag() * gb.real());
                y[i] = Complex(pa.real() - pb.imag(), pa.imag() + pb.real());
            }
        z.swap(y);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const Complex a = z[i];
            const double rr = ra[i].real(), ri = conjugate ? -ra[i].imag() : ra[i].imag();
            z[i] = Complex(a.real() * rr - a.imag() * ri, a.real() * ri + a.imag() * rr);
        }
    }
    dwdn::detail::transform_2d(h, w, z, true);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        out_a[i] = z[i].real() * inv;
        out_b[i] = z[i].imag() * inv;
    }
}

// Applies per-channel responses to every plane of `in`, writing (or adding) into `out`.
inline void apply_filter(const SpectralFilter& f, const Tensor& in, double* out, bool conjugate, bool accumulate)
{
    const int h = in.height(), w = in.width();
    const std::size_t ps = in.plane_size();
    std::vector<double> ta(ps), tb(ps);
    int c = 0;
    auto emit = [&](int ch, const std::vector<double>& v) {
        double* dst = out + static_cast<std::size_t>(ch) * ps;
        for (std::size_t i = 0; i < ps; ++i)
            dst[i] = accumulate ? dst[i] + v[i] : v[i];
    };
    if (f.hermitian)
        for (; c + 1 < in.channels(); c += 2) {
            apply_response_pair(in.plane(c), in.plane(c + 1), ta.data(), tb.data(), h, w, f.responses[c],
                                f.responses[c + 1], conjugate);
            emit(c, ta);
            emit(c + 1, tb);
        }
    for (; c < in.channels(); ++c) {
        apply_response(in.plane(c), ta.data(), h, w, f.responses[c], conjugate);
        emit(c, ta);
    }
}

} // namespace detail

/// y_c = Re F^-1(R_c . F x_c). The adjoint uses conj(R_c).
inline NodeId spectral_filter(Graph& g, NodeId x, std::shared_ptr<const SpectralFilter> filter)
{
    const Tensor& xv = g.value(x);
    detail::require_chw(xv, "spectral_filter");
    if (xv.height() != filter->height || xv.width() != filter->width)
        throw DimensionError("spectral filter grid does not match the feature extent");
    if (static_cast<int>(filter->responses.size()) != xv.channels())
        throw TopologyError("spectral filter has one response per channel");
    Tensor out(xv.shape);
    detail::apply_filter(*filter, xv, out.data.data(), false, false);
    return g.push(std::move(out), {x}, false, [x, filter](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x))
            return;
        detail::apply_filter(*filter, gr.grad(self), gr.grad(x).data.data(), true, true);
    });
}

/// mean |x - target|; the subgradient at zero is zero.
inline NodeId l1_mean(Graph& g, NodeId x, const Tensor& target)
{
    const Tensor& xv = g.value(x);
    if (xv.shape != target.shape)
        throw DimensionError("l1 loss: prediction and target shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i)
        acc += std::abs(xv.data[i] - target.data[i]);
    const double n = static_cast<double>(xv.size());
    Tensor out({1}, acc / n);
    auto tgt = std::make_shared<Tensor>(target);
    return g.push(std::move(out), {x}, false, [x, tgt, n](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x))
            return;
        const double go = gr.grad(self).data[0];
        const Tensor& xv = gr.value(x);
        Tensor& gx = gr.grad(x);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double d = xv.data[i] - tgt->data[i];
            gx.data[i] += d > 0.0 ? go / n : (d < 0.0 ? -go / n : 0.0);
        }
    });
}

} // namespace ops
} // namespace dwdn
