#pragma once

// Unnormalized forward DFT / normalized inverse over arbitrary lengths.
// Lengths whose prime factors are all <= 7 use mixed-radix Cooley-Tukey;
// anything else goes through Bluestein's chirp-z on a power-of-two grid.

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "dwdn/error.hpp"
#include "dwdn/image.hpp"

namespace dwdn {

using Complex = std::complex<double>;

namespace detail {

class FftPlan {
public:
    explicit FftPlan(std::size_t n) : n_(n)
    {
        if (n == 0)
            throw DimensionError("zero-length transform");
        roots_.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            roots_[j] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));

        std::size_t m = n;
        for (std::size_t p : {2u, 3u, 5u, 7u}) {
            while (m % p == 0) {
                factors_.push_back(p);
                m /= p;
            }
        }
        if (m != 1) {
            factors_.clear();
            init_bluestein();
        }
    }

    std::size_t size() const { return n_; }

    /// In-place forward transform (exponent sign -1), unnormalized.
    void forward(std::span<Complex> data) const
    {
        if (data.size() != n_)
            throw DimensionError("transform length mismatch");
        if (n_ == 1)
            return;
        if (bluestein_)
            return run_bluestein(data);
        std::vector<Complex> out(n_);
        recurse(data.data(), 1, out.data(), n_, 0);
        std::copy(out.begin(), out.end(), data.begin());
    }

    /// In-place inverse transform (exponent sign +1), unnormalized.
    void inverse(std::span<Complex> data) const
    {
        for (auto& v : data)
            v = std::conj(v);
        forward(data);
        for (auto& v : data)
            v = std::conj(v);
    }

private:
    static Complex mul(Complex a, Complex b)
    {
        // Plain product; std::complex's operator* adds inf/nan recovery we do not need.
        return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
    }

    // Decimation in time: transform n points read at `stride`, write contiguous to out.
    void recurse(const Complex* in, std::size_t stride, Complex* out, std::size_t n, std::size_t depth) const
    {
        if (n == 1) {
            out[0] = in[0];
            return;
        }
        const std::size_t p = factors_[depth];
        const std::size_t m = n / p;
        if (m == 1) {
            // Last stage: direct p-point DFT of the strided input.
            if (p == 2) {
                out[0] = in[0] + in[stride];
                out[1] = in[0] - in[stride];
                return;
            }
            for (std::size_t q = 0; q < p; ++q) {
                Complex acc = in[0];
                for (std::size_t r = 1; r < p; ++r)
                    acc += mul(in[r * stride], roots_[(r * q % p) * (n_ / p)]);
                out[q] = acc;
            }
            return;
        }
        for (std::size_t r = 0; r < p; ++r)
            recurse(in + r * stride, stride * p, out + r * m, m, depth + 1);

        // Root of unity of order n is roots_[n_/n]; r*k*scale stays below n_.
        const std::size_t scale = n_ / n;
        if (p == 2) {
            for (std::size_t k = 0; k < m; ++k) {
                const Complex a = out[k];
                const Complex b = mul(out[m + k], roots_[k * scale]);
                out[k] = a + b;
                out[m + k] = a - b;
            }
            return;
        }
        Complex wp[7];
        for (std::size_t j = 0; j < p; ++j)
            wp[j] = roots_[j * (n_ / p)];
        Complex tmp[7];
        for (std::size_t k = 0; k < m; ++k) {
            tmp[0] = out[k];
            for (std::size_t r = 1; r < p; ++r)
                tmp[r] = mul(out[r * m + k], roots_[r * k * scale]);
            for (std::size_t q = 0; q < p; ++q) {
                Complex acc = tmp[0];
                std::size_t idx = 0;
                for (std::size_t r = 1; r < p; ++r) {
                    idx += q;
                    if (idx >= p)
                        idx -= p;
                    acc += mul(tmp[r], wp[idx]);
                }
                out[q * m + k] = acc;
            }
        }
    }

    void init_bluestein()
    {
        bluestein_ = true;
        std::size_t m = 1;
        while (m < 2 * n_ - 1)
            m <<= 1;
        sub_ = std::make_unique<FftPlan>(m);
        chirp_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            // exp(-i pi j^2 / n); reduce j^2 mod 2n to keep the angle small
            const std::size_t jj = (j * j) % (2 * n_);
            chirp_[j] = std::polar(1.0, -std::numbers::pi * static_cast<double>(jj) / static_cast<double>(n_));
        }
        filter_.assign(m, Complex{});
        filter_[0] = std::conj(chirp_[0]);
        for (std::size_t j = 1; j < n_; ++j) {
            filter_[j] = std::conj(chirp_[j]);
            filter_[m - j] = std::conj(chirp_[j]);
        }
        sub_->forward(filter_);
    }

    void run_bluestein(std::span<Complex> data) const
    {
        const std::size_t m = sub_->size();
        std::vector<Complex> a(m, Complex{});
        for (std::size_t j = 0; j < n_; ++j)
            a[j] = data[j] * chirp_[j];
        sub_->forward(a);
        for (std::size_t j = 0; j < m; ++j)
            a[j] = mul(a[j], filter_[j]);
        sub_->inverse(a);
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t j = 0; j < n_; ++j)
            data[j] = a[j] * inv * chirp_[j];
    }

    std::size_t n_;
    std::vector<Complex> roots_;
    std::vector<std::size_t> factors_;
    bool bluestein_ = false;
    std::unique_ptr<FftPlan> sub_;
    std::vector<Complex> chirp_;
    std::vector<Complex> filter_;
};

/// Plans are immutable once built; cache them per thread by length.
inline const FftPlan& cached_plan(std::size_t n)
{
    thread_local std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
    auto& slot = cache[n];
    if (!slot)
        slot = std::make_unique<FftPlan>(n);
    return *slot;
}

inline void transform_2d(int height, int width, std::span<Complex> values, bool inverse)
{
    const FftPlan& rows = cached_plan(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        auto row = values.subspan(static_cast<std::size_t>(y) * width, width);
        inverse ? rows.inverse(row) : rows.forward(row);
    }
    const FftPlan& cols = cached_plan(static_cast<std::size_t>(height));
    std::vector<Complex> col(height);
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y)
            col[y] = values[static_cast<std::size_t>(y) * width + x];
        inverse ? cols.inverse(col) : cols.forward(col);
        for (int y = 0; y < height; ++y)
            values[static_cast<std::size_t>(y) * width + x] = col[y];
    }
}

} // namespace detail

/// Complex coefficients on an H x W frequency grid, unnormalized forward convention.
struct Spectrum {
    int height = 0;
    int width = 0;
    std::vector<Complex> values;

    Spectrum() = default;
    Spectrum(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w) {}

    Complex& operator()(int u, int v) { return values[static_cast<std::size_t>(u) * width + v]; }
    Complex operator()(int u, int v) const { return values[static_cast<std::size_t>(u) * width + v]; }
};

inline Spectrum fft2(const Plane& plane)
{
    if (plane.empty())
        throw DimensionError("fft2 of an empty plane");
    Spectrum s(plane.height(), plane.width());
    std::copy(plane.data().begin(), plane.data().end(), s.values.begin());
    detail::transform_2d(s.height, s.width, s.values, false);
    return s;
}

/// Inverse transform keeping the complex result (scaled by 1/(H*W)).
inline std::vector<Complex> ifft2_complex(const Spectrum& spec)
{
    if (spec.values.empty())
        throw DimensionError("ifft2 of an empty spectrum");
    std::vector<Complex> v = spec.values;
    detail::transform_2d(spec.height, spec.width, v, true);
    const double inv = 1.0 / static_cast<double>(v.size());
    for (auto& c : v)
        c *= inv;
    return v;
}

/// Real inverse transform; throws NumericError if the imaginary residue exceeds
/// `tolerance` relative to the largest output magnitude (floored at 1).
inline Plane ifft2(const Spectrum& spec, double tolerance = 1e-6)
{
    auto v = ifft2_complex(spec);
    double max_re = 1.0, max_im = 0.0;
    for (const auto& c : v) {
        max_re = std::max(max_re, std::abs(c.real()));
        max_im = std::max(max_im, std::abs(c.imag()));
    }
    if (max_im > tolerance * max_re)
        throw NumericError("inverse transform has imaginary residue " + std::to_string(max_im));
    Plane out(spec.height, spec.width);
    for (std::size_t i = 0; i < v.size(); ++i)
        out.data()[i] = v[i].real();
    return out;
}

/// Smallest n >= min_size that is a multiple of `multiple` and 5-smooth.
inline int fast_fft_size(int min_size, int multiple = 1)
{
    if (multiple < 1)
        throw ParameterError("fast_fft_size multiple must be positive");
    int n = ((std::max(min_size, 1) + multiple - 1) / multiple) * multiple;
    for (;; n += multiple) {
        int m = n;
        for (int p : {2, 3, 5})
            while (m % p == 0)
                m /= p;
        if (m == 1)
            return n;
    }
}

} // namespace dwdn
