#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cmath>
#include <complex>
#include <filesystem>
#include <string>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dwdn/dwdn.hpp"

namespace testing_support {

using namespace dwdn;

inline Plane random_plane(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Plane p(h, w);
    for (double& v : p.data())
        v = u(rng);
    return p;
}

inline Image random_image(int h, int w, int c, std::uint64_t seed)
{
    std::vector<Plane> planes;
    for (int i = 0; i < c; ++i)
        planes.push_back(random_plane(h, w, seed * 31 + i));
    return Image::from_planes(planes);
}

inline Kernel random_kernel(int kh, int kw, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> t(static_cast<std::size_t>(kh) * kw);
    for (double& v : t)
        v = u(rng);
    return Kernel::normalized(kh, kw, t);
}

inline Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Tensor t(std::move(shape));
    for (double& v : t.data)
        v = n(rng);
    return t;
}

/// O(N^2) DFT by direct summation.
inline std::vector<std::complex<double>> brute_dft(const Plane& p)
{
    const int h = p.height(), w = p.width();
    std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            std::complex<double> acc;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double ang = -2.0 * M_PI * (double(u) * y / h + double(v) * x / w);
                    acc += p(y, x) * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[static_cast<std::size_t>(u) * w + v] = acc;
        }
    return out;
}

/// out(y,x) = sum_{a,b} t(a,b) in((y - a + ry) mod h, (x - b + rx) mod w).
inline Plane brute_circular_convolve(const Plane& in, const Taps& t)
{
    const int h = in.height(), w = in.width();
    Plane out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int a = 0; a < t.height; ++a)
                for (int b = 0; b < t.width; ++b) {
                    const int sy = ((y - a + t.height / 2) % h + h) % h;
                    const int sx = ((x - b + t.width / 2) % w + w) % w;
                    acc += t.values[static_cast<std::size_t>(a) * t.width + b] * in(sy, sx);
                }
            out(y, x) = acc;
        }
    return out;
}

/// Dense circulant blur matrix on a row-major h x w grid.
inline Eigen::MatrixXd circulant_matrix(const Taps& t, int h, int w)
{
    const int n = h * w;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int a = 0; a < t.height; ++a)
                for (int b = 0; b < t.width; ++b) {
                    const int sy = ((y - a + t.height / 2) % h + h) % h;
                    const int sx = ((x - b + t.width / 2) % w + w) % w;
                    k(y * w + x, sy * w + sx) += t.values[static_cast<std::size_t>(a) * t.width + b];
                }
    return k;
}

inline Eigen::VectorXd as_vector(const Plane& p)
{
    return Eigen::Map<const Eigen::VectorXd>(p.data().data(), static_cast<Eigen::Index>(p.data().size()));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(std::span<const double> a)
{
    double m = 0.0;
    for (double v : a)
        m = std::max(m, std::abs(v));
    return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("dwdn_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct GradCheck {
    double max_rel = 0.0;
    std::size_t checked = 0;
};

/// Central differences of `loss` w.r.t. every entry of `x`, compared with `analytic`.
/// Relative error uses max(|a|, |n|, floor) in the denominator.
inline GradCheck check_gradient(std::vector<double>& x, const std::vector<double>& analytic,
                                const std::function<double()>& loss, double step = 1e-5, double floor = 1e-6,
                                std::size_t max_entries = 0)
{
    GradCheck r;
    const std::size_t n = x.size();
    const std::size_t stride = max_entries == 0 || n <= max_entries ? 1 : n / max_entries;
    for (std::size_t i = 0; i < n; i += stride) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = loss();
        x[i] = keep - step;
        const double down = loss();
        x[i] = keep;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        r.max_rel = std::max(r.max_rel, std::abs(analytic[i] - numeric) / denom);
        ++r.checked;
    }
    return r;
}

} // namespace testing_support
