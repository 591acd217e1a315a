#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dwdn/error.hpp"

namespace dwdn {

/// Single-channel row-major raster of doubles.
class Plane {
public:
    Plane() = default;
    Plane(int height, int width, double fill = 0.0)
        : height_(height), width_(width),
          data_(checked_size(height, width), fill) {}
    Plane(int height, int width, std::vector<double> data)
        : height_(height), width_(width), data_(std::move(data))
    {
        if (data_.size() != checked_size(height, width))
            throw DimensionError("plane data length does not match extents");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_extent(const Plane& o) const { return height_ == o.height_ && width_ == o.width_; }

private:
    static std::size_t checked_size(int h, int w)
    {
        if (h < 0 || w < 0)
            throw DimensionError("negative plane extent");
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Planar image with 1 or 3 channels; channel c occupies data[c*H*W, (c+1)*H*W).
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels)
    {
        check_channels(channels);
        if (height < 0 || width < 0)
            throw DimensionError("negative image extent");
        data_.assign(plane_size() * channels, fill);
    }

    static Image from_planes(std::span<const Plane> planes)
    {
        if (planes.empty())
            throw DimensionError("image needs at least one plane");
        Image img(planes[0].height(), planes[0].width(), static_cast<int>(planes.size()));
        for (int c = 0; c < img.channels(); ++c) {
            if (!planes[c].same_extent(planes[0]))
                throw DimensionError("image planes differ in extent");
            std::copy(planes[c].data().begin(), planes[c].data().end(), img.channel_values(c).begin());
        }
        return img;
    }
    static Image from_plane(const Plane& p) { return from_planes(std::span<const Plane>(&p, 1)); }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int c, int y, int x) { return data_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x]; }
    double operator()(int c, int y, int x) const { return data_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> channel_values(int c) { return std::span<double>(data_).subspan(c * plane_size(), plane_size()); }
    std::span<const double> channel_values(int c) const { return std::span<const double>(data_).subspan(c * plane_size(), plane_size()); }

    Plane channel(int c) const
    {
        auto v = channel_values(c);
        return Plane(height_, width_, std::vector<double>(v.begin(), v.end()));
    }
    std::vector<Plane> planes() const
    {
        std::vector<Plane> out;
        for (int c = 0; c < channels_; ++c)
            out.push_back(channel(c));
        return out;
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_extent(const Image& o) const
    {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

private:
    static void check_channels(int c)
    {
        if (c != 1 && c != 3)
            throw DimensionError("images carry 1 or 3 channels, got " + std::to_string(c));
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 1;
    std::vector<double> data_;
};

/// Small 2-D tap array with odd extents; center at (kh/2, kw/2).
struct Taps {
    int height = 1;
    int width = 1;
    std::vector<double> values{1.0};

    double operator()(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    int radius_y() const { return height / 2; }
    int radius_x() const { return width / 2; }
};

/// Normalized non-negative point-spread function.
class Kernel {
public:
    Kernel() = default; // 1x1 delta

    /// Validates without rescaling: taps >= 0, odd sides, sum 1 within 1e-6.
    Kernel(int height, int width, std::vector<double> taps)
    {
        check_shape(height, width, taps.size());
        double sum = 0.0;
        for (double t : taps) {
            if (!std::isfinite(t) || t < 0.0)
                throw ParameterError("kernel taps must be finite and non-negative");
            sum += t;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw ParameterError("kernel taps must sum to 1");
        taps_ = Taps{height, width, std::move(taps)};
    }

    /// Rescales taps to unit sum; rejects negatives and an all-zero array.
    static Kernel normalized(int height, int width, std::vector<double> taps)
    {
        check_shape(height, width, taps.size());
        double sum = 0.0;
        for (double t : taps) {
            if (!std::isfinite(t) || t < 0.0)
                throw ParameterError("kernel taps must be finite and non-negative");
            sum += t;
        }
        if (!(sum > 0.0))
            throw ParameterError("kernel taps sum to zero");
        for (double& t : taps)
            t /= sum;
        return Kernel(height, width, std::move(taps));
    }

    static Kernel delta(int size = 1)
    {
        std::vector<double> t(static_cast<std::size_t>(size) * size, 0.0);
        t[t.size() / 2] = 1.0;
        return Kernel(size, size, std::move(t));
    }

    int height() const { return taps_.height; }
    int width() const { return taps_.width; }
    int radius_y() const { return taps_.height / 2; }
    int radius_x() const { return taps_.width / 2; }
    double operator()(int y, int x) const { return taps_(y, x); }
    const std::vector<double>& values() const { return taps_.values; }
    const Taps& taps() const { return taps_; }

private:
    static void check_shape(int h, int w, std::size_t n)
    {
        if (h < 1 || w < 1 || h % 2 == 0 || w % 2 == 0)
            throw ParameterError("kernel extents must be odd and positive");
        if (n != static_cast<std::size_t>(h) * w)
            throw ParameterError("kernel tap count does not match extents");
    }

    Taps taps_;
};

inline bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double mean(std::span<const double> v)
{
    if (v.empty())
        return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace dwdn
