#include <gtest/gtest.h>

#include "support.hpp"

using namespace dwdn;
using namespace testing_support;

TEST(Fft, ConstantPlaneHasOnlyDc)
{
    const Spectrum s = fft2(Plane(8, 8, 0.7));
    EXPECT_NEAR(s(0, 0).real(), 64 * 0.7, 1e-12);
    for (std::size_t i = 1; i < s.values.size(); ++i)
        EXPECT_NEAR(std::abs(s.values[i]), 0.0, 1e-12);
}

TEST(Fft, DeltaHasFlatSpectrum)
{
    Plane p(8, 8);
    p(0, 0) = 1.0;
    for (const auto& c : fft2(p).values) {
        EXPECT_NEAR(c.real(), 1.0, 1e-14);
        EXPECT_NEAR(c.imag(), 0.0, 1e-14);
    }
}

TEST(Fft, MatchesDirectSummation)
{
    for (auto [h, w] : {std::pair{8, 8}, {6, 10}, {7, 9}, {11, 13}, {5, 14}}) {
        const Plane p = random_plane(h, w, 17 + h * w);
        const Spectrum s = fft2(p);
        const auto ref = brute_dft(p);
        for (std::size_t i = 0; i < ref.size(); ++i)
            EXPECT_LT(std::abs(s.values[i] - ref[i]), 1e-8) << h << "x" << w << " at " << i;
    }
}

TEST(Fft, ParsevalHolds)
{
    for (int n : {8, 16, 32, 64}) {
        const Plane p = random_plane(n, n, n, -1.0, 1.0);
        double spatial = 0.0, freq = 0.0;
        for (double v : p.data())
            spatial += v * v;
        for (const auto& c : fft2(p).values)
            freq += std::norm(c);
        EXPECT_NEAR(freq / (n * n), spatial, 1e-5 * spatial);
    }
}

TEST(Fft, RoundTrip)
{
    for (auto [h, w] : {std::pair{16, 16}, {9, 12}, {17, 19}, {80, 75}}) {
        const Plane p = random_plane(h, w, 3);
        const Plane back = ifft2(fft2(p));
        EXPECT_LT(max_abs_diff(back.data(), p.data()), 1e-6 * max_abs(p.data()));
        EXPECT_LT(max_abs_diff(back.data(), p.data()), 1e-12);
    }
}

TEST(Fft, FlatSpectrumInvertsToDelta)
{
    Spectrum s(8, 8);
    for (auto& c : s.values)
        c = 1.0;
    const Plane p = ifft2(s);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            EXPECT_NEAR(p(y, x), y == 0 && x == 0 ? 1.0 : 0.0, 1e-14);
}

TEST(Fft, SpectrumProductIsCircularConvolution)
{
    const Plane a = random_plane(12, 10, 5);
    const Kernel k = random_kernel(5, 3, 6);
    const Spectrum fa = fft2(a);
    const Spectrum fk = kernel_spectrum(k, 12, 10);
    Spectrum prod(12, 10);
    for (std::size_t i = 0; i < prod.values.size(); ++i)
        prod.values[i] = fa.values[i] * fk.values[i];
    const Plane viaFft = ifft2(prod);
    const Plane direct = brute_circular_convolve(a, k.taps());
    EXPECT_LT(max_abs_diff(viaFft.data(), direct.data()), 1e-12);
}

TEST(Fft, ImaginaryResidueIsRejected)
{
    Spectrum s(4, 4);
    s(0, 1) = {0.0, 1.0}; // not conjugate-symmetric
    EXPECT_THROW(ifft2(s), NumericError);
    EXPECT_NO_THROW(ifft2_complex(s));
}

TEST(Fft, EmptyInputIsADimensionError)
{
    EXPECT_THROW(fft2(Plane()), DimensionError);
}

TEST(Fft, FastSizesAreSmoothMultiples)
{
    EXPECT_EQ(fast_fft_size(1), 1);
    EXPECT_EQ(fast_fft_size(7), 8);
    EXPECT_EQ(fast_fft_size(77), 80);
    EXPECT_EQ(fast_fft_size(97, 4), 100);
    for (int n = 1; n < 300; ++n) {
        const int m = fast_fft_size(n, 4);
        EXPECT_GE(m, n);
        EXPECT_EQ(m % 4, 0);
    }
}
