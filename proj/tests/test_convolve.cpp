#include <gtest/gtest.h>

#include "support.hpp"

using namespace dwdn;
using namespace testing_support;

TEST(Convolve, IdentityKernelLeavesImageUnchanged)
{
    const Image img = random_image(9, 11, 3, 1);
    for (Boundary b : {Boundary::circular, Boundary::replicate_pad_crop})
        EXPECT_EQ(convolve(img, Kernel::delta(1), b).data(), img.data());
}

TEST(Convolve, ConstantImageStaysConstant)
{
    const Image img(16, 16, 1, 0.42);
    const Kernel k = random_kernel(7, 5, 2);
    for (Boundary b : {Boundary::circular, Boundary::replicate_pad_crop}) {
        const Image out = convolve(img, k, b);
        for (double v : out.data())
            EXPECT_NEAR(v, 0.42, 1e-14);
    }
}

TEST(Convolve, CircularMatchesWrapAroundLoop)
{
    const Plane p = random_plane(12, 12, 3);
    const Kernel k = random_kernel(5, 5, 4);
    const Plane ours = convolve(p, k, Boundary::circular);
    EXPECT_LT(max_abs_diff(ours.data(), brute_circular_convolve(p, k.taps()).data()), 1e-10);
}

TEST(Convolve, ReplicateModeClampsIndices)
{
    const Plane p = random_plane(10, 8, 5);
    const Kernel k = random_kernel(3, 5, 6);
    const Plane ours = convolve(p, k, Boundary::replicate_pad_crop);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 5; ++b)
                    acc += k(a, b) * p(std::clamp(y - a + 1, 0, 9), std::clamp(x - b + 2, 0, 7));
            EXPECT_NEAR(ours(y, x), acc, 1e-12);
        }
}

TEST(Convolve, CircularEqualsFftProductForManySizes)
{
    for (int n : {8, 13, 16, 21}) {
        const Plane p = random_plane(n, n + 3, n);
        const Kernel k = random_kernel(7, 7, n + 1);
        const Spectrum fp = fft2(p), fk = kernel_spectrum(k, n, n + 3);
        Spectrum prod(n, n + 3);
        for (std::size_t i = 0; i < prod.values.size(); ++i)
            prod.values[i] = fp.values[i] * fk.values[i];
        EXPECT_LT(max_abs_diff(convolve(p, k, Boundary::circular).data(), ifft2(prod).data()), 1e-8);
    }
}

TEST(Convolve, KernelLargerThanImageIsRejected)
{
    EXPECT_THROW(convolve(Plane(4, 4), random_kernel(5, 5, 1), Boundary::circular), DimensionError);
}

TEST(Convolve, EnergyIsPreservedUnderCircularBoundary)
{
    const Plane p = random_plane(20, 20, 9);
    const Plane q = convolve(p, random_kernel(9, 9, 10), Boundary::circular);
    EXPECT_NEAR(mean(q.values()), mean(p.values()), 1e-8);
}

TEST(Convolve, PadAndCropAreInverse)
{
    const Plane p = random_plane(6, 7, 11);
    const Plane padded = pad_replicate(p, 2, 3, 1, 4);
    EXPECT_EQ(padded.height(), 11);
    EXPECT_EQ(padded.width(), 12);
    EXPECT_EQ(padded(0, 0), p(0, 0));
    EXPECT_EQ(padded(10, 11), p(5, 6));
    EXPECT_EQ(crop(padded, 2, 1, 6, 7).data(), p.data());
    EXPECT_THROW(crop(p, 1, 1, 6, 7), DimensionError);
}

TEST(EdgeTaper, ConstantImageUnchanged)
{
    const Plane p(24, 24, 0.3);
    for (const Plane t = edge_taper(p, random_kernel(7, 7, 1)); double v : t.data())
        EXPECT_NEAR(v, 0.3, 1e-14);
}

TEST(EdgeTaper, InteriorIsUntouched)
{
    const Plane p = random_plane(30, 26, 4);
    const Kernel k = random_kernel(9, 5, 2);
    const Plane t = edge_taper(p, k);
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 26; ++x) {
            const bool interior = y >= 4 && y < 26 && x >= 2 && x < 24;
            if (interior) {
                EXPECT_EQ(t(y, x), p(y, x));
            }
        }
    // The outermost ring is pulled toward the blurred image.
    const Plane blurred = convolve(p, k, Boundary::circular);
    EXPECT_LT(std::abs(t(0, 13) - blurred(0, 13)), std::abs(p(0, 13) - blurred(0, 13)) + 1e-15);
}

TEST(EdgeTaper, ImprovesPaddedDeconvolution)
{
    // Scene with strong content at the borders, where periodic seams hurt most.
    double with = 0.0, without = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Image clean = synthetic_scene(64, 64, 1, 40 + i);
        const Kernel k = gen_kernel(trajectory_for(15, 90 + i));
        const Image y = blur(clean, k, NoiseSpec{0.0, 1});
        WienerOptions on, off;
        on.ratio = off.ratio = 1e-3;
        off.taper = false;
        with += psnr(wiener_image(y, k, on), clean);
        without += psnr(wiener_image(y, k, off), clean);
    }
    EXPECT_GE(with, without);
}

TEST(BoxFilter, AveragesNeighbourhood)
{
    const Plane p = random_plane(7, 9, 8);
    const Plane b = box_filter(p, 3);
    double acc = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            acc += p((3 + dy + 7) % 7, (0 + dx + 9) % 9);
    EXPECT_NEAR(b(3, 0), acc / 9.0, 1e-14);
}
