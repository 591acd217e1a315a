#include <gtest/gtest.h>

#include <limits>

#include "support.hpp"

using namespace dwdn;
using namespace testing_support;

TEST(Psnr, IdenticalImagesGiveInfinity)
{
    const Image a = random_image(8, 8, 1, 1);
    EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
}

TEST(Psnr, UniformOffsetOfOneTenthIsTwentyDecibels)
{
    const Image a = random_image(16, 16, 3, 2);
    Image b = a;
    for (double& v : b.data())
        v += 0.1;
    EXPECT_NEAR(psnr(a, b), 20.0, 0.01);
}

TEST(Psnr, MatchesDirectMse)
{
    const Image a = random_image(13, 9, 3, 3), b = random_image(13, 9, 3, 4);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        acc += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    const double m = acc / a.data().size();
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / m), 1e-9);
    EXPECT_NEAR(psnr(a, b, 2.0), 10.0 * std::log10(4.0 / m), 1e-9);
}

TEST(Psnr, ExtentMismatchIsRejected)
{
    EXPECT_THROW(psnr(Image(4, 4, 1), Image(4, 5, 1)), DimensionError);
    EXPECT_THROW(psnr(Image(4, 4, 1), Image(4, 4, 3)), DimensionError);
}

TEST(Psnr, DecreasesWithNoise)
{
    const Image clean = synthetic_scene(64, 64, 1, 5);
    double last = std::numeric_limits<double>::infinity();
    for (double s : {0.01, 0.03, 0.05}) {
        const double p = psnr(add_noise(clean, NoiseSpec{s, 9}), clean);
        EXPECT_LT(p, last);
        last = p;
    }
}

TEST(Ssim, SelfSimilarityIsExactlyOne)
{
    const Image a = random_image(32, 24, 3, 6);
    EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, IsSymmetric)
{
    const Image a = random_image(20, 20, 1, 7), b = random_image(20, 20, 1, 8);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, InvertedBinaryPatternScoresLow)
{
    Image a(32, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            a(0, y, x) = ((x / 4 + y / 4) % 2) ? 1.0 : 0.0;
    Image b = a;
    for (double& v : b.data())
        v = 1.0 - v;
    EXPECT_LT(ssim(a, b), 0.5);
}

// Independent reference: explicit per-window sums with the same Gaussian weights.
TEST(Ssim, MatchesReferenceWindowedImplementation)
{
    const Image a = random_image(14, 15, 1, 9), b = random_image(14, 15, 1, 10);
    std::vector<double> g(11);
    double gs = 0.0;
    for (int i = 0; i < 11; ++i) {
        g[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
        gs += g[i];
    }
    for (double& v : g)
        v /= gs;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int n = 0;
    for (int y = 0; y + 11 <= 14; ++y)
        for (int x = 0; x + 11 <= 15; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double wgt = g[i] * g[j];
                    const double va = a(0, y + i, x + j), vb = b(0, y + i, x + j);
                    ma += wgt * va;
                    mb += wgt * vb;
                    saa += wgt * va * va;
                    sbb += wgt * vb * vb;
                    sab += wgt * va * vb;
                }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++n;
        }
    EXPECT_NEAR(ssim(a, b), total / n, 1e-12);
}

TEST(Ssim, TooSmallImageIsRejected)
{
    EXPECT_THROW(ssim(Image(10, 20, 1), Image(10, 20, 1)), DimensionError);
}
