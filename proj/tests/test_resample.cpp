#include <gtest/gtest.h>

#include "support.hpp"

using namespace dwdn;
using namespace testing_support;

TEST(Resample, ConstantsArePreserved)
{
    const Plane c(12, 10, 0.37);
    for (Scale s : {Scale::down2, Scale::up2})
        for (const Plane r = resample_bicubic(c, s); double v : r.data())
            EXPECT_NEAR(v, 0.37, 1e-14);
    const Plane round = resample_bicubic(resample_bicubic(c, Scale::up2), Scale::down2);
    for (double v : round.data())
        EXPECT_NEAR(v, 0.37, 1e-14);
}

TEST(Resample, ExtentsHalveAndDouble)
{
    const Image img = random_image(12, 18, 3, 1);
    const Image d = resample_bicubic(img, Scale::down2);
    const Image u = resample_bicubic(img, Scale::up2);
    EXPECT_EQ(d.height(), 6);
    EXPECT_EQ(d.width(), 9);
    EXPECT_EQ(d.channels(), 3);
    EXPECT_EQ(u.height(), 24);
    EXPECT_EQ(u.width(), 36);
}

TEST(Resample, OddExtentOnDown2IsRejected)
{
    EXPECT_THROW(resample_bicubic(Plane(7, 8), Scale::down2), DimensionError);
    EXPECT_THROW(resample_bicubic(Plane(8, 9), Scale::down2), DimensionError);
    EXPECT_NO_THROW(resample_bicubic(Plane(7, 9), Scale::up2));
}

TEST(Resample, LinearRampStaysLinear)
{
    const int w = 64;
    Plane ramp(8, w);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < w; ++x)
            ramp(y, x) = x / double(w - 1);
    const Plane d = resample_bicubic(ramp, Scale::down2);
    // Output sample o sits at input coordinate 2o + 0.5.
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x)
            EXPECT_NEAR(d(y, x), (2 * x + 0.5) / (w - 1), 1e-3);
}

TEST(Resample, DownOfUpRecoversSmoothRamp)
{
    Plane p(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            p(y, x) = 0.5 + 0.3 * std::sin(0.2 * x) * std::cos(0.15 * y) + 0.01 * x;
    const Plane r = resample_bicubic(resample_bicubic(p, Scale::up2), Scale::down2);
    EXPECT_LT(max_abs_diff(r.data(), p.data()), 2e-2);
}

TEST(Resample, AdjointIdentity)
{
    for (Scale s : {Scale::down2, Scale::up2}) {
        const Plane u = random_plane(10, 14, 3, -1, 1);
        const auto [oh, ow] = detail::scaled_extent(10, 14, s);
        const Plane v = random_plane(oh, ow, 4, -1, 1);
        const Plane au = resample_bicubic(u, s);
        detail::ResampleAxis ax_x(14, ow), ax_y(10, oh);
        std::vector<double> tmp(static_cast<std::size_t>(10) * ow, 0.0), atv(140, 0.0);
        detail::resample_cols_adjoint(v.data().data(), ow, ax_y, tmp.data());
        detail::resample_rows_adjoint(tmp.data(), 10, 14, ax_x, atv.data());
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < au.data().size(); ++i)
            lhs += au.data()[i] * v.data()[i];
        for (std::size_t i = 0; i < atv.size(); ++i)
            rhs += u.data()[i] * atv[i];
        EXPECT_NEAR(lhs, rhs, 1e-12);
    }
}
