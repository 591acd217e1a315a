#include <gtest/gtest.h>

#include "support.hpp"

using namespace dwdn;
using namespace testing_support;

namespace {

FeatureStack random_stack(int m, int h, int w, std::uint64_t seed)
{
    FeatureStack s{{}, "test"};
    for (int i = 0; i < m; ++i)
        s.planes.push_back(random_plane(h, w, seed + i, -1.0, 1.0));
    return s;
}

ModelSpec small_spec(int levels = 2)
{
    ModelSpec s;
    s.levels = levels;
    s.hidden = 6;
    s.width = 8;
    return s;
}

} // namespace

TEST(Pyramid, SingleLevelIsInput)
{
    const FeatureStack s = random_stack(3, 12, 10, 1);
    const Pyramid p = build_pyramid(s, 1);
    ASSERT_EQ(p.levels.size(), 1u);
    for (int i = 0; i < 3; ++i)
        EXPECT_EQ(p.levels[0].planes[i].data(), s.planes[i].data());
}

TEST(Pyramid, LevelsAreIndependentDown2)
{
    const FeatureStack s = random_stack(2, 64, 64, 2);
    const Pyramid p = build_pyramid(s, 3);
    ASSERT_EQ(p.levels.size(), 3u);
    EXPECT_EQ(p.levels[1].height(), 32);
    EXPECT_EQ(p.levels[0].width(), 16);
    for (int i = 0; i < 2; ++i) {
        const Plane d1 = resample_bicubic(s.planes[i], Scale::down2);
        EXPECT_EQ(p.levels[1].planes[i].data(), d1.data());
        EXPECT_EQ(p.levels[0].planes[i].data(), resample_bicubic(d1, Scale::down2).data());
    }
}

TEST(Pyramid, ConstantsStayConstant)
{
    FeatureStack s{{Plane(32, 48, 0.7)}, ""};
    for (const auto& lvl : build_pyramid(s, 4).levels)
        for (double v : lvl.planes[0].data())
            EXPECT_NEAR(v, 0.7, 1e-14);
}

TEST(Pyramid, IndivisibleExtent)
{
    EXPECT_THROW(build_pyramid(random_stack(1, 12, 10, 3), 3), DimensionError);
    EXPECT_THROW(build_pyramid(random_stack(1, 12, 12, 3), 0), ParameterError);
}

TEST(Refine, SingleLevelIsOneForwardPass)
{
    const Model m = Model::create(small_spec(1), 3);
    const FeatureStack s = random_stack(3, 16, 16, 4);
    const RefineResult r = refine_forward(build_pyramid(s, 1), m);
    ASSERT_EQ(r.images.size(), 1u);

    Graph g;
    const auto out = refiner_level(g, m.params, m.spec.refiner_topology(), g.constant(to_tensor(s.planes)), std::nullopt);
    EXPECT_EQ(r.images[0].data(), to_image(g.value(out.image)).data());
    EXPECT_FALSE(m.params.contains("refiner.in_lk.weight"));
}

TEST(Refine, ZeroWeightsGiveZeroOutputs)
{
    Model m = Model::create(small_spec(3), 5);
    for (auto& e : m.params.entries())
        std::fill(e.value.data.begin(), e.value.data.end(), 0.0);
    const RefineResult r = refine_forward(build_pyramid(random_stack(3, 32, 32, 5), 3), m);
    ASSERT_EQ(r.images.size(), 3u);
    for (const auto& img : r.images)
        EXPECT_EQ(max_abs(img.data()), 0.0);
}

TEST(Refine, Deterministic)
{
    const FeatureStack s = random_stack(3, 32, 32, 6);
    const RefineResult a = refine_forward(build_pyramid(s, 2), Model::create(small_spec(), 9));
    const RefineResult b = refine_forward(build_pyramid(s, 2), Model::create(small_spec(), 9));
    for (std::size_t l = 0; l < a.images.size(); ++l)
        EXPECT_EQ(a.images[l].data(), b.images[l].data());
    EXPECT_EQ(a.hidden[0].shape, (std::vector<int>{6, 16, 16}));
    EXPECT_EQ(a.images[0].height(), 16);
    EXPECT_EQ(a.images[1].height(), 32);
}

TEST(Refine, ChannelMismatchIsTopologyError)
{
    const Model m = Model::create(small_spec(), 1);
    EXPECT_THROW(refine_forward(build_pyramid(random_stack(4, 16, 16, 1), 2), m), TopologyError);
    EXPECT_THROW(refine_forward(build_pyramid(random_stack(3, 16, 16, 1), 1), m), TopologyError);
    EXPECT_THROW(deblur_pipeline(random_image(16, 16, 3, 1), Kernel::delta(3), m), TopologyError);
}

TEST(Refine, ExtentBookkeepingAllEvenSizes)
{
    ModelSpec spec = small_spec(2);
    spec.hidden = 2;
    spec.width = 2;
    const Model m = Model::create(spec, 2);
    for (int h = 16; h <= 128; h += 2) {
        const int w = 144 - h; // exercise non-square extents too
        const Image y = random_image(h, w, 1, h);
        Image out;
        ASSERT_NO_THROW(out = deblur_pipeline(y, gen_kernel(trajectory_for(7, h)), m)) << h << "x" << w;
        EXPECT_EQ(out.height(), h);
        EXPECT_EQ(out.width(), w);
    }
}

TEST(Refine, OddExtentsArePaddedAndCropped)
{
    const Model m = Model::create(small_spec(), 2);
    const Image out = deblur_pipeline(random_image(37, 29, 1, 3), gen_kernel(trajectory_for(9, 3)), m);
    EXPECT_EQ(out.height(), 37);
    EXPECT_EQ(out.width(), 29);
    EXPECT_TRUE(all_finite(out.data()));
}

TEST(Pipeline, DegeneratesToImageSpaceWiener)
{
    ModelSpec spec;
    spec.bank = BankKind::intensity;
    spec.levels = 1;
    spec.refiner = RefinerKind::identity;
    const Model m = Model::create(spec, 0);
    EXPECT_EQ(m.params.size(), 0u);
    for (std::uint64_t seed : {1, 2, 3}) {
        const Image x = synthetic_scene(48, 40, 1, seed);
        const Kernel k = gen_kernel(trajectory_for(11, seed));
        const Image y = blur(x, k, NoiseSpec{0.01, seed});
        EXPECT_LT(max_abs_diff(deblur_pipeline(y, k, m).data(), wiener_image(y, k).data()), 1e-10);
        PipelineOptions fixed;
        fixed.ratio = 0.003;
        WienerOptions wf;
        wf.ratio = 0.003;
        EXPECT_LT(max_abs_diff(deblur_pipeline(y, k, m, fixed).data(), wiener_image(y, k, wf).data()), 1e-10);
    }
}

TEST(Pipeline, DegeneracyHoldsPerChannel)
{
    ModelSpec spec;
    spec.bank = BankKind::intensity;
    spec.image_channels = 3;
    spec.levels = 1;
    spec.refiner = RefinerKind::identity;
    const Model m = Model::create(spec, 0);
    const Image y = random_image(30, 34, 3, 4);
    const Kernel k = gen_kernel(trajectory_for(9, 4));
    EXPECT_LT(max_abs_diff(deblur_pipeline(y, k, m).data(), wiener_image(y, k).data()), 1e-10);
}

TEST(Pipeline, UntrainedModelIsFinite)
{
    for (BankKind kind : {BankKind::intensity, BankKind::gradient, BankKind::intensity_plus_gradient, BankKind::learned}) {
        ModelSpec spec = small_spec();
        spec.bank = kind;
        spec.learned_features = 4;
        const Model m = Model::create(spec, 8);
        const Image out = deblur_pipeline(synthetic_scene(40, 40, 1, 8), gen_kernel(trajectory_for(13, 8)), m);
        EXPECT_TRUE(all_finite(out.data())) << to_string(kind);
    }
}

TEST(Pipeline, NoNanOnDegenerateInputs)
{
    const Model m = Model::create(small_spec(), 3);
    const Kernel k = gen_kernel(trajectory_for(9, 5));
    // Constant (saturated) images give s_n = 0 and floored s_x.
    for (double level : {0.0, 1.0, 1e6}) {
        const Image out = deblur_pipeline(Image(32, 32, 1, level), k, m);
        EXPECT_TRUE(all_finite(out.data())) << level;
    }
    Image clipped = synthetic_scene(32, 32, 1, 2);
    for (double& v : clipped.data())
        v = v > 0.5 ? 1.0 : v;
    EXPECT_TRUE(all_finite(deblur_pipeline(clipped, k, m).data()));
    PipelineOptions zero;
    zero.ratio = 0.0;
    EXPECT_TRUE(all_finite(deblur_pipeline(clipped, Kernel::delta(3), m, zero).data()));
}

TEST(Model, SpecValidation)
{
    ModelSpec s;
    s.levels = 0;
    EXPECT_THROW(Model::create(s, 0), ParameterError);
    s = ModelSpec{};
    s.refiner = RefinerKind::identity;
    s.bank = BankKind::gradient;
    EXPECT_THROW(Model::create(s, 0), ParameterError);
    s = ModelSpec{};
    s.image_channels = 2;
    EXPECT_THROW(Model::create(s, 0), ParameterError);
}
