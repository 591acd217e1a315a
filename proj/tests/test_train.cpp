#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace dwdn;
using namespace testing_support;

namespace {

ModelSpec tiny_spec(int levels = 2)
{
    ModelSpec s;
    s.levels = levels;
    s.hidden = 4;
    s.width = 6;
    return s;
}

std::vector<TrainingSample> toy_set(int n, int size, std::uint64_t seed, int kmax = 13)
{
    std::vector<SourceImage> src;
    for (int i = 0; i < 4; ++i)
        src.push_back({"s" + std::to_string(i), synthetic_scene(size + 32, size + 32, 1, seed + i)});
    DatasetConfig cfg;
    cfg.count = n;
    cfg.patch = size;
    cfg.kernel_min = 7;
    cfg.kernel_max = kmax;
    cfg.noise_min = 0.005;
    cfg.noise_max = 0.02;
    cfg.seed = seed;
    return samples_from(make_dataset(src, cfg));
}

Image offset(const Image& x, double d)
{
    Image y = x;
    for (double& v : y.data())
        v += d;
    return y;
}

std::vector<double> flat(const ParameterStore& p)
{
    std::vector<double> v;
    for (const auto& e : p.entries())
        v.insert(v.end(), e.value.data.begin(), e.value.data.end());
    return v;
}

} // namespace

TEST(Loss, MatchingPyramidIsZero)
{
    const Image gt = random_image(32, 32, 1, 1);
    EXPECT_EQ(loss_multiscale(gt_pyramid(gt, 3), gt), 0.0);
}

TEST(Loss, SingleScaleOffset)
{
    const Image gt = random_image(16, 16, 3, 2);
    EXPECT_NEAR(loss_multiscale({offset(gt, 0.2)}, gt), 0.2, 1e-12);
    EXPECT_NEAR(loss_multiscale({offset(gt, -0.2)}, gt, {0.5}), 0.1, 1e-12);
}

TEST(Loss, TwoScalesAdd)
{
    const Image gt = random_image(16, 16, 1, 3);
    const auto p = gt_pyramid(gt, 2);
    EXPECT_NEAR(loss_multiscale({offset(p[0], 0.1), offset(p[1], 0.3)}, gt, {1.0, 1.0}), 0.4, 1e-12);
}

TEST(Loss, Errors)
{
    const Image gt = random_image(16, 16, 1, 3);
    EXPECT_THROW(loss_multiscale({random_image(8, 8, 1, 1)}, gt), DimensionError);
    EXPECT_THROW(loss_multiscale({random_image(16, 16, 1, 1), gt}, gt), DimensionError);
    EXPECT_THROW(loss_multiscale({gt}, gt, {1.0, 1.0}), ParameterError);
    EXPECT_THROW(loss_multiscale({}, gt), ParameterError);
}

TEST(Loss, GraphMatchesImageForm)
{
    const Image gt = random_image(16, 16, 1, 4);
    const Image fine = random_image(16, 16, 1, 5), coarse = random_image(8, 8, 1, 6);
    Graph g;
    const NodeId a = g.constant(to_tensor(coarse)), b = g.constant(to_tensor(fine));
    const NodeId l = loss_graph(g, {a, b}, gt, {0.5, 2.0});
    EXPECT_NEAR(g.value(l).data[0], loss_multiscale({coarse, fine}, gt, {0.5, 2.0}), 1e-14);
}

TEST(Backward, ZeroLossGivesZeroGradients)
{
    const Model m = Model::create(tiny_spec(1), 3);
    TrainingSample s{random_image(16, 16, 1, 7), gen_kernel(trajectory_for(5, 7)), Image()};
    s.clean = deblur_pipeline(s.blurry, s.kernel, m);
    ParameterStore grads = m.params.zeros_like();
    EXPECT_EQ(sample_loss(m, m.params, s, {}, {}, &grads), 0.0);
    EXPECT_EQ(max_abs(flat(grads)), 0.0);
}

TEST(Backward, DoublingGammaDoublesGradients)
{
    const Model m = Model::create(tiny_spec(2), 4);
    const TrainingSample s{random_image(16, 16, 1, 8), gen_kernel(trajectory_for(5, 8)), random_image(16, 16, 1, 9)};
    ParameterStore g1 = m.params.zeros_like(), g2 = m.params.zeros_like();
    const double l1 = sample_loss(m, m.params, s, {1.0, 0.5}, {}, &g1);
    const double l2 = sample_loss(m, m.params, s, {2.0, 1.0}, {}, &g2);
    EXPECT_EQ(2.0 * l1, l2);
    const auto a = flat(g1), b = flat(g2);
    for (std::size_t i = 0; i < a.size(); ++i)
        ASSERT_EQ(2.0 * a[i], b[i]) << i;
}

TEST(Adam, FirstStepIsSignedLearningRate)
{
    ParameterStore w, g;
    w.add("w", Tensor({4}, std::vector<double>{0.0, 1.0, -2.0, 5.0}));
    g.add("w", Tensor({4}, std::vector<double>{3.0, -0.01, 1e-3, -40.0}));
    AdamState st = AdamState::for_params(w);
    AdamConfig cfg;
    cfg.round_to_float = false;
    adam_step(w, g, st, 0.01, cfg);
    const std::vector<double> expect{-0.01, 1.01, -2.01, 5.01};
    for (int i = 0; i < 4; ++i)
        EXPECT_NEAR(w.get("w").data[i], expect[i], 1e-7);
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientsLeaveWeights)
{
    ParameterStore w;
    w.add("w", random_tensor({3, 3}, 1));
    const auto before = w.get("w").data;
    const ParameterStore g = w.zeros_like();
    AdamState st = AdamState::for_params(w);
    AdamConfig cfg;
    cfg.round_to_float = false;
    for (int i = 0; i < 10; ++i)
        adam_step(w, g, st, 0.1, cfg);
    EXPECT_EQ(w.get("w").data, before);
}

TEST(Adam, QuadraticConverges)
{
    // Reference scalar recursion alongside the library step.
    ParameterStore w, g;
    w.add("w", Tensor({1}, 1.0));
    g.add("w", Tensor({1}));
    AdamState st = AdamState::for_params(w);
    AdamConfig cfg;
    cfg.round_to_float = false;
    double x = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
        g.get("w").data[0] = 2.0 * w.get("w").data[0];
        adam_step(w, g, st, 0.1, cfg);
        const double gr = 2.0 * x;
        m = 0.9 * m + 0.1 * gr;
        v = 0.999 * v + 0.001 * gr * gr;
        x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    EXPECT_LT(std::abs(w.get("w").data[0]), 0.1);
    EXPECT_NEAR(w.get("w").data[0], x, 1e-12);
}

TEST(Adam, NonFiniteGradientAborts)
{
    ParameterStore w, g;
    w.add("w", Tensor({2}, 1.0));
    g.add("w", Tensor({2}, std::vector<double>{0.0, std::nan("")}));
    AdamState st = AdamState::for_params(w);
    EXPECT_THROW(adam_step(w, g, st, 0.1), NumericError);
    EXPECT_EQ(w.get("w").data[0], 1.0);
    EXPECT_EQ(st.step, 0);
}

TEST(Schedule, HalvesExactly)
{
    TrainConfig cfg;
    cfg.lr = 3e-4;
    cfg.batch = 4;
    cfg.lr_halve_every = 5;
    const std::size_t n = 10; // 3 iterations per epoch
    EXPECT_EQ(cfg.iterations_per_epoch(n), 3);
    EXPECT_EQ(cfg.lr_at(0, n), 3e-4);
    EXPECT_EQ(cfg.lr_at(14, n), 3e-4);
    EXPECT_EQ(cfg.lr_at(15, n), 3e-4 / 2);
    EXPECT_EQ(cfg.lr_at(30, n), 3e-4 / 4);
}

TEST(Schedule, ConfigValidation)
{
    TrainConfig cfg;
    cfg.lr = 0.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = TrainConfig{};
    cfg.batch = 0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = TrainConfig{};
    cfg.iterations = 0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg.epochs = 2;
    EXPECT_NO_THROW(cfg.validate());
}

TEST(TrainLoop, BatchThreadsDoNotChangeResults)
{
    const Model m = Model::create(tiny_spec(), 5);
    const auto data = toy_set(5, 32, 10);
    std::vector<const TrainingSample*> batch;
    for (const auto& s : data)
        batch.push_back(&s);
    ParameterStore g1 = m.params.zeros_like(), g3 = m.params.zeros_like();
    const double l1 = batch_loss(m, m.params, batch, {}, {}, &g1, 1);
    const double l3 = batch_loss(m, m.params, batch, {}, {}, &g3, 3);
    EXPECT_EQ(l1, l3);
    EXPECT_EQ(flat(g1), flat(g3));
}

TEST(TrainLoop, ResumeContinuesScheduleAndState)
{
    TempDir dir("resume");
    const auto data = toy_set(6, 32, 20);
    const Model init = Model::create(tiny_spec(), 6);
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch = 2;
    cfg.lr_halve_every = 1; // halve every epoch so the schedule position matters
    cfg.iterations = 9;
    cfg.val_every = 0;

    const TrainResult full = train_loop(init, data, {}, cfg);

    TrainConfig first = cfg;
    first.iterations = 4;
    first.checkpoint_path = dir / "ck.dwdn";
    train_loop(init, data, {}, first);
    const TrainCheckpoint ck = checkpoint_from(load_weights(dir / "ck.dwdn"));
    EXPECT_EQ(ck.iteration, 4);
    EXPECT_EQ(ck.adam.step, 4);
    const TrainResult rest = train_loop(init, data, {}, cfg, ck);

    EXPECT_EQ(rest.iteration, 9);
    EXPECT_EQ(flat(rest.model.params), flat(full.model.params));
    EXPECT_EQ(rest.log.back().lr, full.log.back().lr);
    EXPECT_EQ(full.log.back().lr, cfg.lr / 4);
}

TEST(TrainLoop, CheckpointRoundTripIsBitIdentical)
{
    TempDir dir("ckpt");
    const auto data = toy_set(4, 32, 30);
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.iterations = 2;
    cfg.val_every = 0;
    cfg.checkpoint_path = dir / "ck.dwdn";
    const TrainResult r = train_loop(Model::create(tiny_spec(), 7), data, {}, cfg);
    const TrainCheckpoint ck = checkpoint_from(load_weights(cfg.checkpoint_path));
    EXPECT_EQ(flat(ck.model.params), flat(r.model.params));
    EXPECT_EQ(flat(ck.adam.m), flat(r.adam.m));
    EXPECT_EQ(flat(ck.adam.v), flat(r.adam.v));
    EXPECT_EQ(deblur_pipeline(data[0].blurry, data[0].kernel, ck.model).data(),
              deblur_pipeline(data[0].blurry, data[0].kernel, r.model).data());
    // Plain weights start a fresh optimizer.
    const TrainCheckpoint plain = checkpoint_from(r.model.to_weights());
    EXPECT_EQ(plain.iteration, 0);
    EXPECT_EQ(plain.adam.step, 0);
}

TEST(TrainLoop, CsvLogAppends)
{
    TempDir dir("log");
    const auto data = toy_set(4, 32, 40);
    const auto val = toy_set(2, 32, 41);
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch = 2;
    cfg.iterations = 4;
    cfg.log_path = dir / "log.csv";
    std::vector<LogRow> seen;
    const TrainResult r = train_loop(Model::create(tiny_spec(), 8), data, val, cfg, std::nullopt,
                                     [&](const LogRow& row) { seen.push_back(row); });
    ASSERT_EQ(r.log.size(), 2u);
    EXPECT_EQ(seen.size(), 2u);
    EXPECT_TRUE(r.log[0].val_psnr.has_value());
    train_loop(Model::create(tiny_spec(), 8), data, val, cfg);
    std::ifstream in(cfg.log_path);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);)
        lines.push_back(l);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0], "iteration,lr,train_loss,val_psnr");
    EXPECT_EQ(lines[1].substr(0, 8), "2,0.001,");
    EXPECT_EQ(lines[1], lines[3]);
}

TEST(TrainLoop, NanLossAbortsAndKeepsCheckpoint)
{
    TempDir dir("nan");
    const auto data = toy_set(2, 32, 50);
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch = 2;
    cfg.iterations = 2;
    cfg.val_every = 0;
    cfg.pipeline.ratio = 0.01;
    cfg.checkpoint_path = dir / "ck.dwdn";
    train_loop(Model::create(tiny_spec(), 9), data, {}, cfg);
    const std::string good = read_text_file(cfg.checkpoint_path);

    auto poisoned = data;
    poisoned[0].blurry.data()[5] = std::nan("");
    cfg.iterations = 4;
    try {
        train_loop(Model::create(tiny_spec(), 9), poisoned, {}, cfg, checkpoint_from(deserialize_weights(good)));
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("ck.dwdn"), std::string::npos) << e.what();
    }
    EXPECT_EQ(read_text_file(cfg.checkpoint_path), good);
}

TEST(TrainLoop, ToyRunHalvesLoss)
{
    const auto data = toy_set(8, 64, 60, 15);
    ModelSpec spec;
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch = 2;
    cfg.iterations = 200;
    cfg.val_every = 0;
    const Model init = Model::create(spec, 11);
    const double before = dataset_loss(init, data, {});
    const TrainResult r = train_loop(init, data, {}, cfg);
    const double after = dataset_loss(r.model, data, {});
    EXPECT_LE(after, 0.5 * before) << before << " -> " << after;

    // Epoch means (4 iterations each); 12 epochs ~ a 50-iteration window.
    int windows = 0, rising = 0;
    for (std::size_t i = 0; i + 12 < r.log.size(); ++i, ++windows)
        rising += r.log[i + 12].train_loss > r.log[i].train_loss;
    EXPECT_LE(rising, windows / 10) << rising << " of " << windows;
}
