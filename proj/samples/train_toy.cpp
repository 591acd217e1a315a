// Train a small intensity+gradient model on synthetic patches and report
// held-out PSNR against image-space Wiener.
//
//   sample_train_toy [iterations]

#include <cstdio>
#include <cstdlib>

#include "dwdn/dwdn.hpp"

namespace {

std::vector<dwdn::TrainingSample> toy_set(int n, std::uint64_t seed)
{
    using namespace dwdn;
    std::vector<SourceImage> src;
    for (int i = 0; i < n; ++i)
        src.push_back({"scene" + std::to_string(i), synthetic_scene(96, 96, 1, seed + i)});
    DatasetConfig dc;
    dc.count = n;
    dc.kernel_max = 19;
    dc.noise_max = 0.02;
    dc.seed = seed;
    return samples_from(make_dataset(src, dc));
}

} // namespace

int main(int argc, char** argv)
{
    using namespace dwdn;
    const long iterations = argc > 1 ? std::atol(argv[1]) : 300;
    const auto train = toy_set(8, 100);
    const auto val = toy_set(4, 900);

    ModelSpec spec;
    spec.hidden = 8;
    spec.width = 16;
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch = 2;
    cfg.iterations = iterations;
    cfg.val_every = 10;

    const auto r = train_loop(Model::create(spec, 1), train, val, cfg, std::nullopt, [](const LogRow& row) {
        std::printf("%s\n", format_log_row(row).c_str());
    });

    double wiener = 0.0;
    for (const auto& s : val)
        wiener += psnr(wiener_image(s.blurry, s.kernel), s.clean);
    std::printf("trained %.2f dB, image wiener %.2f dB\n", mean_psnr(r.model, val), wiener / val.size());
}
