// dwdn: synthesize fixtures, deblur, train, evaluate and run the ablation grid.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dwdn/dwdn.hpp"

namespace {

using namespace dwdn;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

/// Defaults, then the --config file, then explicit flags.
CliConfig resolve_config(const Globals& g, const std::vector<std::pair<std::string, std::string>>& overrides)
{
    CliConfig cfg;
    if (!g.config_path.empty())
        cfg.load_text(read_text_file(g.config_path));
    if (g.seed)
        cfg.set("seed", std::to_string(*g.seed));
    if (g.threads)
        cfg.set("threads", std::to_string(*g.threads));
    for (const auto& [k, v] : overrides)
        cfg.set(k, v);
    return cfg;
}

std::pair<double, double> parse_range(const std::string& text, const char* what)
{
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const double v = std::stod(text);
            return {v, v};
        }
        return {std::stod(text.substr(0, dots)), std::stod(text.substr(dots + 2))};
    } catch (const std::logic_error&) {
        throw UsageError(std::string("--") + what + " expects LO..HI, got '" + text + "'");
    }
}

std::string fmt(double v, int digits)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

/// Runs a model on an image; single-channel models are applied per channel.
Image deblur_any(const Image& y, const Kernel& k, const Model& m, const PipelineOptions& opt)
{
    if (y.channels() == m.spec.image_channels)
        return deblur_pipeline(y, k, m, opt);
    if (m.spec.image_channels != 1)
        throw TopologyError("model expects " + std::to_string(m.spec.image_channels) + "-channel images");
    std::vector<Plane> planes;
    for (int c = 0; c < y.channels(); ++c)
        planes.push_back(
            deblur_pipeline(Image::from_planes(std::vector<Plane>{y.channel(c)}), k, m, opt).channel(0));
    return Image::from_planes(planes);
}

void log_ratio(const PipelineOptions& opt)
{
    if (opt.ratio)
        std::cerr << "info: regularization fixed at s_n/s_x = " << *opt.ratio
                  << " for every feature (estimated stats ignored)\n";
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string src, out;
    std::optional<int> count, patch;
    std::string kernel, noise;
};

int cmd_synth(const Globals& g, const SynthArgs& a)
{
    std::vector<std::pair<std::string, std::string>> ov;
    if (a.count)
        ov.emplace_back("synth.count", std::to_string(*a.count));
    if (a.patch)
        ov.emplace_back("synth.patch", std::to_string(*a.patch));
    if (!a.kernel.empty()) {
        const auto [lo, hi] = parse_range(a.kernel, "kernel");
        ov.emplace_back("synth.kernel_min", std::to_string(static_cast<int>(lo)));
        ov.emplace_back("synth.kernel_max", std::to_string(static_cast<int>(hi)));
    }
    if (!a.noise.empty()) {
        const auto [lo, hi] = parse_range(a.noise, "noise");
        ov.emplace_back("synth.noise_min", fmt(lo, 17));
        ov.emplace_back("synth.noise_max", fmt(hi, 17));
    }
    const CliConfig cfg = resolve_config(g, ov);
    const DatasetConfig dc = cfg.dataset();

    const fs::path out = a.out;
    if (fs::exists(out) && !(fs::is_directory(out) && fs::is_empty(out)))
        throw IoError("output directory " + out.string() + " exists and is not empty");
    const auto fixtures = make_dataset(load_sources(a.src), dc);

    // Build the set next to the target, then move it into place.
    fs::path staging = out;
    staging += ".partial";
    std::error_code ec;
    fs::remove_all(staging, ec);
    try {
        fs::create_directories(staging);
        write_fixtures(staging, fixtures);
        if (fs::exists(out))
            fs::remove(out);
        fs::rename(staging, out);
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }

    std::cout << "wrote " << fixtures.size() << " fixtures to " << out.string() << " (patch " << dc.patch
              << ", kernels " << dc.kernel_min << ".." << dc.kernel_max << ", noise " << dc.noise_min << ".."
              << dc.noise_max << ", seed " << dc.seed << ")\n";
    std::cout << "index  sigma     kernel  source\n";
    for (const auto& f : fixtures)
        std::cout << std::setw(5) << f.meta.index << "  " << fmt(f.meta.sigma, 6) << "  " << std::setw(6)
                  << f.meta.kernel_size << "  " << f.meta.source << "\n";
    return 0;
}

// ---------------------------------------------------------------- deblur

struct DeblurArgs {
    std::string image, kernel, out, gt, bank, weights;
    std::optional<int> levels;
    std::optional<double> snr_ratio;
    bool no_refine = false;
    int depth = 16;
};

Model model_for(const CliConfig& cfg, const std::string& weights, bool bank_given, bool no_refine, int channels)
{
    ModelSpec spec = cfg.model_spec();
    spec.image_channels = channels;
    if (no_refine) {
        if (spec.bank != BankKind::intensity && spec.bank != BankKind::intensity_plus_gradient)
            throw UsageError("--no-refine returns the deconvolved intensity planes; use --bank intensity or "
                             "intensity+gradient");
        spec.refiner = RefinerKind::identity;
        spec.levels = 1;
        return Model::create(spec, cfg.seed());
    }
    if (!weights.empty()) {
        Model m = Model::from_weights(load_weights(weights));
        if (bank_given && m.spec.bank != spec.bank)
            throw UsageError("--bank " + to_string(spec.bank) + " disagrees with the weights (" + to_string(m.spec.bank)
                             + ")");
        return m;
    }
    if (spec.bank == BankKind::learned)
        throw UsageError("--bank learned needs --weights");
    std::cerr << "warning: no --weights given; refining with an untrained network (seed " << cfg.seed() << ")\n";
    return Model::create(spec, cfg.seed());
}

int cmd_deblur(const Globals& g, const DeblurArgs& a)
{
    std::vector<std::pair<std::string, std::string>> ov;
    if (!a.bank.empty())
        ov.emplace_back("bank", a.bank);
    if (a.levels)
        ov.emplace_back("levels", std::to_string(*a.levels));
    if (a.snr_ratio)
        ov.emplace_back("snr_ratio", fmt(*a.snr_ratio, 17));
    const CliConfig cfg = resolve_config(g, ov);
    const PipelineOptions opt = cfg.pipeline();

    const Image y = read_image(a.image);
    const Kernel k = read_kernel(a.kernel);
    const Model m = model_for(cfg, a.weights, !a.bank.empty(), a.no_refine, y.channels());
    log_ratio(opt);
    const Image x = deblur_any(y, k, m, opt);
    write_image(a.out, x, a.depth);
    std::cout << "wrote " << a.out << " (" << to_string(m.spec.bank) << (a.no_refine ? ", wiener only" : "")
              << ")\n";
    if (!a.gt.empty()) {
        const Image gt = read_image(a.gt);
        std::cout << "PSNR: " << fmt(psnr(x, gt), 4) << " dB\n";
        std::cout << "SSIM: " << fmt(ssim(x, gt), 6) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string fixtures, csv;
    std::vector<std::string> methods{"blurry", "wiener"};
};

struct EvalRow {
    std::string method, fixture;
    double sigma = 0.0;
    int kernel_size = 0;
    double psnr = 0.0, ssim = 0.0;
};

std::string noise_bucket(double sigma)
{
    const int lo = static_cast<int>(std::floor(sigma * 100.0 + 1e-9));
    return std::to_string(lo) + "-" + std::to_string(lo + 1) + "%";
}

std::string kernel_bucket(int size)
{
    // Groups of four odd sizes starting at 13: 13-19, 21-27, ...
    const int lo = 13 + 8 * static_cast<int>(std::floor((size - 13) / 8.0));
    return std::to_string(lo) + "-" + std::to_string(lo + 6);
}

inline constexpr const char* eval_csv_header = "method,fixture,sigma,kernel_size,noise_bucket,kernel_bucket,psnr,ssim";

int cmd_eval(const Globals& g, const EvalArgs& a)
{
    const CliConfig cfg = resolve_config(g, {});
    const PipelineOptions opt = cfg.pipeline();
    const auto fixtures = read_fixtures(a.fixtures, true);
    if (fixtures.empty())
        throw InputError("no fixtures in " + a.fixtures);
    log_ratio(opt);

    std::vector<EvalRow> rows;
    for (const auto& method : a.methods) {
        std::optional<Model> model;
        if (method != "blurry" && method != "wiener")
            model = Model::from_weights(load_weights(method));
        for (const auto& f : fixtures) {
            Image x;
            if (method == "blurry")
                x = f.blurry;
            else if (method == "wiener")
                x = wiener_image(f.blurry, f.kernel, WienerOptions{opt.ratio, opt.stats, true}, opt.boundary);
            else
                x = deblur_any(f.blurry, f.kernel, *model, opt);
            rows.push_back({method, f.name, f.meta.sigma, f.kernel.height(), psnr(x, f.clean), ssim(x, f.clean)});
        }
    }

    std::ostringstream csv;
    csv << eval_csv_header << "\n";
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12f", v);
        return std::string(buf);
    };
    for (const auto& r : rows)
        csv << r.method << "," << r.fixture << "," << num(r.sigma) << "," << r.kernel_size << ","
            << noise_bucket(r.sigma) << "," << kernel_bucket(r.kernel_size) << "," << num(r.psnr) << ","
            << num(r.ssim) << "\n";

    // Means: overall, per noise bucket, per kernel bucket.
    struct Acc {
        double psnr = 0, ssim = 0;
        int n = 0;
    };
    std::vector<std::tuple<std::string, std::string, Acc>> groups;
    auto add = [&](const std::string& method, const std::string& group, const EvalRow& r) {
        for (auto& [m, gname, acc] : groups)
            if (m == method && gname == group) {
                acc.psnr += r.psnr;
                acc.ssim += r.ssim;
                ++acc.n;
                return;
            }
        groups.emplace_back(method, group, Acc{r.psnr, r.ssim, 1});
    };
    for (const auto& r : rows)
        add(r.method, "all", r);
    for (const auto& r : rows)
        add(r.method, "noise " + noise_bucket(r.sigma), r);
    for (const auto& r : rows)
        add(r.method, "kernel " + kernel_bucket(r.kernel_size), r);
    for (const auto& [m, gname, acc] : groups)
        if (gname == "all")
            csv << m << ",mean,,,,," << num(acc.psnr / acc.n) << "," << num(acc.ssim / acc.n) << "\n";

    std::size_t width = 6;
    for (const auto& m : a.methods)
        width = std::max(width, m.size());
    std::cout << std::left << std::setw(static_cast<int>(width)) << "method" << "  " << std::setw(14) << "group"
              << std::right << std::setw(4) << "n" << std::setw(11) << "PSNR" << std::setw(9) << "SSIM" << "\n";
    for (const auto& [m, gname, acc] : groups)
        std::cout << std::left << std::setw(static_cast<int>(width)) << m << "  " << std::setw(14) << gname
                  << std::right << std::setw(4) << acc.n << std::setw(11) << fmt(acc.psnr / acc.n, 4) << std::setw(9)
                  << fmt(acc.ssim / acc.n, 4) << "\n";

    if (!a.csv.empty())
        write_text_file(a.csv, csv.str());
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string train, val, out, log, resume, bank;
    std::optional<int> levels, batch, epochs;
    std::optional<long> iterations;
    std::optional<double> lr;
    bool no_wiener = false;
};

int cmd_train(const Globals& g, const TrainArgs& a)
{
    std::vector<std::pair<std::string, std::string>> ov;
    if (!a.bank.empty())
        ov.emplace_back("bank", a.bank);
    if (a.levels)
        ov.emplace_back("levels", std::to_string(*a.levels));
    if (a.batch)
        ov.emplace_back("train.batch", std::to_string(*a.batch));
    if (a.epochs) {
        ov.emplace_back("train.epochs", std::to_string(*a.epochs));
        if (!a.iterations)
            ov.emplace_back("train.iterations", "0");
    }
    if (a.iterations)
        ov.emplace_back("train.iterations", std::to_string(*a.iterations));
    if (a.lr)
        ov.emplace_back("train.lr", fmt(*a.lr, 17));
    if (a.no_wiener)
        ov.emplace_back("use_wiener", "0");
    const CliConfig cfg = resolve_config(g, ov);
    TrainConfig tc = cfg.train();
    tc.checkpoint_path = a.out;
    tc.log_path = a.log;

    const auto train = samples_from(read_fixtures(a.train, true));
    if (train.empty())
        throw InputError("no training fixtures in " + a.train);
    std::vector<TrainingSample> val;
    if (!a.val.empty())
        val = samples_from(read_fixtures(a.val, true));

    ModelSpec spec = cfg.model_spec();
    spec.image_channels = train.front().blurry.channels();
    std::optional<TrainCheckpoint> resume;
    if (!a.resume.empty())
        resume = checkpoint_from(load_weights(a.resume));
    const Model init = resume ? resume->model : Model::create(spec, cfg.seed());
    log_ratio(tc.pipeline);

    std::cout << train_log_header << "\n";
    const TrainResult r = train_loop(init, train, val, tc, resume,
                                     [](const LogRow& row) { std::cout << format_log_row(row) << std::endl; });
    std::cout << "saved " << r.iteration << "-iteration checkpoint to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
    std::string train, test, csv, weights_dir, arms = "full";
    std::optional<long> iterations;
};

std::string arm_file(const AblationArm& arm)
{
    std::string s = arm.name();
    for (char& c : s)
        if (c == '/' || c == '+')
            c = '_';
    return s + ".dwdn";
}

int cmd_ablate(const Globals& g, const AblateArgs& a)
{
    std::vector<std::pair<std::string, std::string>> ov;
    if (a.iterations)
        ov.emplace_back("train.iterations", std::to_string(*a.iterations));
    const CliConfig cfg = resolve_config(g, ov);
    if (a.arms != "full" && a.arms != "core")
        throw UsageError("--arms expects full or core");

    AblationConfig ac;
    ac.train = cfg.train();
    ac.base = cfg.model_spec();
    ac.init_seed = cfg.seed();
    const auto test = samples_from(read_fixtures(a.test, true));
    if (test.empty())
        throw InputError("no test fixtures in " + a.test);
    ac.base.image_channels = test.front().blurry.channels();
    std::vector<TrainingSample> train;
    if (!a.train.empty())
        train = samples_from(read_fixtures(a.train, true));
    if (!a.weights_dir.empty())
        ac.pretrained = [dir = fs::path(a.weights_dir)](const AblationArm& arm) -> std::optional<Model> {
            const fs::path p = dir / arm_file(arm);
            if (!fs::exists(p))
                return std::nullopt;
            return Model::from_weights(load_weights(p));
        };
    ac.progress = [](const std::string& arm) { std::cerr << "arm " << arm << "\n"; };
    log_ratio(ac.train.pipeline);

    const auto arms = a.arms == "full" ? full_ablation_grid() : core_ablation_arms();
    std::vector<AblationRow> rows = baseline_rows(test, WienerOptions{ac.train.pipeline.ratio, ac.train.pipeline.stats, true},
                                                  ac.train.pipeline.boundary);
    const auto trained = run_ablation(arms, train, test, ac);
    rows.insert(rows.end(), trained.begin(), trained.end());

    std::ostringstream csv;
    csv << "arm,psnr,ssim,final_loss\n";
    std::cout << std::left << std::setw(36) << "arm" << std::right << std::setw(10) << "PSNR" << std::setw(9) << "SSIM"
              << "\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(36) << r.arm << std::right << std::setw(10) << fmt(r.psnr, 4)
                  << std::setw(9) << fmt(r.ssim, 4) << "\n";
        csv << r.arm << "," << fmt(r.psnr, 6) << "," << fmt(r.ssim, 6) << "," << fmt(r.final_loss, 6) << "\n";
    }
    std::cout << "\nexpected orderings:\n";
    for (const auto& c : check_orderings(trained)) {
        const char* verdict = !c.evaluated ? "not run" : c.holds ? "ok" : c.hard ? "VIOLATED (hard)" : "VIOLATED";
        std::cout << "  " << std::left << std::setw(38) << c.description << verdict << "\n";
    }
    if (!a.csv.empty())
        write_text_file(a.csv, csv.str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Feature-space Wiener deconvolution toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", g.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "root random seed");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate blurred fixtures from clean images");
    synth->add_option("--src", sa.src, "directory of clean source images")->required();
    synth->add_option("--out", sa.out, "output fixture directory")->required();
    synth->add_option("--count", sa.count, "number of fixtures");
    synth->add_option("--patch", sa.patch, "patch side length");
    synth->add_option("--kernel", sa.kernel, "kernel size range LO..HI (odd)");
    synth->add_option("--noise", sa.noise, "noise sigma range LO..HI");

    DeblurArgs da;
    auto* deblur = app.add_subcommand("deblur", "deblur one image with a known kernel");
    deblur->add_option("--image", da.image, "blurry input image")->required();
    deblur->add_option("--kernel", da.kernel, "kernel text file")->required();
    deblur->add_option("--out", da.out, "output PNG")->required();
    deblur->add_option("--gt", da.gt, "ground truth for PSNR/SSIM");
    deblur->add_option("--bank", da.bank, "intensity | gradient | intensity+gradient | learned");
    deblur->add_option("--weights", da.weights, "trained weights file");
    deblur->add_option("--levels", da.levels, "pyramid levels");
    deblur->add_option("--snr-ratio", da.snr_ratio, "fixed s_n/s_x overriding the estimates");
    deblur->add_flag("--no-refine", da.no_refine, "stop after the Wiener step");
    deblur->add_option("--depth", da.depth, "output bit depth")->check(CLI::IsMember({8, 16}));

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train extractor and refiner on a fixture set");
    train->add_option("--train", ta.train, "training fixture directory")->required();
    train->add_option("--val", ta.val, "held-out fixture directory");
    train->add_option("--out", ta.out, "weights/checkpoint output")->required();
    train->add_option("--log", ta.log, "append-only CSV metrics log");
    train->add_option("--resume", ta.resume, "continue from a checkpoint");
    train->add_option("--bank", ta.bank, "filter bank");
    train->add_option("--levels", ta.levels, "pyramid levels");
    train->add_option("--iterations", ta.iterations, "optimizer steps");
    train->add_option("--epochs", ta.epochs, "epochs (when --iterations is not given)");
    train->add_option("--batch", ta.batch, "batch size");
    train->add_option("--lr", ta.lr, "initial learning rate");
    train->add_flag("--no-wiener", ta.no_wiener, "skip the Wiener step");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "score methods on a fixture set");
    eval->add_option("--fixtures", ea.fixtures, "fixture directory")->required();
    eval->add_option("--method", ea.methods, "blurry | wiener | path to weights (repeatable)");
    eval->add_option("--csv", ea.csv, "write per-image and mean metrics as CSV");

    AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "train and score the ablation grid");
    ablate->add_option("--train", aa.train, "training fixture directory");
    ablate->add_option("--test", aa.test, "held-out fixture directory")->required();
    ablate->add_option("--iterations", aa.iterations, "optimizer steps per arm");
    ablate->add_option("--arms", aa.arms, "full (16 arms) or core (the arms the orderings use)");
    ablate->add_option("--weights-dir", aa.weights_dir, "pretrained weights per arm (<arm>.dwdn)");
    ablate->add_option("--csv", aa.csv, "write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    if (*seed_opt)
        g.seed = seed;
    if (*threads_opt)
        g.threads = threads;

    try {
        if (*synth)
            return cmd_synth(g, sa);
        if (*deblur)
            return cmd_deblur(g, da);
        if (*train)
            return cmd_train(g, ta);
        if (*eval)
            return cmd_eval(g, ea);
        if (*ablate)
            return cmd_ablate(g, aa);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
