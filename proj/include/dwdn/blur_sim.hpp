#pragma once

// Synthetic observations y = x * k + n: random-trajectory motion kernels,
// calibrated Gaussian noise, procedural test scenes and on-disk fixture sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dwdn/convolve.hpp"
#include "dwdn/image.hpp"
#include "dwdn/io.hpp"

namespace dwdn {

/// splitmix64 finalizer; stream seeds for tuple i derive from (seed, i).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct NoiseSpec {
    double sigma = 0.0; // fraction of peak
    std::uint64_t seed = 0;
};

struct TrajectoryKernelSpec {
    int size = 15;
    int steps = 30;
    double anxiety = 0.3;     // std of the per-step heading change, radians
    double smoothing = 0.5;   // Gaussian sigma applied after splatting; 0 disables
    std::uint64_t seed = 0;
};

/// Random motion PSF: a unit-step walk with Gaussian-perturbed heading,
/// rescaled to fit the support and bilinearly splatted.
inline Kernel gen_kernel(const TrajectoryKernelSpec& spec)
{
    if (spec.size < 3 || spec.size > 101 || spec.size % 2 == 0)
        throw ParameterError("kernel size must be odd and within [3, 101], got " + std::to_string(spec.size));
    if (spec.steps < 0 || spec.anxiety < 0.0 || spec.smoothing < 0.0)
        throw ParameterError("kernel steps, anxiety and smoothing must be non-negative");
    const int n = spec.size;
    if (spec.steps == 0)
        return Kernel::delta(n);

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> turn(0.0, 1.0);
    double heading = uni(rng);
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    for (int i = 0; i < spec.steps; ++i) {
        heading += spec.anxiety * turn(rng);
        const auto [py, px] = pts.back();
        pts.emplace_back(py + std::sin(heading), px + std::cos(heading));
    }

    double min_y = 1e300, max_y = -1e300, min_x = 1e300, max_x = -1e300;
    for (const auto& [py, px] : pts) {
        min_y = std::min(min_y, py);
        max_y = std::max(max_y, py);
        min_x = std::min(min_x, px);
        max_x = std::max(max_x, px);
    }
    // Leave a one-pixel margin on each side for splatting and smoothing.
    const double limit = n - 3.0;
    const double extent = std::max(max_y - min_y, max_x - min_x);
    const double scale = extent > limit ? limit / extent : 1.0;
    const double cy = 0.5 * (min_y + max_y), cx = 0.5 * (min_x + max_x);
    const double center = n / 2;

    std::vector<double> grid(static_cast<std::size_t>(n) * n, 0.0);
    for (const auto& [py, px] : pts) {
        const double y = center + (py - cy) * scale;
        const double x = center + (px - cx) * scale;
        const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
        const double ty = y - y0, tx = x - x0;
        grid[static_cast<std::size_t>(y0) * n + x0] += (1 - ty) * (1 - tx);
        grid[static_cast<std::size_t>(y0) * n + x0 + 1] += (1 - ty) * tx;
        grid[static_cast<std::size_t>(y0 + 1) * n + x0] += ty * (1 - tx);
        grid[static_cast<std::size_t>(y0 + 1) * n + x0 + 1] += ty * tx;
    }

    if (spec.smoothing > 0.0) {
        double g[3];
        for (int i = 0; i < 3; ++i)
            g[i] = std::exp(-0.5 * (i - 1) * (i - 1) / (spec.smoothing * spec.smoothing));
        const double gs = g[0] + g[1] + g[2];
        for (double& v : g)
            v /= gs;
        std::vector<double> tmp(grid.size(), 0.0), out(grid.size(), 0.0);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                for (int d = -1; d <= 1; ++d)
                    if (x + d >= 0 && x + d < n)
                        tmp[static_cast<std::size_t>(y) * n + x] += g[d + 1] * grid[static_cast<std::size_t>(y) * n + x + d];
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                for (int d = -1; d <= 1; ++d)
                    if (y + d >= 0 && y + d < n)
                        out[static_cast<std::size_t>(y) * n + x] += g[d + 1] * tmp[static_cast<std::size_t>(y + d) * n + x];
        grid = std::move(out);
    }
    return Kernel::normalized(n, n, std::move(grid));
}

inline Image add_noise(Image img, const NoiseSpec& noise)
{
    if (!(noise.sigma >= 0.0))
        throw ParameterError("noise sigma must be non-negative");
    if (noise.sigma == 0.0)
        return img;
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> dist(0.0, noise.sigma);
    for (double& v : img.data())
        v += dist(rng);
    return img;
}

/// convolve(x, k, boundary) plus unclipped i.i.d. Gaussian noise.
inline Image blur(const Image& x, const Kernel& k, const NoiseSpec& noise, Boundary boundary = Boundary::replicate_pad_crop)
{
    return add_noise(convolve(x, k, boundary), noise);
}

/// Piecewise-smooth procedural scene with hard edges: shaded background,
/// rectangles, discs, and a few stripe textures; values within [0,1].
inline Image synthetic_scene(int height, int width, int channels, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(height, width, channels);
    std::vector<double> base(channels), gy(channels), gx(channels);
    for (int c = 0; c < channels; ++c) {
        base[c] = 0.2 + 0.6 * u(rng);
        gy[c] = (u(rng) - 0.5) * 0.4;
        gx[c] = (u(rng) - 0.5) * 0.4;
    }
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                img(c, y, x) = base[c] + gy[c] * (y / double(height) - 0.5) + gx[c] * (x / double(width) - 0.5);

    const int shapes = 6 + static_cast<int>(u(rng) * 6);
    for (int s = 0; s < shapes; ++s) {
        const int kind = static_cast<int>(u(rng) * 3);
        const double cy = u(rng) * height, cx = u(rng) * width;
        const double ry = (0.08 + 0.25 * u(rng)) * height, rx = (0.08 + 0.25 * u(rng)) * width;
        std::vector<double> val(channels);
        const double level = u(rng);
        for (int c = 0; c < channels; ++c)
            val[c] = std::clamp(level + (u(rng) - 0.5) * 0.2, 0.0, 1.0);
        const double freq = 0.3 + 0.9 * u(rng), phase = u(rng) * 6.28, angle = u(rng) * 3.14;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double dy = (y - cy) / ry, dx = (x - cx) / rx;
                bool inside = false;
                if (kind == 0)
                    inside = std::abs(dy) < 1.0 && std::abs(dx) < 1.0;
                else
                    inside = dy * dy + dx * dx < 1.0;
                if (!inside)
                    continue;
                double tex = 0.0;
                if (kind == 2)
                    tex = 0.15 * std::sin(freq * (y * std::sin(angle) + x * std::cos(angle)) + phase);
                for (int c = 0; c < channels; ++c)
                    img(c, y, x) = val[c] + tex;
            }
    }
    for (double& v : img.data())
        v = std::clamp(v, 0.0, 1.0);
    return img;
}

struct DatasetConfig {
    int count = 20;
    int patch = 64;
    int kernel_min = 13;
    int kernel_max = 27;
    double noise_min = 0.0;
    double noise_max = 0.05;
    std::uint64_t seed = 0;
    Boundary boundary = Boundary::replicate_pad_crop;
};

struct FixtureMeta {
    int index = 0;
    std::uint64_t seed = 0;        // tuple stream seed
    double sigma = 0.0;
    int kernel_size = 1;
    std::uint64_t kernel_seed = 0; // kernel id
    std::uint64_t noise_seed = 0;
    std::string source;
    int crop_y = 0;
    int crop_x = 0;
};

struct Fixture {
    Image clean;
    Kernel kernel;
    Image blurry;
    FixtureMeta meta;
    std::string name;
};

struct SourceImage {
    std::string name;
    Image image;
};

inline TrajectoryKernelSpec trajectory_for(int size, std::uint64_t seed)
{
    TrajectoryKernelSpec spec;
    spec.size = size;
    spec.steps = size * 2;
    spec.anxiety = 0.3;
    spec.seed = seed;
    return spec;
}

inline std::string fixture_dirname(int index)
{
    std::ostringstream s;
    s.width(4);
    s.fill('0');
    s << index;
    return s.str();
}

/// Deterministic fixture tuples; tuple i only depends on (seed, i) and the sources.
inline std::vector<Fixture> make_dataset(const std::vector<SourceImage>& sources, const DatasetConfig& cfg)
{
    if (cfg.kernel_min < 3 || cfg.kernel_min > cfg.kernel_max || cfg.kernel_min % 2 == 0 || cfg.kernel_max % 2 == 0)
        throw ParameterError("kernel range must be odd sizes with min <= max");
    if (cfg.noise_min < 0.0 || cfg.noise_min > cfg.noise_max)
        throw ParameterError("noise range must satisfy 0 <= min <= max");
    if (cfg.count < 0 || cfg.patch < 1)
        throw ParameterError("count must be >= 0 and patch >= 1");
    std::vector<const SourceImage*> usable;
    for (const auto& s : sources) {
        if (s.image.height() < cfg.patch || s.image.width() < cfg.patch) {
            std::cerr << "warning: skipping " << s.name << " (smaller than " << cfg.patch << "px patch)\n";
            continue;
        }
        usable.push_back(&s);
    }
    if (usable.empty())
        throw InputError("no usable source images");
    if (cfg.kernel_max > cfg.patch)
        throw DimensionError("kernel range exceeds patch size");

    std::vector<Fixture> out;
    out.reserve(cfg.count);
    for (int i = 0; i < cfg.count; ++i) {
        FixtureMeta meta;
        meta.index = i;
        meta.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        std::mt19937_64 rng(meta.seed);
        const SourceImage& src = *usable[static_cast<std::size_t>(i) % usable.size()];
        meta.source = src.name;
        meta.crop_y = std::uniform_int_distribution<int>(0, src.image.height() - cfg.patch)(rng);
        meta.crop_x = std::uniform_int_distribution<int>(0, src.image.width() - cfg.patch)(rng);
        const int half_min = cfg.kernel_min / 2, half_max = cfg.kernel_max / 2;
        meta.kernel_size = 2 * std::uniform_int_distribution<int>(half_min, half_max)(rng) + 1;
        meta.kernel_seed = rng();
        meta.sigma = std::uniform_real_distribution<double>(cfg.noise_min, cfg.noise_max)(rng);
        if (cfg.noise_min == cfg.noise_max)
            meta.sigma = cfg.noise_min;
        meta.noise_seed = rng();

        Fixture f;
        f.clean = crop(src.image, meta.crop_y, meta.crop_x, cfg.patch, cfg.patch);
        f.kernel = gen_kernel(trajectory_for(meta.kernel_size, meta.kernel_seed));
        f.blurry = blur(f.clean, f.kernel, NoiseSpec{meta.sigma, meta.noise_seed}, cfg.boundary);
        f.meta = meta;
        f.name = fixture_dirname(i);
        out.push_back(std::move(f));
    }
    return out;
}

/// Loads every readable PNG/PGM/PPM in `dir` (sorted by name); unreadable files are skipped.
inline std::vector<SourceImage> load_sources(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw InputError("source directory does not exist: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file())
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<SourceImage> out;
    for (const auto& p : files) {
        const std::string ext = detail::lower_extension(p);
        if (ext != ".png" && ext != ".pgm" && ext != ".ppm" && ext != ".pnm")
            continue;
        try {
            out.push_back({p.filename().string(), read_image(p)});
        } catch (const Error& e) {
            std::cerr << "warning: skipping " << p.string() << ": " << e.what() << '\n';
        }
    }
    return out;
}

inline std::vector<Fixture> make_dataset(const fs::path& clean_dir, const DatasetConfig& cfg)
{
    return make_dataset(load_sources(clean_dir), cfg);
}

inline std::string format_meta(const FixtureMeta& m)
{
    std::ostringstream out;
    out.precision(17);
    out << "index=" << m.index << '\n'
        << "seed=" << m.seed << '\n'
        << "sigma=" << m.sigma << '\n'
        << "kernel_size=" << m.kernel_size << '\n'
        << "kernel_seed=" << m.kernel_seed << '\n'
        << "noise_seed=" << m.noise_seed << '\n'
        << "source=" << m.source << '\n'
        << "crop_y=" << m.crop_y << '\n'
        << "crop_x=" << m.crop_x << '\n';
    return out.str();
}

inline std::map<std::string, std::string> parse_key_values(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline FixtureMeta parse_meta(const std::string& text)
{
    const auto kv = parse_key_values(text);
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw FormatError(std::string("fixture meta lacks '") + key + "'");
        return it->second;
    };
    FixtureMeta m;
    try {
        m.sigma = std::stod(get("sigma"));
        m.seed = std::stoull(get("seed"));
        m.kernel_size = std::stoi(get("kernel_size"));
        if (kv.count("index"))
            m.index = std::stoi(kv.at("index"));
        if (kv.count("kernel_seed"))
            m.kernel_seed = std::stoull(kv.at("kernel_seed"));
        if (kv.count("noise_seed"))
            m.noise_seed = std::stoull(kv.at("noise_seed"));
        if (kv.count("source"))
            m.source = kv.at("source");
        if (kv.count("crop_y"))
            m.crop_y = std::stoi(kv.at("crop_y"));
        if (kv.count("crop_x"))
            m.crop_x = std::stoi(kv.at("crop_x"));
    } catch (const std::logic_error&) {
        throw FormatError("fixture meta has a non-numeric field");
    }
    return m;
}

/// Numbered subfolders with clean.png, blurry.png (16-bit), kernel.txt, meta.
inline void write_fixtures(const fs::path& dir, const std::vector<Fixture>& fixtures)
{
    for (const auto& f : fixtures) {
        const fs::path sub = dir / fixture_dirname(f.meta.index);
        fs::create_directories(sub);
        write_image(sub / "clean.png", f.clean, 16);
        write_image(sub / "blurry.png", f.blurry, 16);
        write_kernel(sub / "kernel.txt", f.kernel);
        write_text_file(sub / "meta", format_meta(f.meta));
    }
}

/// Reads a fixture directory; subfolders without blurry.png or kernel.txt are an error.
/// clean.png is optional only when `require_clean` is false.
inline std::vector<Fixture> read_fixtures(const fs::path& dir, bool require_clean = true)
{
    if (!fs::is_directory(dir))
        throw InputError("fixture directory does not exist: " + dir.string());
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory())
            subs.push_back(e.path());
    std::sort(subs.begin(), subs.end());
    std::vector<Fixture> out;
    for (const auto& sub : subs) {
        Fixture f;
        f.blurry = read_image(sub / "blurry.png");
        f.kernel = read_kernel(sub / "kernel.txt");
        if (fs::exists(sub / "meta"))
            f.meta = parse_meta(read_text_file(sub / "meta"));
        f.name = sub.filename().string();
        if (fs::exists(sub / "clean.png"))
            f.clean = read_image(sub / "clean.png");
        else if (require_clean)
            throw InputError("missing ground truth " + (sub / "clean.png").string());
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace dwdn
