#pragma once

// key=value configuration shared by the command-line tools. Every key has a
// default; unknown keys are rejected.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dwdn/blur_sim.hpp"
#include "dwdn/error.hpp"
#include "dwdn/refine.hpp"
#include "dwdn/train.hpp"

namespace dwdn {

inline Boundary parse_boundary(const std::string& s)
{
    if (s == "replicate_pad_crop" || s == "replicate")
        return Boundary::replicate_pad_crop;
    if (s == "circular")
        return Boundary::circular;
    throw ParameterError("unknown boundary mode '" + s + "'");
}

inline std::string to_string(Boundary b) { return b == Boundary::circular ? "circular" : "replicate_pad_crop"; }

class CliConfig {
public:
    struct Key {
        std::string name;
        std::string value;
        std::string help;
    };

    CliConfig()
    {
        keys_ = {
            {"seed", "0", "root seed for every random stream"},
            {"threads", "1", "worker threads for batch evaluation"},
            {"boundary", "replicate_pad_crop", "replicate_pad_crop | circular"},
            {"bank", "intensity+gradient", "intensity | gradient | intensity+gradient | learned"},
            {"levels", "2", "pyramid levels (1..5)"},
            {"use_wiener", "1", "0 skips the feature-space Wiener step"},
            {"snr_ratio", "", "fixed s_n/s_x for every feature; empty = estimate per feature"},
            {"stats.mean_filter", "3", "box size of the noise-residual mean filter (odd)"},
            {"stats.squared_sx", "0", "1 uses the variance instead of the std for s_x"},
            {"refiner.hidden", "16", "full-resolution and pass-through width"},
            {"refiner.width", "32", "width of the two stride-2 stages"},
            {"refiner.activation", "relu", "relu | leaky_relu | identity"},
            {"extractor.features", "16", "learned bank feature count M"},
            {"extractor.blocks", "3", "learned bank residual blocks"},
            {"extractor.activation", "relu", "relu | leaky_relu | identity"},
            {"train.lr", "1e-4", "initial learning rate"},
            {"train.lr_halve_every", "200", "epochs between learning-rate halvings"},
            {"train.batch", "4", "batch size"},
            {"train.iterations", "2000", "optimizer steps (0 = use train.epochs)"},
            {"train.epochs", "0", "epochs when train.iterations = 0"},
            {"train.gamma", "", "comma-separated per-scale loss weights, coarsest first; empty = all 1"},
            {"train.checkpoint_every", "0", "iterations between checkpoints (0 = end only)"},
            {"train.val_every", "1", "epochs between held-out evaluations (0 = never)"},
            {"synth.count", "20", "fixtures to generate"},
            {"synth.patch", "64", "patch side length"},
            {"synth.kernel_min", "13", "smallest kernel size (odd)"},
            {"synth.kernel_max", "27", "largest kernel size (odd)"},
            {"synth.noise_min", "0", "lowest noise sigma"},
            {"synth.noise_max", "0.05", "highest noise sigma"},
        };
    }

    const std::vector<Key>& keys() const { return keys_; }

    void set(const std::string& key, const std::string& value)
    {
        for (auto& k : keys_)
            if (k.name == key) {
                k.value = value;
                return;
            }
        throw ParameterError("unknown config key '" + key + "'");
    }

    const std::string& get(const std::string& key) const
    {
        for (const auto& k : keys_)
            if (k.name == key)
                return k.value;
        throw InternalError("config key '" + key + "' is not declared");
    }

    void load_text(const std::string& text)
    {
        std::map<std::string, std::string> kv;
        try {
            kv = parse_key_values(text);
        } catch (const FormatError& e) {
            throw ParameterError(std::string("config: ") + e.what());
        }
        for (const auto& [k, v] : kv)
            set(k, v);
    }

    std::string dump() const
    {
        std::string out;
        for (const auto& k : keys_)
            out += "# " + k.help + "\n" + k.name + "=" + k.value + "\n";
        return out;
    }

    long integer(const std::string& key) const
    {
        const std::string& v = get(key);
        try {
            std::size_t used = 0;
            const long x = std::stol(v, &used);
            if (used != v.size())
                throw std::invalid_argument(v);
            return x;
        } catch (const std::logic_error&) {
            throw ParameterError("config key '" + key + "' expects an integer, got '" + v + "'");
        }
    }

    double real(const std::string& key) const
    {
        const std::string& v = get(key);
        try {
            std::size_t used = 0;
            const double x = std::stod(v, &used);
            if (used != v.size())
                throw std::invalid_argument(v);
            return x;
        } catch (const std::logic_error&) {
            throw ParameterError("config key '" + key + "' expects a number, got '" + v + "'");
        }
    }

    bool flag(const std::string& key) const
    {
        const std::string& v = get(key);
        if (v == "1" || v == "true")
            return true;
        if (v == "0" || v == "false")
            return false;
        throw ParameterError("config key '" + key + "' expects 0 or 1, got '" + v + "'");
    }

    std::vector<double> reals(const std::string& key) const
    {
        std::vector<double> out;
        std::stringstream ss(get(key));
        for (std::string item; std::getline(ss, item, ',');) {
            try {
                out.push_back(std::stod(item));
            } catch (const std::logic_error&) {
                throw ParameterError("config key '" + key + "' has a non-numeric entry '" + item + "'");
            }
        }
        return out;
    }

    std::uint64_t seed() const
    {
        try {
            return std::stoull(get("seed"));
        } catch (const std::logic_error&) {
            throw ParameterError("seed must be an unsigned integer");
        }
    }

    ModelSpec model_spec() const
    {
        ModelSpec s;
        s.bank = parse_bank_kind(get("bank"));
        s.levels = static_cast<int>(integer("levels"));
        s.use_wiener = flag("use_wiener");
        s.hidden = static_cast<int>(integer("refiner.hidden"));
        s.width = static_cast<int>(integer("refiner.width"));
        s.activation = parse_activation(get("refiner.activation"));
        s.learned_features = static_cast<int>(integer("extractor.features"));
        s.extractor_blocks = static_cast<int>(integer("extractor.blocks"));
        s.extractor_activation = parse_activation(get("extractor.activation"));
        s.validate();
        return s;
    }

    PipelineOptions pipeline() const
    {
        PipelineOptions o;
        o.boundary = parse_boundary(get("boundary"));
        o.stats.mean_filter = static_cast<int>(integer("stats.mean_filter"));
        o.stats.squared_sx = flag("stats.squared_sx");
        if (!get("snr_ratio").empty())
            o.ratio = real("snr_ratio");
        return o;
    }

    TrainConfig train() const
    {
        TrainConfig t;
        t.lr = real("train.lr");
        t.lr_halve_every = static_cast<int>(integer("train.lr_halve_every"));
        t.batch = static_cast<int>(integer("train.batch"));
        t.iterations = integer("train.iterations");
        t.epochs = static_cast<int>(integer("train.epochs"));
        t.gamma = reals("train.gamma");
        t.checkpoint_every = static_cast<int>(integer("train.checkpoint_every"));
        t.val_every = static_cast<int>(integer("train.val_every"));
        t.seed = seed();
        t.threads = static_cast<int>(integer("threads"));
        t.pipeline = pipeline();
        t.validate();
        return t;
    }

    DatasetConfig dataset() const
    {
        DatasetConfig d;
        d.count = static_cast<int>(integer("synth.count"));
        d.patch = static_cast<int>(integer("synth.patch"));
        d.kernel_min = static_cast<int>(integer("synth.kernel_min"));
        d.kernel_max = static_cast<int>(integer("synth.kernel_max"));
        d.noise_min = real("synth.noise_min");
        d.noise_max = real("synth.noise_max");
        d.seed = seed();
        d.boundary = parse_boundary(get("boundary"));
        return d;
    }

private:
    std::vector<Key> keys_;
};

} // namespace dwdn
