#pragma once

// Trainable pieces: the learned feature extractor (one conv + residual blocks)
// and the encoder-decoder refiner that maps feature stacks to images.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dwdn/autodiff.hpp"

namespace dwdn {

/// Ordered collection of named tensors; order is the serialization order.
class ParameterStore {
public:
    Tensor& add(const std::string& name, Tensor t)
    {
        if (index_.count(name))
            throw ParameterError("duplicate parameter " + name);
        index_[name] = entries_.size();
        entries_.push_back({name, std::move(t)});
        return entries_.back().value;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Tensor& get(const std::string& name) const
    {
        auto it = index_.find(name);
        if (it == index_.end())
            throw FormatError("missing tensor " + name);
        return entries_[it->second].value;
    }
    Tensor& get(const std::string& name)
    {
        auto it = index_.find(name);
        if (it == index_.end())
            throw FormatError("missing tensor " + name);
        return entries_[it->second].value;
    }

    struct Entry {
        std::string name;
        Tensor value;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t element_count() const
    {
        std::size_t n = 0;
        for (const auto& e : entries_)
            n += e.value.size();
        return n;
    }

    /// Same names in the same order, zero-filled.
    ParameterStore zeros_like() const
    {
        ParameterStore z;
        for (const auto& e : entries_)
            z.add(e.name, Tensor(e.value.shape));
        return z;
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

namespace detail {

// Fan-in scaled uniform init, rounded to float so the 32-bit weights file is exact.
inline Tensor init_conv_weight(int cout, int cin, int k, double gain, std::mt19937_64& rng)
{
    Tensor t({cout, cin, k, k});
    const double bound = std::sqrt(gain / (cin * k * k));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.data)
        v = static_cast<float>(u(rng));
    return t;
}

} // namespace detail

struct ExtractorTopology {
    int in_channels = 1;
    int features = 16;
    int blocks = 3;
    Activation activation = Activation::relu;
    bool bias = true;
};

/// conv3x3(in -> M), then `blocks` pre-activation residual blocks of two 3x3 convs.
/// Circular padding keeps the extractor shift-equivariant on the periodic grid.
inline void init_extractor(ParameterStore& p, const ExtractorTopology& t, std::mt19937_64& rng)
{
    p.add("extractor.in.weight", detail::init_conv_weight(t.features, t.in_channels, 3, 3.0, rng));
    if (t.bias)
        p.add("extractor.in.bias", Tensor({t.features}));
    for (int b = 0; b < t.blocks; ++b)
        for (int j = 0; j < 2; ++j) {
            const std::string base = "extractor.block" + std::to_string(b) + ".conv" + std::to_string(j);
            // Second conv of each block starts small so blocks begin near identity.
            p.add(base + ".weight", detail::init_conv_weight(t.features, t.features, 3, j == 0 ? 6.0 : 0.5, rng));
            if (t.bias)
                p.add(base + ".bias", Tensor({t.features}));
        }
}

inline NodeId extractor_forward(Graph& g, const ParameterStore& p, const ExtractorTopology& t, NodeId image)
{
    auto param = [&](const std::string& name) { return g.parameter(name, p.get(name)); };
    auto bias = [&](const std::string& name) { return t.bias ? param(name) : -1; };
    NodeId x = ops::conv2d(g, image, param("extractor.in.weight"), bias("extractor.in.bias"), 1, Padding::circular);
    for (int b = 0; b < t.blocks; ++b) {
        const std::string base = "extractor.block" + std::to_string(b);
        NodeId h = ops::activation(g, x, t.activation);
        h = ops::conv2d(g, h, param(base + ".conv0.weight"), bias(base + ".conv0.bias"), 1, Padding::circular);
        h = ops::activation(g, h, t.activation);
        h = ops::conv2d(g, h, param(base + ".conv1.weight"), bias(base + ".conv1.bias"), 1, Padding::circular);
        x = ops::add(g, x, h);
    }
    return x;
}

struct RefinerTopology {
    int features = 3;       // M, planes per level stack
    int image_channels = 1;
    int levels = 2;
    int hidden = 16;        // width of the full-resolution stage and of the N_{-1} pass-through
    int width = 32;         // width of the two stride-2 stages
    Activation activation = Activation::relu;

    /// Spatial extents at every level must be divisible by this (two stride-2 stages).
    static constexpr int level_multiple = 4;
};

inline void init_refiner(ParameterStore& p, const RefinerTopology& t, std::mt19937_64& rng)
{
    const int m = t.features, hdn = t.hidden, wd = t.width;
    p.add("refiner.in_l1.weight", detail::init_conv_weight(hdn, m, 3, 6.0, rng));
    p.add("refiner.in_l1.bias", Tensor({hdn}));
    if (t.levels > 1) {
        p.add("refiner.in_lk.weight", detail::init_conv_weight(hdn, m + hdn, 3, 6.0, rng));
        p.add("refiner.in_lk.bias", Tensor({hdn}));
    }
    p.add("refiner.enc1.weight", detail::init_conv_weight(wd, hdn, 3, 6.0, rng));
    p.add("refiner.enc1.bias", Tensor({wd}));
    p.add("refiner.enc2.weight", detail::init_conv_weight(wd, wd, 3, 6.0, rng));
    p.add("refiner.enc2.bias", Tensor({wd}));
    p.add("refiner.dec1.weight", detail::init_conv_weight(wd, 2 * wd, 3, 6.0, rng));
    p.add("refiner.dec1.bias", Tensor({wd}));
    p.add("refiner.dec2.weight", detail::init_conv_weight(hdn, wd + hdn, 3, 6.0, rng));
    p.add("refiner.dec2.bias", Tensor({hdn}));
    p.add("refiner.head.weight", detail::init_conv_weight(t.image_channels, hdn + m, 1, 3.0, rng));
    p.add("refiner.head.bias", Tensor({t.image_channels}));
}

struct RefinerLevelOutput {
    NodeId image;
    NodeId hidden; // N_{-1}: decoder output before the 1x1 head
};

/// One application of N. `passthrough` is the upsampled hidden state of the
/// coarser level (absent at the coarsest level).
inline RefinerLevelOutput refiner_level(Graph& g, const ParameterStore& p, const RefinerTopology& t, NodeId stack,
                                        std::optional<NodeId> passthrough)
{
    const Tensor& sv = g.value(stack);
    if (sv.channels() != t.features)
        throw TopologyError("refiner expects " + std::to_string(t.features) + " feature planes, got "
                            + std::to_string(sv.channels()));
    if (sv.height() % RefinerTopology::level_multiple != 0 || sv.width() % RefinerTopology::level_multiple != 0)
        throw DimensionError("refiner level extent must be divisible by 4");
    auto param = [&](const std::string& name) { return g.parameter(name, p.get(name)); };
    auto conv = [&](NodeId x, const std::string& layer, int stride) {
        return ops::conv2d(g, x, param("refiner." + layer + ".weight"), param("refiner." + layer + ".bias"), stride);
    };
    const Activation act = t.activation;

    NodeId x = stack;
    std::string in_layer = "in_l1";
    if (passthrough) {
        if (g.value(*passthrough).channels() != t.hidden)
            throw TopologyError("pass-through width does not match the hidden width");
        x = ops::concat(g, {stack, *passthrough});
        in_layer = "in_lk";
    }
    const NodeId e0 = ops::activation(g, conv(x, in_layer, 1), act);
    const NodeId e1 = ops::activation(g, conv(e0, "enc1", 2), act);
    const NodeId e2 = ops::activation(g, conv(e1, "enc2", 2), act);
    const NodeId d1 = ops::activation(g, conv(ops::concat(g, {ops::resample(g, e2, Scale::up2), e1}), "dec1", 1), act);
    const NodeId d2 = ops::activation(g, conv(ops::concat(g, {ops::resample(g, d1, Scale::up2), e0}), "dec2", 1), act);
    const NodeId out = conv(ops::concat(g, {d2, stack}), "head", 1);
    return {out, d2};
}

} // namespace dwdn
