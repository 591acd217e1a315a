#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dwdn/autodiff.hpp"
#include "dwdn/convolve.hpp"
#include "dwdn/image.hpp"
#include "dwdn/nn.hpp"
#include "dwdn/weights.hpp"

namespace dwdn {

enum class BankKind {
    intensity,
    gradient,
    intensity_plus_gradient,
    learned,
};

inline std::string to_string(BankKind k)
{
    switch (k) {
    case BankKind::intensity: return "intensity";
    case BankKind::gradient: return "gradient";
    case BankKind::intensity_plus_gradient: return "intensity+gradient";
    case BankKind::learned: return "learned";
    }
    return "?";
}

inline BankKind parse_bank_kind(const std::string& s)
{
    if (s == "intensity")
        return BankKind::intensity;
    if (s == "gradient")
        return BankKind::gradient;
    if (s == "intensity+gradient" || s == "intensity_plus_gradient")
        return BankKind::intensity_plus_gradient;
    if (s == "learned")
        return BankKind::learned;
    throw ParameterError("unknown filter bank kind '" + s + "'");
}

inline std::string to_string(Activation a)
{
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::identity: return "identity";
    }
    return "?";
}

inline Activation parse_activation(const std::string& s)
{
    if (s == "relu")
        return Activation::relu;
    if (s == "leaky_relu")
        return Activation::leaky_relu;
    if (s == "identity")
        return Activation::identity;
    throw ParameterError("unknown activation '" + s + "'");
}

/// M feature planes on one grid, tagged with where they came from.
struct FeatureStack {
    std::vector<Plane> planes;
    std::string provenance;

    std::size_t size() const { return planes.size(); }
    int height() const { return planes.empty() ? 0 : planes[0].height(); }
    int width() const { return planes.empty() ? 0 : planes[0].width(); }
};

inline Tensor to_tensor(const std::vector<Plane>& planes)
{
    if (planes.empty())
        throw DimensionError("no planes to pack");
    const int h = planes[0].height(), w = planes[0].width();
    Tensor t({static_cast<int>(planes.size()), h, w});
    for (std::size_t c = 0; c < planes.size(); ++c) {
        if (planes[c].height() != h || planes[c].width() != w)
            throw DimensionError("planes differ in extent");
        std::copy(planes[c].data().begin(), planes[c].data().end(), t.plane(static_cast<int>(c)));
    }
    return t;
}

inline Tensor to_tensor(const Image& img) { return to_tensor(img.planes()); }

inline std::vector<Plane> to_planes(const Tensor& t)
{
    std::vector<Plane> out;
    for (int c = 0; c < t.channels(); ++c)
        out.emplace_back(t.height(), t.width(), std::vector<double>(t.plane(c), t.plane(c) + t.plane_size()));
    return out;
}

inline Image to_image(const Tensor& t) { return Image::from_planes(to_planes(t)); }

class FilterBank {
public:
    /// Fixed banks apply each filter group to every channel; plane order is
    /// group-major, then channel, then filter within the group.
    FilterBank(BankKind kind, std::vector<std::vector<Taps>> groups) : kind_(kind), groups_(std::move(groups))
    {
        if (kind == BankKind::learned)
            throw ParameterError("learned banks are built from weights");
        for (const auto& grp : groups_)
            for (const auto& t : grp)
                if (t.height % 2 == 0 || t.width % 2 == 0)
                    throw ParameterError("fixed filters need odd extents");
    }

    FilterBank(std::shared_ptr<const ParameterStore> params, ExtractorTopology topo)
        : kind_(BankKind::learned), params_(std::move(params)), topo_(topo)
    {
        if (topo_.features < 1)
            throw ParameterError("a bank needs at least one feature");
    }

    BankKind kind() const { return kind_; }

    int feature_count(int image_channels) const
    {
        if (kind_ == BankKind::learned)
            return topo_.features;
        int n = 0;
        for (const auto& grp : groups_)
            n += static_cast<int>(grp.size()) * image_channels;
        return n;
    }

    /// Index range of the raw-intensity planes, or -1 when the bank has none.
    int intensity_offset() const
    {
        return kind_ == BankKind::intensity || kind_ == BankKind::intensity_plus_gradient ? 0 : -1;
    }

    const std::vector<std::vector<Taps>>& groups() const { return groups_; }
    const ExtractorTopology& extractor_topology() const { return topo_; }
    const ParameterStore& parameters() const { return *params_; }
    std::string name() const { return to_string(kind_); }

private:
    BankKind kind_;
    std::vector<std::vector<Taps>> groups_;
    std::shared_ptr<const ParameterStore> params_;
    ExtractorTopology topo_;
};

namespace bank_taps {

inline Taps identity() { return Taps{}; }
// Forward differences: out(x) = in(x+1) - in(x).
inline Taps dx() { return Taps{1, 3, {1.0, -1.0, 0.0}}; }
inline Taps dy() { return Taps{3, 1, {1.0, -1.0, 0.0}}; }

} // namespace bank_taps

inline FilterBank builtin_bank(BankKind kind)
{
    switch (kind) {
    case BankKind::intensity: return FilterBank(kind, {{bank_taps::identity()}});
    case BankKind::gradient: return FilterBank(kind, {{bank_taps::dx(), bank_taps::dy()}});
    case BankKind::intensity_plus_gradient:
        return FilterBank(kind, {{bank_taps::identity()}, {bank_taps::dx(), bank_taps::dy()}});
    case BankKind::learned: break;
    }
    throw ParameterError("the learned bank has no built-in taps; load it from weights");
}

inline void write_extractor_topology(std::map<std::string, std::string>& kv, const ExtractorTopology& t)
{
    kv["extractor.in_channels"] = std::to_string(t.in_channels);
    kv["extractor.features"] = std::to_string(t.features);
    kv["extractor.blocks"] = std::to_string(t.blocks);
    kv["extractor.activation"] = to_string(t.activation);
    kv["extractor.bias"] = t.bias ? "1" : "0";
}

inline ExtractorTopology read_extractor_topology(const std::map<std::string, std::string>& kv)
{
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw FormatError(std::string("weights topology lacks '") + key + "'");
        return it->second;
    };
    ExtractorTopology t;
    try {
        t.in_channels = std::stoi(get("extractor.in_channels"));
        t.features = std::stoi(get("extractor.features"));
        t.blocks = std::stoi(get("extractor.blocks"));
        t.activation = parse_activation(get("extractor.activation"));
        t.bias = get("extractor.bias") == "1";
    } catch (const std::logic_error&) {
        throw FormatError("weights topology has a malformed extractor entry");
    } catch (const ParameterError& e) {
        throw FormatError(e.what());
    }
    if (t.in_channels < 1 || t.features < 1 || t.blocks < 0)
        throw FormatError("weights topology declares an invalid extractor");
    return t;
}

/// Builds the learned extractor bank; every declared tensor must be present with the right shape.
inline FilterBank load_learned_bank(const RefinerWeights& w)
{
    const ExtractorTopology topo = read_extractor_topology(w.topology);
    ParameterStore expected;
    std::mt19937_64 rng(0);
    init_extractor(expected, topo, rng);
    auto params = std::make_shared<ParameterStore>();
    for (const auto& e : expected.entries()) {
        if (!w.tensors.contains(e.name))
            throw FormatError("weights lack extractor tensor " + e.name);
        const Tensor& t = w.tensors.get(e.name);
        if (t.shape != e.value.shape)
            throw FormatError("tensor " + e.name + " has the wrong shape");
        params->add(e.name, t);
    }
    return FilterBank(std::move(params), topo);
}

/// Graph form: fixed banks produce a constant node, learned banks a differentiable one
/// whose parameters bind by name (pass `live` to take values from a training store).
inline NodeId apply_bank(Graph& g, const FilterBank& bank, NodeId image, Boundary boundary,
                         const ParameterStore* live = nullptr)
{
    const Tensor& img = g.value(image);
    if (bank.kind() == BankKind::learned) {
        if (img.channels() != bank.extractor_topology().in_channels)
            throw TopologyError("learned bank expects " + std::to_string(bank.extractor_topology().in_channels)
                                + " image channels");
        return extractor_forward(g, live ? *live : bank.parameters(), bank.extractor_topology(), image);
    }
    std::vector<Plane> planes;
    for (const auto& grp : bank.groups())
        for (int c = 0; c < img.channels(); ++c) {
            Plane p(img.height(), img.width(), std::vector<double>(img.plane(c), img.plane(c) + img.plane_size()));
            for (const auto& t : grp)
                planes.push_back(convolve(p, t, boundary));
        }
    return g.constant(to_tensor(planes));
}

inline FeatureStack apply_bank(const FilterBank& bank, const Image& img, Boundary boundary = Boundary::circular)
{
    Graph g;
    const NodeId x = g.constant(to_tensor(img));
    const NodeId f = apply_bank(g, bank, x, boundary);
    return FeatureStack{to_planes(g.value(f)), bank.name()};
}

} // namespace dwdn
