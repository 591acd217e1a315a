#pragma once

// Coarse-to-fine refinement and the end-to-end deblurring pipeline:
//   bank -> stats -> Wiener operator -> deconvolved features -> pyramid -> refiner.
// The same graph-building code serves inference and training.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dwdn/autodiff.hpp"
#include "dwdn/filter_bank.hpp"
#include "dwdn/nn.hpp"
#include "dwdn/resample.hpp"
#include "dwdn/weights.hpp"
#include "dwdn/wiener.hpp"

namespace dwdn {

enum class RefinerKind {
    network,
    identity, // pass the intensity planes through unchanged
};

struct ModelSpec {
    BankKind bank = BankKind::intensity_plus_gradient;
    int image_channels = 1;
    int levels = 2;
    bool use_wiener = true;
    RefinerKind refiner = RefinerKind::network;
    int learned_features = 16;
    int extractor_blocks = 3;
    Activation extractor_activation = Activation::relu;
    bool extractor_bias = true;
    int hidden = 16;
    int width = 32;
    Activation activation = Activation::relu;

    int feature_count() const
    {
        if (bank == BankKind::learned)
            return learned_features;
        return builtin_bank(bank).feature_count(image_channels);
    }

    ExtractorTopology extractor_topology() const
    {
        return ExtractorTopology{image_channels, learned_features, extractor_blocks, extractor_activation, extractor_bias};
    }

    RefinerTopology refiner_topology() const
    {
        RefinerTopology t;
        t.features = feature_count();
        t.image_channels = image_channels;
        t.levels = levels;
        t.hidden = hidden;
        t.width = width;
        t.activation = activation;
        return t;
    }

    /// Extent multiple required of the finest work region.
    int work_multiple() const
    {
        const int pyramid = 1 << (levels - 1);
        return refiner == RefinerKind::network ? pyramid * RefinerTopology::level_multiple : pyramid;
    }

    void validate() const
    {
        if (image_channels != 1 && image_channels != 3)
            throw ParameterError("image_channels must be 1 or 3");
        if (levels < 1 || levels > 5)
            throw ParameterError("levels must lie in [1, 5]");
        if (refiner == RefinerKind::identity && bank != BankKind::intensity && bank != BankKind::intensity_plus_gradient)
            throw ParameterError("the identity refiner needs a bank with intensity planes");
        if (learned_features < 1 || hidden < 1 || width < 1 || extractor_blocks < 0)
            throw ParameterError("network widths must be positive");
    }
};

/// Bank + refiner parameters, addressed by name.
class Model {
public:
    ModelSpec spec;
    ParameterStore params;

    static Model create(const ModelSpec& spec, std::uint64_t seed)
    {
        spec.validate();
        Model m;
        m.spec = spec;
        std::mt19937_64 rng(seed);
        if (spec.bank == BankKind::learned)
            init_extractor(m.params, spec.extractor_topology(), rng);
        if (spec.refiner == RefinerKind::network)
            init_refiner(m.params, spec.refiner_topology(), rng);
        return m;
    }

    /// Bank view over `store` (defaults to this model's parameters; not owning).
    FilterBank bank(const ParameterStore* store = nullptr) const
    {
        if (spec.bank != BankKind::learned)
            return builtin_bank(spec.bank);
        const ParameterStore* p = store ? store : &params;
        return FilterBank(std::shared_ptr<const ParameterStore>(std::shared_ptr<void>{}, p), spec.extractor_topology());
    }

    RefinerWeights to_weights() const
    {
        RefinerWeights w;
        auto& t = w.topology;
        t["bank"] = to_string(spec.bank);
        t["image_channels"] = std::to_string(spec.image_channels);
        t["levels"] = std::to_string(spec.levels);
        t["use_wiener"] = spec.use_wiener ? "1" : "0";
        t["refiner"] = spec.refiner == RefinerKind::network ? "network" : "identity";
        t["refiner.hidden"] = std::to_string(spec.hidden);
        t["refiner.width"] = std::to_string(spec.width);
        t["refiner.activation"] = to_string(spec.activation);
        t["refiner.features"] = std::to_string(spec.feature_count());
        if (spec.bank == BankKind::learned)
            write_extractor_topology(t, spec.extractor_topology());
        w.tensors = params;
        return w;
    }

    static Model from_weights(const RefinerWeights& w)
    {
        auto get = [&](const char* key) -> const std::string& {
            auto it = w.topology.find(key);
            if (it == w.topology.end())
                throw FormatError(std::string("weights topology lacks '") + key + "'");
            return it->second;
        };
        ModelSpec s;
        try {
            s.bank = parse_bank_kind(get("bank"));
            s.image_channels = std::stoi(get("image_channels"));
            s.levels = std::stoi(get("levels"));
            s.use_wiener = get("use_wiener") == "1";
            s.refiner = get("refiner") == "identity" ? RefinerKind::identity : RefinerKind::network;
            s.hidden = std::stoi(get("refiner.hidden"));
            s.width = std::stoi(get("refiner.width"));
            s.activation = parse_activation(get("refiner.activation"));
            if (s.bank == BankKind::learned) {
                const ExtractorTopology et = read_extractor_topology(w.topology);
                if (et.in_channels != s.image_channels)
                    throw FormatError("extractor input channels disagree with image_channels");
                s.learned_features = et.features;
                s.extractor_blocks = et.blocks;
                s.extractor_activation = et.activation;
                s.extractor_bias = et.bias;
            }
            s.validate();
        } catch (const std::logic_error&) {
            throw FormatError("weights topology has a malformed entry");
        } catch (const ParameterError& e) {
            throw FormatError(e.what());
        }
        if (std::stoi(get("refiner.features")) != s.feature_count())
            throw FormatError("declared refiner feature count disagrees with the bank");

        // Shapes come from a reference initialization of the declared topology.
        const Model ref = create(s, 0);
        Model m;
        m.spec = s;
        for (const auto& e : ref.params.entries()) {
            if (!w.tensors.contains(e.name))
                throw FormatError("weights lack tensor " + e.name);
            const Tensor& t = w.tensors.get(e.name);
            if (t.shape != e.value.shape)
                throw FormatError("tensor " + e.name + " has the wrong shape");
            m.params.add(e.name, t);
        }
        return m;
    }
};

/// Level 0 is the coarsest; level l has extent full / 2^(L-1-l).
struct Pyramid {
    std::vector<FeatureStack> levels;
};

inline Pyramid build_pyramid(const FeatureStack& stack, int levels)
{
    if (levels < 1)
        throw ParameterError("pyramid needs at least one level");
    const int div = 1 << (levels - 1);
    if (stack.height() % div != 0 || stack.width() % div != 0)
        throw DimensionError("stack extent " + std::to_string(stack.height()) + "x" + std::to_string(stack.width())
                             + " is not divisible by " + std::to_string(div));
    Pyramid p;
    p.levels.resize(levels);
    p.levels[levels - 1] = stack;
    for (int l = levels - 2; l >= 0; --l) {
        FeatureStack s{{}, stack.provenance + "|down" + std::to_string(levels - 1 - l)};
        for (const auto& plane : p.levels[l + 1].planes)
            s.planes.push_back(resample_bicubic(plane, Scale::down2));
        p.levels[l] = std::move(s);
    }
    return p;
}

/// Graph-level refinement over per-level stacks (coarsest first). Returns one
/// output per level; hidden is -1 for the identity refiner.
inline std::vector<RefinerLevelOutput> refine_graph(Graph& g, const ModelSpec& spec, const ParameterStore& params,
                                                    const std::vector<NodeId>& stacks)
{
    std::vector<RefinerLevelOutput> outs;
    if (spec.refiner == RefinerKind::identity) {
        for (NodeId s : stacks)
            outs.push_back({ops::slice_channels(g, s, 0, spec.image_channels), -1});
        return outs;
    }
    const RefinerTopology topo = spec.refiner_topology();
    std::optional<NodeId> pass;
    for (std::size_t l = 0; l < stacks.size(); ++l) {
        if (l > 0) {
            const NodeId up = ops::resample(g, outs.back().hidden, Scale::up2);
            const Tensor& uv = g.value(up);
            const Tensor& sv = g.value(stacks[l]);
            if (uv.height() != sv.height() || uv.width() != sv.width())
                throw InternalError("upsampled hidden features do not align with the next level");
            pass = up;
        }
        outs.push_back(refiner_level(g, params, topo, stacks[l], pass));
    }
    return outs;
}

struct RefineResult {
    std::vector<Image> images;  // coarsest first
    std::vector<Tensor> hidden; // empty for the identity refiner
};

inline RefineResult refine_forward(const Pyramid& pyr, const Model& model)
{
    if (static_cast<int>(pyr.levels.size()) != model.spec.levels)
        throw TopologyError("pyramid depth does not match the model's level count");
    Graph g;
    std::vector<NodeId> stacks;
    for (const auto& lvl : pyr.levels)
        stacks.push_back(g.constant(to_tensor(lvl.planes)));
    const auto outs = refine_graph(g, model.spec, model.params, stacks);
    RefineResult r;
    for (const auto& o : outs) {
        r.images.push_back(to_image(g.value(o.image)));
        if (o.hidden >= 0)
            r.hidden.push_back(g.value(o.hidden));
    }
    return r;
}

struct PipelineOptions {
    Boundary boundary = Boundary::replicate_pad_crop;
    StatsOptions stats;
    std::optional<double> ratio; // fixed s_n/s_x overriding the estimates
};

struct PipelineTrace {
    PaddingPlan plan;
    std::optional<WienerStats> stats;
    NodeId features = -1;       // bank output on the FFT grid
    NodeId deconvolved = -1;    // after the Wiener step (== features when disabled)
    std::vector<NodeId> stacks; // pyramid, coarsest first, on the work region
    std::vector<NodeId> outputs; // per-level image estimates, coarsest first
};

/// Builds the full forward pass into `g`. `params` supplies trainable values
/// (the model's own store for inference, the optimizer's store for training).
inline PipelineTrace pipeline_graph(Graph& g, const Model& model, const ParameterStore& params, const Image& y,
                                    const Kernel& k, const PipelineOptions& opt = {})
{
    const ModelSpec& spec = model.spec;
    if (y.channels() != spec.image_channels)
        throw TopologyError("model expects " + std::to_string(spec.image_channels) + "-channel images");
    PipelineTrace tr;
    tr.plan = plan_padding(y.height(), y.width(), k, opt.boundary, spec.work_multiple());
    const Image grid = prepare_observation(y, k, tr.plan);
    const NodeId x = g.constant(to_tensor(grid));
    const FilterBank bank = model.bank(&params);
    tr.features = apply_bank(g, bank, x, Boundary::circular, &params);
    tr.deconvolved = tr.features;
    if (spec.use_wiener) {
        const Tensor& fv = g.value(tr.features);
        tr.stats = opt.ratio ? WienerStats::fixed_ratio(static_cast<std::size_t>(fv.channels()), *opt.ratio)
                             : estimate_stats(fv, opt.stats);
        auto op = std::make_shared<const WienerOperator>(build_operator(k, *tr.stats, tr.plan.grid_h, tr.plan.grid_w));
        tr.deconvolved = ops::spectral_filter(g, tr.features, op);
    }
    NodeId work = tr.deconvolved;
    if (tr.plan.top != 0 || tr.plan.left != 0 || tr.plan.work_h != tr.plan.grid_h || tr.plan.work_w != tr.plan.grid_w)
        work = ops::crop(g, tr.deconvolved, tr.plan.top, tr.plan.left, tr.plan.work_h, tr.plan.work_w);

    tr.stacks.assign(spec.levels, -1);
    tr.stacks[spec.levels - 1] = work;
    for (int l = spec.levels - 2; l >= 0; --l)
        tr.stacks[l] = ops::resample(g, tr.stacks[l + 1], Scale::down2);
    for (const auto& o : refine_graph(g, spec, params, tr.stacks))
        tr.outputs.push_back(o.image);
    return tr;
}

/// Full chain; returns the finest estimate cropped to the input extent.
inline Image deblur_pipeline(const Image& y, const Kernel& k, const Model& model, const PipelineOptions& opt = {})
{
    Graph g;
    const PipelineTrace tr = pipeline_graph(g, model, model.params, y, k, opt);
    const Tensor& out = g.value(tr.outputs.back());
    Image img = to_image(out);
    if (img.height() != y.height() || img.width() != y.width())
        img = crop(img, 0, 0, y.height(), y.width());
    if (!all_finite(img.data()))
        throw NumericError("pipeline produced a non-finite sample");
    return img;
}

} // namespace dwdn
