#pragma once

// End-to-end training: multi-scale L1 loss, Adam, a deterministic loop with
// checkpoints (weights + optimizer state in one weights file) and a CSV log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "dwdn/blur_sim.hpp"
#include "dwdn/metrics.hpp"
#include "dwdn/refine.hpp"

namespace dwdn {

/// Ground-truth pyramid by repeated bicubic down2, coarsest first.
inline std::vector<Image> gt_pyramid(const Image& gt, int levels)
{
    if (levels < 1)
        throw ParameterError("pyramid needs at least one level");
    std::vector<Image> p(levels);
    p[levels - 1] = gt;
    for (int l = levels - 2; l >= 0; --l)
        p[l] = resample_bicubic(p[l + 1], Scale::down2);
    return p;
}

inline std::vector<double> resolve_gamma(const std::vector<double>& gamma, int levels)
{
    if (gamma.empty())
        return std::vector<double>(levels, 1.0);
    if (static_cast<int>(gamma.size()) != levels)
        throw ParameterError("need one loss weight per scale");
    for (double g : gamma)
        if (!(g >= 0.0) || !std::isfinite(g))
            throw ParameterError("loss weights must be finite and >= 0");
    return gamma;
}

/// sum_l gamma_l * mean|pred_l - gt_l|, preds coarsest first.
inline double loss_multiscale(const std::vector<Image>& preds, const Image& gt, const std::vector<double>& gamma = {})
{
    if (preds.empty())
        throw ParameterError("no predictions");
    const int levels = static_cast<int>(preds.size());
    const std::vector<double> w = resolve_gamma(gamma, levels);
    if (!preds.back().same_extent(gt))
        throw DimensionError("finest prediction does not match the ground truth extent");
    const std::vector<Image> ref = gt_pyramid(gt, levels);
    double total = 0.0;
    for (int l = 0; l < levels; ++l) {
        if (!preds[l].same_extent(ref[l]))
            throw DimensionError("prediction at scale " + std::to_string(l) + " has the wrong extent");
        const auto a = preds[l].data(), b = ref[l].data();
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            acc += std::abs(a[i] - b[i]);
        total += w[l] * acc / static_cast<double>(a.size());
    }
    return total;
}

/// Graph form over pipeline outputs (work-region extents); each level is
/// cropped to the matching ground-truth extent first.
inline NodeId loss_graph(Graph& g, const std::vector<NodeId>& outputs, const Image& gt, const std::vector<double>& gamma)
{
    const int levels = static_cast<int>(outputs.size());
    const std::vector<double> w = resolve_gamma(gamma, levels);
    const std::vector<Image> ref = gt_pyramid(gt, levels);
    NodeId total = -1;
    for (int l = 0; l < levels; ++l) {
        NodeId out = outputs[l];
        const Tensor& ov = g.value(out);
        if (ov.height() < ref[l].height() || ov.width() < ref[l].width() || ov.channels() != ref[l].channels())
            throw DimensionError("prediction at scale " + std::to_string(l) + " is smaller than the ground truth");
        if (ov.height() != ref[l].height() || ov.width() != ref[l].width())
            out = ops::crop(g, out, 0, 0, ref[l].height(), ref[l].width());
        NodeId term = ops::l1_mean(g, out, to_tensor(ref[l]));
        if (w[l] != 1.0)
            term = ops::scale(g, term, w[l]);
        total = total < 0 ? term : ops::add(g, total, term);
    }
    return total;
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool round_to_float = true; // keep weights and moments exactly representable in the f32 file
};

struct AdamState {
    ParameterStore m, v;
    long step = 0;

    static AdamState for_params(const ParameterStore& p) { return AdamState{p.zeros_like(), p.zeros_like(), 0}; }
};

inline void adam_step(ParameterStore& weights, const ParameterStore& grads, AdamState& st, double lr,
                      const AdamConfig& cfg = {})
{
    if (!(lr > 0.0))
        throw ParameterError("learning rate must be positive");
    if (grads.size() != weights.size() || st.m.size() != weights.size() || st.v.size() != weights.size())
        throw ParameterError("optimizer state does not match the weights");
    for (const auto& e : grads.entries())
        for (double g : e.value.data)
            if (!std::isfinite(g))
                throw NumericError("non-finite gradient in " + e.name);
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    auto fix = [&](double x) { return cfg.round_to_float ? static_cast<double>(static_cast<float>(x)) : x; };
    for (std::size_t i = 0; i < weights.size(); ++i) {
        Tensor& w = weights.entries()[i].value;
        const Tensor& g = grads.entries()[i].value;
        Tensor& m = st.m.entries()[i].value;
        Tensor& v = st.v.entries()[i].value;
        if (g.shape != w.shape || m.shape != w.shape || v.shape != w.shape)
            throw ParameterError("optimizer state shape mismatch for " + weights.entries()[i].name);
        for (std::size_t j = 0; j < w.data.size(); ++j) {
            m.data[j] = fix(cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * g.data[j]);
            v.data[j] = fix(cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * g.data[j] * g.data[j]);
            const double mh = m.data[j] / c1, vh = v.data[j] / c2;
            w.data[j] = fix(w.data[j] - lr * mh / (std::sqrt(vh) + cfg.eps));
        }
    }
}

/// One supervised tuple.
struct TrainingSample {
    Image blurry;
    Kernel kernel;
    Image clean;
};

inline std::vector<TrainingSample> samples_from(const std::vector<Fixture>& fixtures)
{
    std::vector<TrainingSample> s;
    for (const auto& f : fixtures)
        s.push_back({f.blurry, f.kernel, f.clean});
    return s;
}

/// Loss of one sample; when `grads` is given, adds weight * dL/dparam into it.
inline double sample_loss(const Model& model, const ParameterStore& params, const TrainingSample& s,
                          const std::vector<double>& gamma, const PipelineOptions& opt, ParameterStore* grads = nullptr,
                          double weight = 1.0)
{
    Graph g;
    const PipelineTrace tr = pipeline_graph(g, model, params, s.blurry, s.kernel, opt);
    const NodeId loss = loss_graph(g, tr.outputs, s.clean, gamma);
    const double value = g.value(loss).data[0];
    if (grads && std::isfinite(value)) {
        g.backward(loss);
        for (auto& e : grads->entries()) {
            const NodeId id = g.parameter_node(e.name);
            if (id < 0 || !g.has_grad(id))
                continue;
            const Tensor& gr = g.grad(id);
            for (std::size_t j = 0; j < gr.data.size(); ++j)
                e.value.data[j] += weight * gr.data[j];
        }
    }
    return value;
}

/// Mean loss and gradient over a batch. Per-sample gradients are reduced in
/// sample order, so the result does not depend on the thread count.
inline double batch_loss(const Model& model, const ParameterStore& params, const std::vector<const TrainingSample*>& batch,
                         const std::vector<double>& gamma, const PipelineOptions& opt, ParameterStore* grads,
                         int threads = 1)
{
    const std::size_t n = batch.size();
    if (n == 0)
        throw ParameterError("empty batch");
    std::vector<double> losses(n, 0.0);
    std::vector<ParameterStore> parts;
    if (grads)
        parts.assign(n, params.zeros_like());
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            losses[i] = sample_loss(model, params, *batch[i], gamma, opt, grads ? &parts[i] : nullptr, 1.0);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            run(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += workers)
                    run(i);
            });
        for (auto& th : pool)
            th.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += losses[i];
        if (grads)
            for (std::size_t k = 0; k < grads->size(); ++k) {
                auto& dst = grads->entries()[k].value.data;
                const auto& src = parts[i].entries()[k].value.data;
                for (std::size_t j = 0; j < dst.size(); ++j)
                    dst[j] += src[j] / static_cast<double>(n);
            }
    }
    return total / static_cast<double>(n);
}

inline double dataset_loss(const Model& model, const std::vector<TrainingSample>& data, const std::vector<double>& gamma,
                           const PipelineOptions& opt = {}, int threads = 1)
{
    std::vector<const TrainingSample*> all;
    for (const auto& s : data)
        all.push_back(&s);
    return batch_loss(model, model.params, all, gamma, opt, nullptr, threads);
}

inline double mean_psnr(const Model& model, const std::vector<TrainingSample>& data, const PipelineOptions& opt = {})
{
    if (data.empty())
        throw InputError("no samples to evaluate");
    double acc = 0.0;
    for (const auto& s : data)
        acc += psnr(deblur_pipeline(s.blurry, s.kernel, model, opt), s.clean);
    return acc / static_cast<double>(data.size());
}

struct TrainConfig {
    double lr = 1e-4;
    int lr_halve_every = 200; // epochs
    int batch = 4;
    long iterations = 2000;   // total optimizer steps; when 0, `epochs` decides
    int epochs = 0;
    std::vector<double> gamma; // per scale, coarsest first; empty means all 1
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // iterations, 0 = only at the end
    int val_every = 1;         // epochs between held-out evaluations, 0 = never
    int threads = 1;
    AdamConfig adam;
    PipelineOptions pipeline;
    std::filesystem::path checkpoint_path; // empty = no checkpoints
    std::filesystem::path log_path;        // empty = no CSV log

    void validate() const
    {
        if (!(lr > 0.0) || !std::isfinite(lr))
            throw ParameterError("lr must be positive");
        if (batch < 1)
            throw ParameterError("batch must be >= 1");
        if (lr_halve_every < 1)
            throw ParameterError("lr_halve_every must be >= 1");
        if (iterations < 0 || epochs < 0 || (iterations == 0 && epochs == 0))
            throw ParameterError("set a positive iteration or epoch count");
        if (checkpoint_every < 0 || val_every < 0 || threads < 1)
            throw ParameterError("checkpoint_every, val_every and threads must be non-negative");
    }

    long iterations_per_epoch(std::size_t dataset) const
    {
        return static_cast<long>((dataset + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
    }

    long total_iterations(std::size_t dataset) const
    {
        return iterations > 0 ? iterations : epochs * iterations_per_epoch(dataset);
    }

    /// Learning rate for 0-based iteration `it`: halved every `lr_halve_every` epochs.
    double lr_at(long it, std::size_t dataset) const
    {
        const long epoch = it / iterations_per_epoch(dataset);
        return std::ldexp(lr, -static_cast<int>(epoch / lr_halve_every));
    }
};

struct LogRow {
    long iteration = 0; // optimizer steps completed
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> val_psnr;
};

inline std::string format_log_row(const LogRow& r)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,", r.iteration, r.lr, r.train_loss);
    std::string s = buf;
    if (r.val_psnr) {
        std::snprintf(buf, sizeof buf, "%.6f", *r.val_psnr);
        s += buf;
    }
    return s;
}

inline constexpr const char* train_log_header = "iteration,lr,train_loss,val_psnr";

struct TrainCheckpoint {
    Model model;
    AdamState adam;
    long iteration = 0;
};

inline RefinerWeights checkpoint_weights(const TrainCheckpoint& c)
{
    RefinerWeights w = c.model.to_weights();
    w.topology["train.iteration"] = std::to_string(c.iteration);
    w.topology["train.adam_step"] = std::to_string(c.adam.step);
    for (const auto& e : c.adam.m.entries())
        w.tensors.add("adam.m." + e.name, e.value);
    for (const auto& e : c.adam.v.entries())
        w.tensors.add("adam.v." + e.name, e.value);
    return w;
}

inline TrainCheckpoint checkpoint_from(const RefinerWeights& w)
{
    TrainCheckpoint c;
    c.model = Model::from_weights(w);
    c.adam = AdamState::for_params(c.model.params);
    auto it = w.topology.find("train.iteration");
    if (it == w.topology.end())
        return c; // plain weights: start fresh optimizer state
    try {
        c.iteration = std::stol(it->second);
        c.adam.step = std::stol(w.topology.at("train.adam_step"));
    } catch (const std::exception&) {
        throw FormatError("checkpoint has malformed training state");
    }
    for (std::size_t i = 0; i < c.model.params.size(); ++i) {
        const std::string& name = c.model.params.entries()[i].name;
        c.adam.m.entries()[i].value = w.tensors.get("adam.m." + name);
        c.adam.v.entries()[i].value = w.tensors.get("adam.v." + name);
        if (c.adam.m.entries()[i].value.shape != c.model.params.entries()[i].value.shape
            || c.adam.v.entries()[i].value.shape != c.model.params.entries()[i].value.shape)
            throw FormatError("optimizer state shape mismatch for " + name);
    }
    return c;
}

struct TrainResult {
    Model model;
    AdamState adam;
    long iteration = 0;
    std::vector<LogRow> log;
};

/// Runs (or continues, when `resume` is given) training. Each epoch visits the
/// training set in a permutation derived from (seed, epoch), so resuming
/// reproduces the uninterrupted batch order and learning-rate schedule.
inline TrainResult train_loop(const Model& init, const std::vector<TrainingSample>& train,
                              const std::vector<TrainingSample>& val, const TrainConfig& cfg,
                              const std::optional<TrainCheckpoint>& resume = std::nullopt,
                              const std::function<void(const LogRow&)>& on_log = {})
{
    cfg.validate();
    if (train.empty())
        throw InputError("training set is empty");
    const int levels = init.spec.levels;
    const std::vector<double> gamma = resolve_gamma(cfg.gamma, levels);

    TrainResult r;
    if (resume) {
        r.model = resume->model;
        r.adam = resume->adam;
        r.iteration = resume->iteration;
    } else {
        r.model = init;
        r.adam = AdamState::for_params(init.params);
    }
    if (r.model.params.size() == 0)
        throw ParameterError("model has no trainable parameters");

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        const bool fresh = !std::filesystem::exists(cfg.log_path) || std::filesystem::file_size(cfg.log_path) == 0;
        log.open(cfg.log_path, std::ios::app);
        if (!log)
            throw IoError("cannot open log " + cfg.log_path.string());
        if (fresh)
            log << train_log_header << "\n" << std::flush;
    }
    auto save = [&] {
        if (!cfg.checkpoint_path.empty())
            save_weights(cfg.checkpoint_path, checkpoint_weights({r.model, r.adam, r.iteration}));
    };

    const long per_epoch = cfg.iterations_per_epoch(train.size());
    const long total = cfg.total_iterations(train.size());
    std::vector<std::size_t> order;
    long order_epoch = -1;
    double epoch_loss = 0.0;
    long epoch_steps = 0;

    while (r.iteration < total) {
        const long it = r.iteration;
        const long epoch = it / per_epoch;
        if (epoch != order_epoch) {
            order.resize(train.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
            std::shuffle(order.begin(), order.end(), rng);
            order_epoch = epoch;
        }
        const std::size_t first = static_cast<std::size_t>((it % per_epoch) * cfg.batch);
        std::vector<const TrainingSample*> batch;
        for (std::size_t i = first; i < std::min(order.size(), first + cfg.batch); ++i)
            batch.push_back(&train[order[i]]);

        ParameterStore grads = r.model.params.zeros_like();
        const double loss = batch_loss(r.model, r.model.params, batch, gamma, cfg.pipeline, &grads, cfg.threads);
        if (!std::isfinite(loss))
            throw NumericError("loss became non-finite at iteration " + std::to_string(it)
                               + (cfg.checkpoint_path.empty() ? "" : "; last good checkpoint kept at "
                                                                        + cfg.checkpoint_path.string()));
        const double lr = cfg.lr_at(it, train.size());
        try {
            adam_step(r.model.params, grads, r.adam, lr, cfg.adam);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(it));
        }
        ++r.iteration;
        epoch_loss += loss;
        ++epoch_steps;

        const bool epoch_end = r.iteration % per_epoch == 0 || r.iteration == total;
        if (epoch_end) {
            LogRow row{r.iteration, lr, epoch_loss / static_cast<double>(epoch_steps), std::nullopt};
            const long done_epochs = (r.iteration + per_epoch - 1) / per_epoch;
            if (!val.empty() && cfg.val_every > 0 && (done_epochs % cfg.val_every == 0 || r.iteration == total))
                row.val_psnr = mean_psnr(r.model, val, cfg.pipeline);
            r.log.push_back(row);
            if (log)
                log << format_log_row(row) << "\n" << std::flush;
            if (on_log)
                on_log(row);
            epoch_loss = 0.0;
            epoch_steps = 0;
        }
        if (cfg.checkpoint_every > 0 && r.iteration % cfg.checkpoint_every == 0)
            save();
    }
    save();
    return r;
}

} // namespace dwdn
