#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hdqt/cil.hpp"
#include "hdqt/errors.hpp"
#include "hdqt/log.hpp"

namespace hdqt {

namespace {

struct Context {
    const FeatureDataset& ds;
    const TrainHyper& hp;
    const Precision& precision;
    std::vector<int> label_map;

    Matrix rows(std::span<const std::size_t> idx) const { return gather_rows(ds.features, idx); }

    std::vector<int> labels(std::span<const std::size_t> idx) const {
        std::vector<int> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) out.push_back(label_map[static_cast<std::size_t>(ds.labels[i])]);
        return out;
    }
};

Matrix slice_cols(const Matrix& m, std::size_t first, std::size_t end) {
    Matrix out(m.rows(), end - first);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = first; j < end; ++j) out(i, j - first) = m(i, j);
    }
    return out;
}

// Logits in evaluation batches; quantization calibrates per batch, so the
// chunking matches training.
Matrix predict_logits(const FcnModel& model, const Context& ctx, std::span<const std::size_t> idx,
                      const std::vector<BiasLayer>& bias) {
    Matrix out(idx.size(), model.num_classes());
    for (std::size_t b = 0; b < idx.size(); b += ctx.hp.batch) {
        const auto chunk = idx.subspan(b, std::min(ctx.hp.batch, idx.size() - b));
        Matrix logits = forward(model, ctx.rows(chunk), ctx.precision).logits;
        for (const auto& layer : bias) layer.apply(logits);
        for (std::size_t r = 0; r < chunk.size(); ++r) {
            std::ranges::copy(logits.row(r), out.row(b + r).begin());
        }
    }
    return out;
}

Matrix normalized_features(const FcnModel& model, const Context& ctx,
                           std::span<const std::size_t> idx) {
    Matrix out(idx.size(), model.input_dim());
    for (std::size_t b = 0; b < idx.size(); b += ctx.hp.batch) {
        const auto chunk = idx.subspan(b, std::min(ctx.hp.batch, idx.size() - b));
        const Matrix f = features(model, ctx.rows(chunk), ctx.precision);
        for (std::size_t r = 0; r < chunk.size(); ++r) {
            std::ranges::copy(f.row(r), out.row(b + r).begin());
        }
    }
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        double norm = 0.0;
        for (double v : row) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& v : row) v /= norm;
        }
    }
    return out;
}

struct StageInputs {
    const FcnModel* teacher = nullptr;
    const std::vector<BiasLayer>* teacher_bias = nullptr;
    std::size_t known = 0;      // classes before the current task
    bool new_slice_ce = false;  // CE over the current task's logits only
};

void train_stage(FcnModel& model, const StageInputs& in, std::vector<std::size_t> samples,
                 const Context& ctx, Rng& rng, GemmStats& stats) {
    const TrainHyper& hp = ctx.hp;
    SgdState sgd{hp.lr, hp.momentum, hp.weight_decay, hp.schedule, {}};
    const bool distill = in.teacher != nullptr && hp.kd_lambda != 0.0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        Rng epoch_rng = rng.split(static_cast<std::uint64_t>(epoch));
        Rng shuffle_rng = epoch_rng.split("shuffle");
        shuffle_rng.shuffle(samples);
        std::uint64_t step = 0;
        for (std::size_t b = 0; b < samples.size(); b += hp.batch, ++step) {
            const auto idx = std::span<const std::size_t>(samples).subspan(
                b, std::min(hp.batch, samples.size() - b));
            const Matrix x = ctx.rows(idx);
            std::vector<int> y = ctx.labels(idx);
            ForwardResult fwd = forward(model, x, ctx.precision, &stats);

            Matrix dlogits;
            if (in.new_slice_ce && in.known > 0) {
                for (int& v : y) v -= static_cast<int>(in.known);
                const LossResult ce =
                    ce_loss(slice_cols(fwd.logits, in.known, fwd.logits.cols()), y);
                dlogits = Matrix(fwd.logits.rows(), fwd.logits.cols());
                for (std::size_t i = 0; i < dlogits.rows(); ++i) {
                    for (std::size_t j = in.known; j < dlogits.cols(); ++j) {
                        dlogits(i, j) = ce.grad(i, j - in.known);
                    }
                }
            } else {
                dlogits = ce_loss(fwd.logits, y).grad;
            }
            if (distill) {
                Matrix old_logits = forward(*in.teacher, x, ctx.precision).logits;
                if (in.teacher_bias) {
                    for (const auto& layer : *in.teacher_bias) layer.apply(old_logits);
                }
                const LossResult kd = kd_loss(old_logits, fwd.logits, hp.temperature);
                auto dv = dlogits.values();
                auto kv = kd.grad.values();
                for (std::size_t i = 0; i < dv.size(); ++i) dv[i] += hp.kd_lambda * kv[i];
            }
            Rng step_rng = epoch_rng.split(step);
            const Gradients grads =
                backward(model, fwd.cache, dlogits, ctx.precision, step_rng, &stats);
            sgd_step(model, grads, sgd, epoch);
        }
    }
}

// Stage two of bias correction: fits (alpha, beta) on held-out logits.
BiasLayer fit_bias_layer(const Matrix& logits, const std::vector<int>& labels, std::size_t known,
                         const TrainHyper& hp, Rng& rng) {
    BiasLayer layer{1.0, 0.0, known, logits.cols()};
    SgdState sgd{hp.bic_lr, hp.momentum, 0.0, {}, {}};
    std::vector<double> velocity(2, 0.0);
    std::vector<std::size_t> order(logits.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < hp.bic_epochs; ++epoch) {
        Rng shuffle_rng = rng.split(static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += hp.batch) {
            const auto idx = std::span<const std::size_t>(order).subspan(
                b, std::min(hp.batch, order.size() - b));
            const Matrix raw = gather_rows(logits, idx);
            Matrix corrected = raw;
            layer.apply(corrected);
            std::vector<int> y;
            for (std::size_t i : idx) y.push_back(labels[i]);
            const LossResult ce = ce_loss(corrected, y);
            std::vector<double> grad(2, 0.0);
            for (std::size_t i = 0; i < raw.rows(); ++i) {
                for (std::size_t j = known; j < raw.cols(); ++j) {
                    grad[0] += ce.grad(i, j) * raw(i, j);
                    grad[1] += ce.grad(i, j);
                }
            }
            std::vector<double> params{layer.alpha, layer.beta};
            sgd_update(params, grad, velocity, sgd, epoch);
            layer.alpha = params[0];
            layer.beta = params[1];
        }
    }
    return layer;
}

std::vector<double> nme_class_means(const FcnModel& model, const ReplayMemory& memory,
                                    const Context& ctx) {
    const std::size_t d = model.input_dim();
    std::vector<double> means(model.num_classes() * d, 0.0);
    for (const auto& [cls, idx] : memory.exemplars()) {
        if (idx.empty()) continue;
        const Matrix f = normalized_features(model, ctx, idx);
        double* mean = means.data() + static_cast<std::size_t>(cls) * d;
        for (std::size_t i = 0; i < f.rows(); ++i) {
            for (std::size_t j = 0; j < d; ++j) mean[j] += f(i, j);
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm += mean[j] * mean[j];
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (std::size_t j = 0; j < d; ++j) mean[j] /= norm;
        }
    }
    return means;
}

std::vector<int> predict(const FcnModel& model, const Context& ctx,
                         std::span<const std::size_t> idx, const std::vector<BiasLayer>& bias,
                         const std::vector<double>* nme_means) {
    std::vector<int> out(idx.size());
    if (nme_means != nullptr) {
        const Matrix f = normalized_features(model, ctx, idx);
        const std::size_t d = f.cols();
        const std::size_t classes = model.num_classes();
        for (std::size_t i = 0; i < f.rows(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < classes; ++c) {
                double dist = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double e = f(i, j) - (*nme_means)[c * d + j];
                    dist += e * e;
                }
                if (dist < best) {
                    best = dist;
                    out[i] = static_cast<int>(c);
                }
            }
        }
        return out;
    }
    const Matrix logits = predict_logits(model, ctx, idx, bias);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        out[i] = static_cast<int>(std::ranges::max_element(row) - row.begin());
    }
    return out;
}

void evaluate(const FcnModel& model, const Context& ctx, const TaskStream& stream,
              std::size_t task, const std::vector<BiasLayer>& bias,
              const std::vector<double>* nme_means, AccuracyMatrix& acc) {
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t <= task; ++t) {
        idx.insert(idx.end(), stream.tasks[t].test.begin(), stream.tasks[t].test.end());
    }
    const std::vector<int> truth = ctx.labels(idx);
    const std::vector<int> pred = predict(model, ctx, idx, bias, nme_means);
    std::vector<std::size_t> correct(model.num_classes(), 0), total(model.num_classes(), 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto c = static_cast<std::size_t>(truth[i]);
        ++total[c];
        correct[c] += pred[i] == truth[i] ? 1 : 0;
    }
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
        if (total[c] > 0) {
            acc.set(c, task, static_cast<double>(correct[c]) / static_cast<double>(total[c]));
        }
    }
}

void update_memory(ReplayMemory& memory, const FcnModel& model, const Context& ctx,
                   const Task& task, std::size_t classes_seen) {
    if (memory.capacity() < classes_seen) {
        warn("replay memory of " + std::to_string(memory.capacity()) + " cannot hold " +
             std::to_string(classes_seen) + " classes; keeping one exemplar per class");
    }
    const std::size_t quota = memory.quota(classes_seen);
    memory.shrink(quota);
    for (int cls : task.classes) {
        std::vector<std::size_t> candidates;
        for (std::size_t i : task.train) {
            if (ctx.ds.labels[i] == cls) candidates.push_back(i);
        }
        const int model_label = ctx.label_map[static_cast<std::size_t>(cls)];
        if (candidates.empty()) {
            memory.set(model_label, {});
            continue;
        }
        const Matrix f = normalized_features(model, ctx, candidates);
        const auto picked = herding_select(f, std::min(quota, candidates.size()));
        std::vector<std::size_t> chosen;
        for (std::size_t p : picked) chosen.push_back(candidates[p]);
        memory.set(model_label, std::move(chosen));
    }
}

TaskStream merged_stream(const TaskStream& stream) {
    TaskStream one;
    one.class_order = stream.class_order;
    Task all;
    for (const auto& t : stream.tasks) {
        all.classes.insert(all.classes.end(), t.classes.begin(), t.classes.end());
        all.train.insert(all.train.end(), t.train.begin(), t.train.end());
        all.test.insert(all.test.end(), t.test.begin(), t.test.end());
    }
    one.tasks.push_back(std::move(all));
    return one;
}

}  // namespace

CilResult run_cil(Method method, const FeatureDataset& ds, const TaskStream& input_stream,
                  const TrainHyper& hp, const Precision& precision, Rng& rng) {
    if (input_stream.tasks.empty()) {
        throw ParameterError("run_cil: empty task stream");
    }
    if (hp.batch < 1 || hp.epochs < 0) {
        throw ParameterError("run_cil: batch must be >= 1 and epochs >= 0");
    }
    if (precision) precision->validate();
    const TaskStream stream = method == Method::NoCl ? merged_stream(input_stream) : input_stream;
    const bool replay = uses_replay(method);
    if (replay && hp.memory == 0) {
        throw ParameterError("run_cil: replay methods need a positive memory capacity");
    }
    if (method == Method::Bic && !(hp.split_ratio > 0.0 && hp.split_ratio < 1.0)) {
        throw ParameterError("run_cil: split ratio must lie in (0, 1)");
    }

    const Context ctx{ds, hp, precision, stream.label_map(ds.num_classes())};
    CilResult result;
    result.class_order = stream.class_order;
    result.accuracy = AccuracyMatrix(stream.class_order.size(), stream.tasks.size());

    Rng model_rng = rng.split("model");
    FcnModel model = FcnModel::create(ds.feature_dim(), stream.tasks.front().classes.size(),
                                      model_rng, hp.hidden_layers);
    ReplayMemory memory(hp.memory);
    std::vector<BiasLayer> bias;
    const bool distill_method =
        method == Method::Lwf || method == Method::Icarl || method == Method::IcarlNme ||
        method == Method::Bic;

    std::size_t known = 0;
    for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
        const Task& task = stream.tasks[t];
        result.task_classes.push_back(task.classes);
        const std::size_t total = known + task.classes.size();
        Rng task_rng = rng.split("task").split(static_cast<std::uint64_t>(t));

        const FcnModel teacher = model;
        const std::vector<BiasLayer> teacher_bias = bias;
        if (t > 0) {
            Rng head_rng = task_rng.split("head");
            extend_head(model, total, head_rng);
        }

        std::vector<std::size_t> samples = task.train;
        std::vector<std::size_t> val;
        if (replay) {
            auto mem = memory.all_indices();
            if (method == Method::Bic && t > 0) {
                // Class-balanced hold-out: v per class from memory and new data.
                const std::size_t quota = memory.quota(total);
                const auto v = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::floor(hp.split_ratio * static_cast<double>(quota))));
                mem.clear();
                for (const auto& [cls, idx] : memory.exemplars()) {
                    std::size_t take = std::min(v, idx.size() > 0 ? idx.size() - 1 : 0);
                    if (take < v) {
                        warn("bias correction: old class " + std::to_string(cls) +
                             " has too few exemplars for a full validation share");
                    }
                    mem.insert(mem.end(), idx.begin(), idx.end() - static_cast<long>(take));
                    val.insert(val.end(), idx.end() - static_cast<long>(take), idx.end());
                }
                samples.clear();
                Rng val_rng = task_rng.split("validation");
                for (int cls : task.classes) {
                    std::vector<std::size_t> own;
                    for (std::size_t i : task.train) {
                        if (ds.labels[i] == cls) own.push_back(i);
                    }
                    val_rng.shuffle(own);
                    std::size_t take = std::min(v, own.size() > 0 ? own.size() - 1 : 0);
                    if (take < v) {
                        warn("bias correction: new class " + std::to_string(cls) +
                             " has too few samples for a full validation share");
                    }
                    val.insert(val.end(), own.begin(), own.begin() + static_cast<long>(take));
                    samples.insert(samples.end(), own.begin() + static_cast<long>(take), own.end());
                }
                std::ranges::sort(samples);
            }
            samples.insert(samples.end(), mem.begin(), mem.end());
        }

        StageInputs stage;
        stage.known = known;
        stage.new_slice_ce = method == Method::Lwf || method == Method::Finetune;
        if (t > 0 && distill_method) {
            stage.teacher = &teacher;
            stage.teacher_bias = &teacher_bias;
        }
        Rng train_rng = task_rng.split("train");
        train_stage(model, stage, std::move(samples), ctx, train_rng, result.stats);

        if (method == Method::Bic) {
            BiasLayer layer{1.0, 0.0, known, total};
            if (t > 0 && !val.empty()) {
                const Matrix logits = predict_logits(model, ctx, val, bias);
                Rng bic_rng = task_rng.split("bias");
                layer = fit_bias_layer(logits, ctx.labels(val), known, hp, bic_rng);
            }
            bias.push_back(layer);
        }
        if (replay) {
            update_memory(memory, model, ctx, task, total);
        }

        std::vector<double> means;
        if (method == Method::IcarlNme) {
            means = nme_class_means(model, memory, ctx);
        }
        evaluate(model, ctx, stream, t, bias, method == Method::IcarlNme ? &means : nullptr,
                 result.accuracy);
        result.task_accuracy.push_back(result.accuracy.task_average(t));
        result.forgetting.push_back(t == 0 ? 0.0 : forgetting_score(result.accuracy, t));
        known = total;
    }
    result.final_accuracy = result.task_accuracy.back();
    result.model = std::move(model);
    result.bias_layers = std::move(bias);
    return result;
}

CilResult train_lwf(const FeatureDataset& ds, const TaskStream& stream, const TrainHyper& hp,
                    const Precision& precision, Rng& rng) {
    return run_cil(Method::Lwf, ds, stream, hp, precision, rng);
}

CilResult train_icarl(const FeatureDataset& ds, const TaskStream& stream, const TrainHyper& hp,
                      const Precision& precision, Rng& rng, bool use_nme) {
    return run_cil(use_nme ? Method::IcarlNme : Method::Icarl, ds, stream, hp, precision, rng);
}

CilResult train_bic(const FeatureDataset& ds, const TaskStream& stream, const TrainHyper& hp,
                    const Precision& precision, Rng& rng) {
    return run_cil(Method::Bic, ds, stream, hp, precision, rng);
}

}  // namespace hdqt
