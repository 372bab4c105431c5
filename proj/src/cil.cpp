#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "hdqt/cil.hpp"
#include "hdqt/errors.hpp"

namespace hdqt {

std::vector<int> TaskStream::label_map(std::size_t num_classes) const {
    std::vector<int> map(num_classes, -1);
    for (std::size_t k = 0; k < class_order.size(); ++k) {
        map[static_cast<std::size_t>(class_order[k])] = static_cast<int>(k);
    }
    return map;
}

TaskStream split_tasks(const FeatureDataset& ds, std::size_t classes_per_task, Rng& rng,
                       bool shuffle_classes) {
    if (classes_per_task < 1) {
        throw ParameterError("split_tasks: classes per task must be >= 1");
    }
    TaskStream stream;
    stream.class_order.resize(ds.num_classes());
    std::iota(stream.class_order.begin(), stream.class_order.end(), 0);
    if (shuffle_classes) {
        Rng order_rng = rng.split("class_order");
        order_rng.shuffle(stream.class_order);
    }
    std::vector<int> task_of(ds.num_classes(), -1);
    for (std::size_t k = 0; k < stream.class_order.size(); k += classes_per_task) {
        Task task;
        const std::size_t end = std::min(stream.class_order.size(), k + classes_per_task);
        for (std::size_t j = k; j < end; ++j) {
            task.classes.push_back(stream.class_order[j]);
            task_of[static_cast<std::size_t>(stream.class_order[j])] =
                static_cast<int>(stream.tasks.size());
        }
        stream.tasks.push_back(std::move(task));
    }
    for (std::size_t i : ds.train) {
        stream.tasks[static_cast<std::size_t>(task_of[static_cast<std::size_t>(ds.labels[i])])]
            .train.push_back(i);
    }
    for (std::size_t i : ds.test) {
        stream.tasks[static_cast<std::size_t>(task_of[static_cast<std::size_t>(ds.labels[i])])]
            .test.push_back(i);
    }
    return stream;
}

std::size_t ReplayMemory::total() const {
    std::size_t n = 0;
    for (const auto& [cls, idx] : exemplars_) n += idx.size();
    return n;
}

std::size_t ReplayMemory::quota(std::size_t classes_seen) const {
    if (classes_seen == 0) return capacity_;
    return std::max<std::size_t>(1, capacity_ / classes_seen);
}

void ReplayMemory::shrink(std::size_t per_class) {
    for (auto& [cls, idx] : exemplars_) {
        if (idx.size() > per_class) idx.resize(per_class);
    }
}

void ReplayMemory::set(int model_label, std::vector<std::size_t> ordered_indices) {
    exemplars_[model_label] = std::move(ordered_indices);
}

std::vector<std::size_t> ReplayMemory::all_indices() const {
    std::vector<std::size_t> out;
    for (const auto& [cls, idx] : exemplars_) out.insert(out.end(), idx.begin(), idx.end());
    return out;
}

void BiasLayer::apply(Matrix& logits) const {
    const std::size_t stop = std::min(end, logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        for (std::size_t j = first; j < stop; ++j) {
            logits(i, j) = alpha * logits(i, j) + beta;
        }
    }
}

AccuracyMatrix::AccuracyMatrix(std::size_t classes, std::size_t tasks)
    : cells_(classes, std::vector<std::optional<double>>(tasks)) {}

void AccuracyMatrix::set(std::size_t cls, std::size_t task, double acc) {
    if (cls >= num_classes() || task >= num_tasks()) {
        throw ParameterError("AccuracyMatrix: cell out of range");
    }
    if (!(acc >= 0.0 && acc <= 1.0)) {
        throw ParameterError("AccuracyMatrix: accuracy must lie in [0, 1]");
    }
    cells_[cls][task] = acc;
}

std::optional<double> AccuracyMatrix::at(std::size_t cls, std::size_t task) const {
    if (cls >= num_classes() || task >= num_tasks()) {
        throw ParameterError("AccuracyMatrix: cell out of range");
    }
    return cells_[cls][task];
}

double AccuracyMatrix::task_average(std::size_t task) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : cells_) {
        if (task < row.size() && row[task]) {
            sum += *row[task];
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double forgetting_score(const AccuracyMatrix& acc, std::size_t task) {
    if (task == 0) {
        throw ParameterError("forgetting_score: undefined for the first task");
    }
    if (task >= acc.num_tasks()) {
        throw ParameterError("forgetting_score: task out of range");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < acc.num_classes(); ++c) {
        double best = -1.0;
        for (std::size_t l = 0; l < task; ++l) {
            if (auto v = acc.at(c, l)) best = std::max(best, *v);
        }
        const auto now = acc.at(c, task);
        if (best < 0.0 || !now) continue;
        sum += best - *now;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

Method parse_method(const std::string& name) {
    if (name == "nocl") return Method::NoCl;
    if (name == "finetune") return Method::Finetune;
    if (name == "lwf") return Method::Lwf;
    if (name == "icarl") return Method::Icarl;
    if (name == "icarl_nme") return Method::IcarlNme;
    if (name == "bic") return Method::Bic;
    throw ConfigError("unknown method '" + name + "'");
}

std::string to_string(Method method) {
    switch (method) {
        case Method::NoCl: return "nocl";
        case Method::Finetune: return "finetune";
        case Method::Lwf: return "lwf";
        case Method::Icarl: return "icarl";
        case Method::IcarlNme: return "icarl_nme";
        case Method::Bic: return "bic";
    }
    return "nocl";
}

bool uses_replay(Method method) {
    return method == Method::Icarl || method == Method::IcarlNme || method == Method::Bic;
}

std::vector<std::size_t> herding_select(const Matrix& features, std::size_t k) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (n == 0) {
        throw DataError("herding_select: class has no samples");
    }
    if (k > n) {
        throw ParameterError("herding_select: k exceeds sample count");
    }
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = features.row(i);
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    for (double& v : mean) v /= static_cast<double>(n);

    std::vector<double> running(d, 0.0);
    std::vector<bool> taken(n, false);
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t step = 1; step <= k; ++step) {
        std::size_t best = n;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            auto row = features.row(i);
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double e = mean[j] - (running[j] + row[j]) / static_cast<double>(step);
                dist += e * e;
            }
            if (dist < best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        taken[best] = true;
        picked.push_back(best);
        auto row = features.row(best);
        for (std::size_t j = 0; j < d; ++j) running[j] += row[j];
    }
    return picked;
}

std::vector<double> final_class_accuracy(const CilResult& result) {
    std::vector<double> out(result.class_order.size(), 0.0);
    const std::size_t last = result.accuracy.num_tasks() - 1;
    for (std::size_t k = 0; k < result.class_order.size(); ++k) {
        out[static_cast<std::size_t>(result.class_order[k])] = result.accuracy.at(k, last).value_or(0.0);
    }
    return out;
}

std::vector<double> per_class_delta(const CilResult& first, const CilResult& second) {
    const std::set<int> a(first.class_order.begin(), first.class_order.end());
    const std::set<int> b(second.class_order.begin(), second.class_order.end());
    if (a != b || first.accuracy.num_tasks() == 0 || second.accuracy.num_tasks() == 0) {
        throw DataError("per_class_delta: runs cover different class sets");
    }
    const auto fa = final_class_accuracy(first);
    const auto fb = final_class_accuracy(second);
    std::vector<double> delta;
    for (int cls : first.class_order) {
        const auto c = static_cast<std::size_t>(cls);
        delta.push_back(fb[c] - fa[c]);
    }
    return delta;
}

}  // namespace hdqt
