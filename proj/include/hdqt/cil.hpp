#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdqt/data.hpp"
#include "hdqt/matrix.hpp"
#include "hdqt/nn.hpp"
#include "hdqt/qgemm.hpp"
#include "hdqt/rng.hpp"

namespace hdqt {

struct Task {
    std::vector<int> classes;          // dataset labels
    std::vector<std::size_t> train;    // dataset sample indices
    std::vector<std::size_t> test;
};

/// Ordered disjoint class groups. class_order[k] is the dataset label that
/// the model sees as output k.
struct TaskStream {
    std::vector<int> class_order;
    std::vector<Task> tasks;

    /// Model-side label of every dataset label.
    std::vector<int> label_map(std::size_t num_classes) const;
};

/// Shuffles the classes with `rng` and groups them `classes_per_task` at a
/// time; the last task takes the remainder.
TaskStream split_tasks(const FeatureDataset& ds, std::size_t classes_per_task, Rng& rng,
                       bool shuffle_classes = true);

/// Exemplar store with a fixed total budget shared by all seen classes.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t total() const;
    /// floor(capacity / classes), never below one exemplar per class.
    std::size_t quota(std::size_t classes_seen) const;

    /// Truncates every class list to `per_class`, keeping selection order.
    void shrink(std::size_t per_class);
    void set(int model_label, std::vector<std::size_t> ordered_indices);

    const std::map<int, std::vector<std::size_t>>& exemplars() const { return exemplars_; }
    std::vector<std::size_t> all_indices() const;

private:
    std::size_t capacity_;
    std::map<int, std::vector<std::size_t>> exemplars_;
};

/// Affine correction of the logit columns [first, end).
struct BiasLayer {
    double alpha = 1.0;
    double beta = 0.0;
    std::size_t first = 0;
    std::size_t end = 0;

    void apply(Matrix& logits) const;
};

/// a[c][i]: accuracy of class c (arrival order) after task i.
class AccuracyMatrix {
public:
    AccuracyMatrix() = default;
    AccuracyMatrix(std::size_t classes, std::size_t tasks);

    std::size_t num_classes() const { return cells_.size(); }
    std::size_t num_tasks() const { return cells_.empty() ? 0 : cells_.front().size(); }

    void set(std::size_t cls, std::size_t task, double acc);
    std::optional<double> at(std::size_t cls, std::size_t task) const;
    /// Mean over classes with a value at `task`.
    double task_average(std::size_t task) const;

    bool operator==(const AccuracyMatrix&) const = default;

private:
    std::vector<std::vector<std::optional<double>>> cells_;
};

/// Mean over classes seen before `task` of (best earlier accuracy - current).
double forgetting_score(const AccuracyMatrix& acc, std::size_t task);

enum class Method { NoCl, Finetune, Lwf, Icarl, IcarlNme, Bic };

Method parse_method(const std::string& name);
std::string to_string(Method method);
bool uses_replay(Method method);

struct TrainHyper {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0002;
    std::vector<std::pair<int, double>> schedule{{50, 0.1}};
    int epochs = 100;
    std::size_t batch = 128;
    std::size_t memory = 200;
    double kd_lambda = 3.0;
    double temperature = 2.0;
    double split_ratio = 0.1;
    int bic_epochs = 100;
    double bic_lr = 0.001;
    std::size_t hidden_layers = 2;

    bool operator==(const TrainHyper&) const = default;
};

struct CilResult {
    std::vector<int> class_order;
    std::vector<std::vector<int>> task_classes;
    AccuracyMatrix accuracy;
    std::vector<double> task_accuracy;
    std::vector<double> forgetting;  // entry 0 is 0 by convention
    double final_accuracy = 0.0;
    GemmStats stats;
    FcnModel model;
    std::vector<BiasLayer> bias_layers;
};

/// Greedy herding: repeatedly adds the sample that brings the running
/// exemplar mean closest to the mean of all rows. Ties go to the lowest index.
std::vector<std::size_t> herding_select(const Matrix& features, std::size_t k);

/// Runs the class-incremental protocol for `method` over `stream`.
CilResult run_cil(Method method, const FeatureDataset& ds, const TaskStream& stream,
                  const TrainHyper& hp, const Precision& precision, Rng& rng);

CilResult train_lwf(const FeatureDataset& ds, const TaskStream& stream, const TrainHyper& hp,
                    const Precision& precision, Rng& rng);
CilResult train_icarl(const FeatureDataset& ds, const TaskStream& stream, const TrainHyper& hp,
                      const Precision& precision, Rng& rng, bool use_nme);
CilResult train_bic(const FeatureDataset& ds, const TaskStream& stream, const TrainHyper& hp,
                    const Precision& precision, Rng& rng);

/// Final per-class accuracy differences (second - first) in the first run's
/// arrival order.
std::vector<double> per_class_delta(const CilResult& first, const CilResult& second);

/// Final accuracy of every dataset class, indexed by dataset label.
std::vector<double> final_class_accuracy(const CilResult& result);

}  // namespace hdqt
