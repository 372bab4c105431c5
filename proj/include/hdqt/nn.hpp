#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hdqt/matrix.hpp"
#include "hdqt/qgemm.hpp"
#include "hdqt/quantizer.hpp"
#include "hdqt/rng.hpp"

namespace hdqt {

/// Quantization scheme for a pass; std::nullopt runs every GEMM at working
/// precision.
using Precision = std::optional<QuantConfig>;

struct LinearLayer {
    Matrix weights;  // in_dim x out_dim, master copy
    std::vector<double> bias;

    std::size_t in_dim() const { return weights.rows(); }
    std::size_t out_dim() const { return weights.cols(); }

    bool operator==(const LinearLayer&) const = default;
};

/// Fully connected ReLU network: hidden layers keep the input width, the
/// head emits one logit per class seen so far.
struct FcnModel {
    std::vector<LinearLayer> hidden;
    LinearLayer head;

    /// `hidden_layers` square layers followed by the head; weights uniform in
    /// +-1/sqrt(fan_in), biases zero.
    static FcnModel create(std::size_t input_dim, std::size_t classes, Rng& rng,
                           std::size_t hidden_layers = 2);

    std::size_t input_dim() const;
    std::size_t num_classes() const { return head.out_dim(); }
    std::size_t layer_count() const { return hidden.size() + 1; }
    LinearLayer& layer(std::size_t i) { return i < hidden.size() ? hidden[i] : head; }
    const LinearLayer& layer(std::size_t i) const { return i < hidden.size() ? hidden[i] : head; }

    bool operator==(const FcnModel&) const = default;
};

struct ForwardCache {
    std::vector<Matrix> inputs;  // input to every linear layer, in order
    std::vector<Matrix> pre;     // pre-activations of hidden layers
};

struct ForwardResult {
    Matrix logits;
    ForwardCache cache;

    /// Penultimate features, i.e. the input to the head.
    const Matrix& features() const { return cache.inputs.back(); }
};

ForwardResult forward(const FcnModel& model, const Matrix& x, const Precision& precision,
                      GemmStats* stats = nullptr);

/// Penultimate-layer activations only.
Matrix features(const FcnModel& model, const Matrix& x, const Precision& precision);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;
};

Gradients backward(const FcnModel& model, const ForwardCache& cache, const Matrix& dlogits,
                   const Precision& precision, Rng& rng, GemmStats* stats = nullptr);

struct LossResult {
    double loss = 0.0;
    Matrix grad;
};

/// Mean softmax cross-entropy; labels index columns of `logits`.
LossResult ce_loss(const Matrix& logits, std::span<const int> labels);

/// Distillation loss between temperature-scaled teacher and student
/// distributions over the teacher's classes (the first old.cols() columns
/// of `student`). Averaged over the batch; gradient has student's shape.
LossResult kd_loss(const Matrix& teacher, const Matrix& student, double temperature);

Matrix softmax_rows(const Matrix& logits);

struct SgdState {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0002;
    /// (epoch, multiplier): from that epoch on, lr is multiplied in.
    std::vector<std::pair<int, double>> schedule;
    Gradients velocity;

    double lr_at(int epoch) const;
};

/// v <- m v + g + wd p;  p <- p - lr(epoch) v
void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                const SgdState& state, int epoch);

void sgd_step(FcnModel& model, const Gradients& grads, SgdState& state, int epoch);

/// Grows the head to `new_class_count` outputs. Existing columns are kept
/// bit-exactly; new ones follow the initialization scheme.
void extend_head(FcnModel& model, std::size_t new_class_count, Rng& rng);

/// Text checkpoint; see README for the format.
void save_checkpoint(const FcnModel& model, const std::filesystem::path& path);
FcnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace hdqt
