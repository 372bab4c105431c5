#include "hdqt/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdqt/errors.hpp"

namespace hdqt {

namespace {

void init_columns(Matrix& w, std::size_t first_col, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = first_col; j < w.cols(); ++j) {
            w(i, j) = uniform(rng, -bound, bound);
        }
    }
}

LinearLayer make_layer(std::size_t in, std::size_t out, Rng& rng) {
    LinearLayer layer{Matrix(in, out), std::vector<double>(out, 0.0)};
    init_columns(layer.weights, 0, rng);
    return layer;
}

Matrix linear(const LinearLayer& layer, const Matrix& x, const Precision& precision,
              GemmStats* stats) {
    Matrix z = precision ? qgemm_forward(x, layer.weights, *precision, stats)
                         : matmul_ref(x, layer.weights);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] += layer.bias[j];
        }
    }
    return z;
}

Matrix relu(const Matrix& z) {
    Matrix a = z;
    for (double& v : a.values()) {
        v = v > 0.0 ? v : 0.0;
    }
    return a;
}

}  // namespace

FcnModel FcnModel::create(std::size_t input_dim, std::size_t classes, Rng& rng,
                          std::size_t hidden_layers) {
    if (input_dim == 0) {
        throw ParameterError("FcnModel: input width must be positive");
    }
    Rng init = rng.split("init");
    FcnModel model;
    for (std::size_t i = 0; i < hidden_layers; ++i) {
        Rng r = init.split(i);
        model.hidden.push_back(make_layer(input_dim, input_dim, r));
    }
    Rng r = init.split("head");
    model.head = make_layer(input_dim, classes, r);
    return model;
}

std::size_t FcnModel::input_dim() const {
    return hidden.empty() ? head.in_dim() : hidden.front().in_dim();
}

ForwardResult forward(const FcnModel& model, const Matrix& x, const Precision& precision,
                      GemmStats* stats) {
    if (x.cols() != model.input_dim()) {
        throw ShapeError("forward: input has " + std::to_string(x.cols()) +
                         " features, model expects " + std::to_string(model.input_dim()));
    }
    ForwardResult out;
    Matrix a = x;
    for (const auto& layer : model.hidden) {
        out.cache.inputs.push_back(a);
        Matrix z = linear(layer, a, precision, stats);
        a = relu(z);
        out.cache.pre.push_back(std::move(z));
    }
    out.cache.inputs.push_back(a);
    out.logits = linear(model.head, a, precision, stats);
    return out;
}

Matrix features(const FcnModel& model, const Matrix& x, const Precision& precision) {
    if (x.cols() != model.input_dim()) {
        throw ShapeError("features: input width mismatch");
    }
    Matrix a = x;
    for (const auto& layer : model.hidden) {
        a = relu(linear(layer, a, precision, nullptr));
    }
    return a;
}

Gradients backward(const FcnModel& model, const ForwardCache& cache, const Matrix& dlogits,
                   const Precision& precision, Rng& rng, GemmStats* stats) {
    const std::size_t layers = model.layer_count();
    if (cache.inputs.size() != layers || cache.pre.size() != model.hidden.size()) {
        throw ShapeError("backward: cache does not match model depth");
    }
    if (dlogits.cols() != model.num_classes() || dlogits.rows() != cache.inputs.front().rows()) {
        throw ShapeError("backward: dlogits shape mismatch");
    }
    Gradients grads;
    grads.weights.resize(layers);
    grads.bias.resize(layers);

    Matrix delta = dlogits;
    for (std::size_t idx = layers; idx-- > 0;) {
        const LinearLayer& layer = model.layer(idx);
        const Matrix& input = cache.inputs[idx];
        Rng layer_rng = rng.split(static_cast<std::uint64_t>(idx));

        grads.weights[idx] = precision
                                 ? qgemm_backward_weight(input, delta, *precision, layer_rng, stats)
                                 : matmul_ref(transpose(input), delta);
        auto& db = grads.bias[idx];
        db.assign(layer.out_dim(), 0.0);
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            auto row = delta.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                db[j] += row[j];
            }
        }
        if (idx == 0) {
            break;
        }
        Matrix dx = precision
                        ? qgemm_backward_input(delta, layer.weights, *precision, layer_rng, stats)
                        : matmul_ref(delta, transpose(layer.weights));
        const Matrix& pre = cache.pre[idx - 1];
        auto dv = dx.values();
        auto pv = pre.values();
        for (std::size_t i = 0; i < dv.size(); ++i) {
            if (!(pv[i] > 0.0)) {
                dv[i] = 0.0;
            }
        }
        delta = std::move(dx);
    }
    return grads;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto in = logits.row(i);
        auto out = p.row(i);
        const double m = *std::ranges::max_element(in);
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            out[j] = std::exp(in[j] - m);
            sum += out[j];
        }
        for (double& v : out) {
            v /= sum;
        }
    }
    return p;
}

LossResult ce_loss(const Matrix& logits, std::span<const int> labels) {
    if (labels.size() != logits.rows()) {
        throw ShapeError("ce_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
    }
    LossResult r;
    if (logits.rows() == 0) {
        r.grad = Matrix(0, logits.cols());
        return r;
    }
    r.grad = softmax_rows(logits);
    const double inv_n = 1.0 / static_cast<double>(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
            throw DataError("ce_loss: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(logits.cols()) + ")");
        }
        auto in = logits.row(i);
        const double m = *std::ranges::max_element(in);
        double sum = 0.0;
        for (double v : in) sum += std::exp(v - m);
        r.loss += (std::log(sum) + m - in[static_cast<std::size_t>(y)]) * inv_n;
        auto g = r.grad.row(i);
        g[static_cast<std::size_t>(y)] -= 1.0;
        for (double& v : g) v *= inv_n;
    }
    return r;
}

LossResult kd_loss(const Matrix& teacher, const Matrix& student, double temperature) {
    if (!(temperature > 0.0)) {
        throw ParameterError("kd_loss: temperature must be positive");
    }
    if (teacher.rows() != student.rows() || teacher.cols() > student.cols()) {
        throw ShapeError("kd_loss: teacher is " + std::to_string(teacher.rows()) + "x" +
                         std::to_string(teacher.cols()) + ", student is " +
                         std::to_string(student.rows()) + "x" + std::to_string(student.cols()));
    }
    const std::size_t n = teacher.rows();
    const std::size_t k = teacher.cols();
    LossResult r;
    r.grad = Matrix(student.rows(), student.cols());
    if (n == 0 || k == 0) {
        return r;
    }
    // p^(1/T) renormalized equals softmax(z / T), so scale logits directly.
    Matrix t_scaled(n, k), s_scaled(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            t_scaled(i, j) = teacher(i, j) / temperature;
            s_scaled(i, j) = student(i, j) / temperature;
        }
    }
    const Matrix pt = softmax_rows(t_scaled);
    const Matrix ps = softmax_rows(s_scaled);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto srow = s_scaled.row(i);
        const double m = *std::ranges::max_element(srow);
        double sum = 0.0;
        for (double v : srow) sum += std::exp(v - m);
        const double log_z = std::log(sum) + m;
        for (std::size_t j = 0; j < k; ++j) {
            r.loss -= pt(i, j) * (srow[j] - log_z) * inv_n;
            r.grad(i, j) = (ps(i, j) - pt(i, j)) * inv_n / temperature;
        }
    }
    return r;
}

double SgdState::lr_at(int epoch) const {
    double lr_now = lr;
    for (const auto& [at, mult] : schedule) {
        if (epoch >= at) {
            lr_now *= mult;
        }
    }
    return lr_now;
}

void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                const SgdState& state, int epoch) {
    if (param.size() != grad.size() || param.size() != velocity.size()) {
        throw ShapeError("sgd_update: parameter/gradient/velocity size mismatch");
    }
    const double lr = state.lr_at(epoch);
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = state.momentum * velocity[i] + grad[i] + state.weight_decay * param[i];
        param[i] -= lr * velocity[i];
    }
}

void sgd_step(FcnModel& model, const Gradients& grads, SgdState& state, int epoch) {
    const std::size_t layers = model.layer_count();
    if (grads.weights.size() != layers || grads.bias.size() != layers) {
        throw ShapeError("sgd_step: gradient count does not match model depth");
    }
    auto& vel = state.velocity;
    if (vel.weights.size() != layers) {
        vel.weights.clear();
        vel.bias.clear();
        for (std::size_t i = 0; i < layers; ++i) {
            vel.weights.emplace_back(model.layer(i).in_dim(), model.layer(i).out_dim());
            vel.bias.emplace_back(model.layer(i).out_dim(), 0.0);
        }
    }
    for (std::size_t i = 0; i < layers; ++i) {
        LinearLayer& layer = model.layer(i);
        if (vel.weights[i].rows() != layer.in_dim() || vel.weights[i].cols() != layer.out_dim()) {
            throw ShapeError("sgd_step: velocity shape does not match layer " + std::to_string(i));
        }
        sgd_update(layer.weights.values(), grads.weights[i].values(), vel.weights[i].values(),
                   state, epoch);
        sgd_update(layer.bias, grads.bias[i], vel.bias[i], state, epoch);
        if (!all_finite(layer.weights)) {
            throw Error("sgd_step: non-finite weights in layer " + std::to_string(i));
        }
    }
}

void extend_head(FcnModel& model, std::size_t new_class_count, Rng& rng) {
    const std::size_t old = model.num_classes();
    if (new_class_count < old) {
        throw ParameterError("extend_head: cannot shrink head from " + std::to_string(old) +
                             " to " + std::to_string(new_class_count));
    }
    if (new_class_count == old) {
        return;
    }
    const Matrix& w = model.head.weights;
    Matrix grown(w.rows(), new_class_count);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        std::ranges::copy(w.row(i), grown.row(i).begin());
    }
    init_columns(grown, old, rng);
    model.head.weights = std::move(grown);
    model.head.bias.resize(new_class_count, 0.0);
}

}  // namespace hdqt
