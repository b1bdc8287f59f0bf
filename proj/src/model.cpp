#include "reprog/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "reprog/checkpoint.hpp"
#include "reprog/errors.hpp"

namespace reprog {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
    case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::size_t in_dim, std::size_t out_dim, std::vector<double> weight,
                           std::vector<double> bias) {
  return {LayerKind::dense, in_dim, out_dim, std::move(weight), std::move(bias)};
}

namespace {

void validate_stack(const std::vector<LayerSpec>& layers, bool require_params) {
  if (layers.empty()) throw ShapeError("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    if (l.in_dim == 0 || l.out_dim == 0) throw ShapeError(where + ": zero dimension");
    if (i > 0 && layers[i - 1].out_dim != l.in_dim) {
      throw ShapeError(where + ": expected input width " + std::to_string(layers[i - 1].out_dim) +
                       ", got " + std::to_string(l.in_dim));
    }
    if (l.kind == LayerKind::dense) {
      if (require_params || !l.weight.empty()) {
        if (l.weight.size() != l.in_dim * l.out_dim) {
          throw ShapeError(where + ": weight must be " + std::to_string(l.out_dim) + " x " +
                           std::to_string(l.in_dim));
        }
        if (l.bias.size() != l.out_dim) {
          throw ShapeError(where + ": bias length must be " + std::to_string(l.out_dim));
        }
      }
    } else {
      if (l.in_dim != l.out_dim) throw ShapeError(where + ": element-wise layer changes width");
      if (!l.weight.empty() || !l.bias.empty()) throw ShapeError(where + ": carries parameters");
    }
    if (l.kind == LayerKind::softmax && i + 1 != layers.size()) {
      throw ShapeError(where + ": softmax may only appear as the final layer");
    }
  }
  if (layers.back().kind != LayerKind::softmax) throw ShapeError("model must end in softmax");
}

// Forward pass over the layer stack, keeping the input of every layer.
struct Activations {
  std::vector<Tensor> inputs;  // inputs[i] feeds layers[i]
  Tensor output;
};

Tensor apply_layer(const LayerSpec& l, const Tensor& x) {
  const std::size_t n = x.rows();
  switch (l.kind) {
    case LayerKind::dense: {
      Tensor y = Tensor::matrix(n, l.out_dim);
      for (std::size_t r = 0; r < n; ++r) {
        auto in = x.row(r);
        auto out = y.row(r);
        for (std::size_t o = 0; o < l.out_dim; ++o) {
          const double* w = l.weight.data() + o * l.in_dim;
          double acc = l.bias[o];
          for (std::size_t k = 0; k < l.in_dim; ++k) acc += w[k] * in[k];
          out[o] = acc;
        }
      }
      return y;
    }
    case LayerKind::relu: {
      Tensor y = x;
      for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case LayerKind::softmax:
      return softmax_rows(x);
    case LayerKind::flatten:
      return x;
  }
  return x;
}

Activations run(const std::vector<LayerSpec>& layers, const Tensor& batch, std::size_t stop) {
  Activations a;
  a.inputs.reserve(stop);
  Tensor cur = batch;
  for (std::size_t i = 0; i < stop; ++i) {
    a.inputs.push_back(cur);
    cur = apply_layer(layers[i], a.inputs.back());
  }
  a.output = std::move(cur);
  return a;
}

// Back-propagates grad (w.r.t. the output of layers[stop-1]) down to the
// input. When param_grads is non-null, dense-layer gradients are accumulated
// into it (one entry per layer, weight then bias).
Tensor back_propagate(const std::vector<LayerSpec>& layers, const Activations& acts,
                      std::size_t stop, Tensor grad,
                      std::vector<std::vector<double>>* param_grads) {
  for (std::size_t i = stop; i-- > 0;) {
    const LayerSpec& l = layers[i];
    const Tensor& x = acts.inputs[i];
    const std::size_t n = x.rows();
    switch (l.kind) {
      case LayerKind::dense: {
        if (param_grads) {
          auto& g = (*param_grads)[i];
          g.resize(l.weight.size() + l.bias.size(), 0.0);
          for (std::size_t r = 0; r < n; ++r) {
            auto in = x.row(r);
            auto go = grad.row(r);
            for (std::size_t o = 0; o < l.out_dim; ++o) {
              double* gw = g.data() + o * l.in_dim;
              for (std::size_t k = 0; k < l.in_dim; ++k) gw[k] += go[o] * in[k];
              g[l.weight.size() + o] += go[o];
            }
          }
        }
        if (i == 0 && param_grads) break;
        Tensor gin = Tensor::matrix(n, l.in_dim);
        for (std::size_t r = 0; r < n; ++r) {
          auto go = grad.row(r);
          auto gi = gin.row(r);
          for (std::size_t o = 0; o < l.out_dim; ++o) {
            const double* w = l.weight.data() + o * l.in_dim;
            const double g = go[o];
            if (g == 0.0) continue;
            for (std::size_t k = 0; k < l.in_dim; ++k) gi[k] += g * w[k];
          }
        }
        grad = std::move(gin);
        break;
      }
      case LayerKind::relu:
        for (std::size_t j = 0; j < grad.size(); ++j) {
          if (!(x[j] > 0.0)) grad[j] = 0.0;
        }
        break;
      case LayerKind::softmax: {
        Tensor p = softmax_rows(x);
        for (std::size_t r = 0; r < n; ++r) {
          auto pr = p.row(r);
          auto gr = grad.row(r);
          double dot = 0.0;
          for (std::size_t k = 0; k < pr.size(); ++k) dot += pr[k] * gr[k];
          for (std::size_t k = 0; k < pr.size(); ++k) gr[k] = pr[k] * (gr[k] - dot);
        }
        break;
      }
      case LayerKind::flatten:
        break;
    }
  }
  return grad;
}

void check_batch(const FrozenModel& model, const Tensor& batch) {
  require_cols(batch, model.input_dim(), "model input batch");
}

}  // namespace

FrozenModel::FrozenModel(std::vector<LayerSpec> layers, InputRange range)
    : layers_(std::move(layers)), range_(range) {
  validate_stack(layers_, true);
  if (!(range_.lo < range_.hi)) throw ShapeError("input range must satisfy lo < hi");
  for (const auto& l : layers_) {
    for (double v : l.weight) {
      if (!std::isfinite(v)) throw NumericError("non-finite weight in model");
    }
    for (double v : l.bias) {
      if (!std::isfinite(v)) throw NumericError("non-finite bias in model");
    }
  }
}

std::size_t FrozenModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

std::string FrozenModel::param_digest() const {
  auto bytes = manifest_bytes(*this);
  auto payload = payload_bytes(*this);
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  return to_hex(sha256(bytes));
}

Tensor softmax_rows(const Tensor& z) {
  Tensor p = z;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return p;
}

std::vector<int> argmax_rows(const Tensor& t) {
  std::vector<int> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Tensor forward(const FrozenModel& model, const Tensor& batch) {
  check_batch(model, batch);
  return run(model.layers(), batch, model.layers().size()).output;
}

Tensor logits(const FrozenModel& model, const Tensor& batch) {
  check_batch(model, batch);
  return run(model.layers(), batch, model.layers().size() - 1).output;
}

Tensor backward_to_input(const FrozenModel& model, const Tensor& batch, const Tensor& grad_out,
                         OutputHead head) {
  check_batch(model, batch);
  require_shape(grad_out, batch.rows(), model.num_classes(), "backward_to_input grad_out");
  const std::size_t stop =
      head == OutputHead::probabilities ? model.layers().size() : model.layers().size() - 1;
  Activations acts = run(model.layers(), batch, stop);
  return back_propagate(model.layers(), acts, stop, grad_out, nullptr);
}

void SourceTrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("source training epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("source training batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("source training learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("source training momentum must lie in [0, 1)");
  }
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

double mean_cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    total -= std::log(std::max(probs(r, static_cast<std::size_t>(labels[r])), 1e-12));
  }
  return total / static_cast<double>(probs.rows());
}

}  // namespace

FrozenModel train_source(const Dataset& data, std::vector<LayerSpec> arch,
                         const SourceTrainConfig& cfg, SourceTrainStats* stats) {
  cfg.validate();
  if (data.size() == 0) throw DataError("train_source: empty dataset");
  data.validate();
  validate_stack(arch, false);
  if (data.dim() != arch.front().in_dim) {
    throw ShapeError("train_source: samples have dimension " + std::to_string(data.dim()) +
                     ", architecture expects " + std::to_string(arch.front().in_dim));
  }
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= arch.back().out_dim) {
      throw DataError("train_source: label " + std::to_string(y) + " outside [0, " +
                      std::to_string(arch.back().out_dim) + ")");
    }
  }

  std::mt19937_64 rng(cfg.seed);
  for (auto& l : arch) {
    if (l.kind != LayerKind::dense || !l.weight.empty()) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
    std::uniform_real_distribution<double> init(-limit, limit);
    l.weight.resize(l.in_dim * l.out_dim);
    for (double& w : l.weight) w = init(rng);
    l.bias.assign(l.out_dim, 0.0);
  }

  const std::size_t n = data.size();
  const std::size_t stop = arch.size() - 1;  // train against logits
  auto full_loss = [&] {
    Activations a = run(arch, data.samples, arch.size());
    return mean_cross_entropy(a.output, data.labels);
  };
  const double initial_loss = full_loss();

  std::vector<std::vector<double>> velocity(arch.size());
  for (std::size_t i = 0; i < arch.size(); ++i) velocity[i].assign(arch[i].parameter_count(), 0.0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor xb = gather_rows(data.samples, idx);
      const std::size_t b = idx.size();

      Activations acts = run(arch, xb, stop);
      Tensor grad = softmax_rows(acts.output);
      for (std::size_t r = 0; r < b; ++r) {
        grad(r, static_cast<std::size_t>(data.labels[idx[r]])) -= 1.0;
      }
      for (double& g : grad.data()) g /= static_cast<double>(b);

      std::vector<std::vector<double>> grads(arch.size());
      back_propagate(arch, acts, stop, std::move(grad), &grads);

      for (std::size_t i = 0; i < arch.size(); ++i) {
        if (grads[i].empty()) continue;
        LayerSpec& l = arch[i];
        auto& v = velocity[i];
        const std::size_t nw = l.weight.size();
        for (std::size_t k = 0; k < v.size(); ++k) {
          v[k] = cfg.momentum * v[k] + grads[i][k];
          double& p = k < nw ? l.weight[k] : l.bias[k - nw];
          p -= cfg.learning_rate * v[k];
        }
      }
    }
  }

  FrozenModel model(std::move(arch));
  if (stats) {
    Tensor probs = forward(model, data.samples);
    stats->initial_loss = initial_loss;
    stats->final_loss = mean_cross_entropy(probs, data.labels);
    stats->train_accuracy = accuracy(argmax_rows(probs), data.labels);
  }
  return model;
}

}  // namespace reprog
