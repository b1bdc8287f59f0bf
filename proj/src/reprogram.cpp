#include "reprog/reprogram.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "reprog/zeroth_order.hpp"

namespace reprog {

const char* to_string(Mode mode) { return mode == Mode::white_box ? "white_box" : "black_box"; }

PlacementLayout LayoutConfig::resolve(std::size_t target_dim, std::size_t source_dim) const {
  PlacementLayout l{target_dim, source_dim, mode, offset, replicates};
  if (mode != PlacementLayout::Mode::replicate) l.replicates = 1;
  if (mode != PlacementLayout::Mode::offset) l.offset = 0;
  return l;
}

void ReprogramConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !(head_learning_rate >= 0.0)) {
    throw ConfigError("learning rates must be >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (zo.q < 1) throw ConfigError("zo.q must be >= 1");
  if (!(zo.mu > 0.0)) throw ConfigError("zo.mu must be > 0");
  if (output.labels_per_target < 1) throw ConfigError("labels_per_target must be >= 1");
  if (mode == Mode::black_box && output.kind == OutputMapConfig::Kind::linear_head &&
      output.head_input == HeadInput::logits) {
    throw ConfigError("black-box mode only observes probabilities; head_input must be probabilities");
  }
}

ReprogramState::ReprogramState(InputTransform t, OutputMap o)
    : transform(std::move(t)), output(std::move(o)) {
  w_velocity.assign(transform.layout().source_dim, 0.0);
  head_velocity.assign(output.trainable_count(), 0.0);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Tensor softmax_backward(const Tensor& p, const Tensor& grad) {
  Tensor g = grad;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto pr = p.row(r);
    auto gr = g.row(r);
    double dot = 0.0;
    for (std::size_t k = 0; k < pr.size(); ++k) dot += pr[k] * gr[k];
    for (std::size_t k = 0; k < pr.size(); ++k) gr[k] = pr[k] * (gr[k] - dot);
  }
  return g;
}

// Target scores from the source output the map consumes.
Tensor scores_from_source(const OutputMap& out, const Tensor& src) {
  if (out.is_label_mapping()) return aggregate_label_probs(out.mapping(), src);
  return softmax_rows(linear_head_forward(out.head(), src));
}

struct SourceSideGradient {
  double loss = 0.0;
  Tensor src;                 // d loss / d source output
  std::vector<double> head;   // d loss / d omega
};

SourceSideGradient source_side_gradient(const OutputMap& out, const Tensor& src,
                                        const std::vector<int>& labels, LossKind loss) {
  SourceSideGradient g;
  const Tensor pred = scores_from_source(out, src);
  g.loss = loss_value(loss, pred, labels);
  const Tensor gpred = loss_grad(loss, pred, labels);
  if (out.is_label_mapping()) {
    g.src = aggregate_label_backward(out.mapping(), gpred);
  } else {
    LinearHeadGrad hg = linear_head_backward(out.head(), src, softmax_backward(pred, gpred));
    g.src = std::move(hg.input);
    g.head = std::move(hg.weight);
    g.head.insert(g.head.end(), hg.bias.begin(), hg.bias.end());
  }
  return g;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string state_dump(const ReprogramState& state) {
  nlohmann::json j;
  j["W"] = state.transform.weights();
  if (!state.output.is_label_mapping()) {
    j["head_weight"] = state.output.head().weight;
    j["head_bias"] = state.output.head().bias;
  }
  return j.dump();
}

// Numeric failures inside a step (NaN scores reaching the loss, a non-finite
// oracle value) abort training with the last good parameters attached.
template <typename F>
auto guarded(const ReprogramState& state, const char* where, F&& f) {
  try {
    return f();
  } catch (const DivergenceError&) {
    throw;
  } catch (const NumericError& e) {
    throw DivergenceError(std::string(where) + ": " + e.what(), {}, state_dump(state));
  }
}

void apply_momentum(std::vector<double>& params, std::vector<double>& velocity,
                    const std::vector<double>& grad, double lr, double momentum) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    velocity[k] = momentum * velocity[k] + grad[k];
    params[k] -= lr * velocity[k];
  }
}

void update_head(ReprogramState& state, const std::vector<double>& grad, const ReprogramConfig& cfg) {
  if (state.output.is_label_mapping()) return;
  LinearHead& h = state.output.head();
  std::vector<double> params = h.weight;
  params.insert(params.end(), h.bias.begin(), h.bias.end());
  apply_momentum(params, state.head_velocity, grad, cfg.head_learning_rate, cfg.momentum);
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(h.weight.size()),
            h.weight.begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(h.weight.size()), params.end(),
            h.bias.begin());
}

}  // namespace

Tensor predict_target(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                      const Tensor& x) {
  const Tensor xt = apply_transform(t, x);
  const bool use_logits = !out.is_label_mapping() && out.head().input == HeadInput::logits;
  return scores_from_source(out, use_logits ? logits(model, xt) : forward(model, xt));
}

Tensor predict_target(ProbabilityOracle& oracle, const InputTransform& t, const OutputMap& out,
                      const Tensor& x) {
  if (!out.is_label_mapping() && out.head().input == HeadInput::logits) {
    throw UnsupportedModeError("a probability oracle cannot feed a logit-input head");
  }
  return scores_from_source(out, oracle.query(apply_transform(t, x)));
}

double composite_loss(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                      const Tensor& x, const std::vector<int>& labels, LossKind loss) {
  return loss_value(loss, predict_target(model, t, out, x), labels);
}

CompositeGradient composite_gradient(const FrozenModel& model, const InputTransform& t,
                                     const OutputMap& out, const Tensor& x,
                                     const std::vector<int>& labels, LossKind loss) {
  const Tensor xt = apply_transform(t, x);
  const bool use_logits = !out.is_label_mapping() && out.head().input == HeadInput::logits;
  const Tensor src = use_logits ? logits(model, xt) : forward(model, xt);
  SourceSideGradient sg = source_side_gradient(out, src, labels, loss);

  CompositeGradient g;
  g.loss = sg.loss;
  g.input = backward_to_input(model, xt, sg.src,
                              use_logits ? OutputHead::logits : OutputHead::probabilities);
  g.w = transform_grad(t, g.input).data();
  g.head = std::move(sg.head);
  return g;
}

double first_order_step(const FrozenModel& model, ReprogramState& state, const Tensor& x,
                        const std::vector<int>& labels, const ReprogramConfig& cfg) {
  CompositeGradient g = guarded(state, "first-order step", [&] {
    return composite_gradient(model, state.transform, state.output, x, labels, cfg.loss);
  });
  if (!std::isfinite(g.loss) || !all_finite(g.w) || !all_finite(g.head)) {
    throw DivergenceError("non-finite gradient in first-order step", {}, state_dump(state));
  }
  std::vector<double> w = state.transform.weights();
  apply_momentum(w, state.w_velocity, g.w, cfg.learning_rate, cfg.momentum);
  state.transform.set_weights(std::move(w));
  update_head(state, g.head, cfg);
  return g.loss;
}

ZerothOrderStep zeroth_order_step(ProbabilityOracle& oracle, ReprogramState& state, const Tensor& x,
                                  const std::vector<int>& labels, const ReprogramConfig& cfg,
                                  std::uint64_t step_seed) {
  if (!state.output.is_label_mapping() && state.output.head().input == HeadInput::logits) {
    throw UnsupportedModeError("black-box training cannot use a logit-input head");
  }
  const std::size_t calls_before = oracle.calls();
  const Tensor src = guarded(state, "zeroth-order step", [&] {
    return oracle.query(apply_transform(state.transform, x));
  });
  SourceSideGradient sg = guarded(state, "zeroth-order step", [&] {
    return source_side_gradient(state.output, src, labels, cfg.loss);
  });
  if (!std::isfinite(sg.loss) || !all_finite(sg.head)) {
    throw DivergenceError("non-finite loss in zeroth-order step", {}, state_dump(state));
  }

  InputTransform probe = state.transform;
  const OutputMap& out = state.output;
  ScalarOracle loss_fn = [&](const std::vector<double>& p) {
    probe.set_trainable_values(p);
    const Tensor s = oracle.query(apply_transform(probe, x));
    return loss_value(cfg.loss, scores_from_source(out, s), labels);
  };
  const std::vector<double> p = state.transform.trainable_values();
  std::vector<double> g = guarded(state, "zeroth-order step", [&] {
    return p.empty() ? std::vector<double>{}
                     : zeroth_order_gradient(loss_fn, p, sg.loss, cfg.zo.q, cfg.zo.mu, step_seed);
  });
  if (!all_finite(g)) throw DivergenceError("non-finite zeroth-order estimate", {}, state_dump(state));

  std::vector<double> w = state.transform.weights();
  const auto& idx = state.transform.trainable_indices();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    double& v = state.w_velocity[idx[k]];
    v = cfg.momentum * v + g[k];
    w[idx[k]] -= cfg.learning_rate * v;
  }
  state.transform.set_weights(std::move(w));
  update_head(state, sg.head, cfg);
  return {sg.loss, oracle.calls() - calls_before};
}

double evaluate_accuracy(ProbabilityOracle& oracle, const InputTransform& t, const OutputMap& out,
                         const Dataset& data) {
  return accuracy(argmax_rows(predict_target(oracle, t, out, data.samples)), data.labels);
}

namespace {

void check_range(const Dataset& data, InputRange range, const char* which) {
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    if (!range.contains(data.samples[i])) {
      throw DataError(std::string(which) + " sample " + std::to_string(i / data.dim()) +
                      " has value " + std::to_string(data.samples[i]) + " outside the model input range");
    }
  }
}

ReprogramResult run_reprogram(ProbabilityOracle& oracle, const FrozenModel* model,
                              InputRange range, const Dataset& train, const Dataset& test,
                              const ReprogramConfig& cfg, const ReprogramHooks& hooks) {
  cfg.validate();
  if (cfg.mode == Mode::white_box && model == nullptr) {
    throw UnsupportedModeError("white-box reprogramming needs in-process access to the model");
  }
  if (train.size() == 0) throw DataError("reprogram: empty target training set");
  if (test.size() == 0) throw DataError("reprogram: empty target test set");
  train.validate();
  test.validate();
  if (test.dim() != train.dim()) throw ShapeError("target train/test dimensions differ");
  const std::size_t d_t = train.dim();
  const std::size_t d_s = oracle.input_dim();
  const std::size_t k_t = train.num_classes;
  const std::size_t k_s = oracle.num_classes();
  if (d_t > d_s) {
    throw AssumptionError("assumption (i) violated: target dimension " + std::to_string(d_t) +
                          " > source dimension " + std::to_string(d_s));
  }
  if (k_t > k_s) {
    throw AssumptionError("assumption (ii) violated: target classes " + std::to_string(k_t) +
                          " > source classes " + std::to_string(k_s));
  }
  if (test.num_classes != k_t) throw DataError("target train/test class counts differ");
  if (cfg.enforce_range) {
    check_range(train, range, "target train");
    check_range(test, range, "target test");
  }

  InputTransform transform(cfg.layout.resolve(d_t, d_s), cfg.layout.overlay);
  OutputMap out;
  if (cfg.output.kind == OutputMapConfig::Kind::label_mapping) {
    out.variant = cfg.output.strategy == OutputMapConfig::Strategy::greedy
                      ? greedy_frequency_mapping(oracle, transform, train, cfg.output.labels_per_target)
                      : random_label_mapping(k_s, k_t, cfg.output.labels_per_target, cfg.seed);
  } else {
    out.variant = LinearHead::initialized(k_s, k_t, splitmix64(cfg.seed), cfg.output.head_input);
  }

  ReprogramState state(std::move(transform), std::move(out));
  TrainTrace trace;

  // Black-box runs evaluate through the oracle too, so their query counts
  // do not depend on whether a local model happens to be available.
  const FrozenModel* eval_model = cfg.mode == Mode::white_box ? model : nullptr;
  auto evaluate = [&](int epoch, std::size_t calls) {
    EpochRecord rec;
    rec.epoch = epoch;
    Tensor pred_train =
        eval_model ? predict_target(*eval_model, state.transform, state.output, train.samples)
                   : predict_target(oracle, state.transform, state.output, train.samples);
    Tensor pred_test =
        eval_model ? predict_target(*eval_model, state.transform, state.output, test.samples)
                   : predict_target(oracle, state.transform, state.output, test.samples);
    rec.loss = loss_value(cfg.loss, pred_train, train.labels);
    rec.train_accuracy = accuracy(argmax_rows(pred_train), train.labels);
    rec.test_accuracy = accuracy(argmax_rows(pred_test), test.labels);
    rec.queries = oracle.queries();
    rec.oracle_calls = calls;
    if (hooks.alignment) rec.alignment = hooks.alignment(state.transform, state.output);
    return rec;
  };

  const auto t0 = std::chrono::steady_clock::now();
  std::size_t zo_calls = 0;
  trace.baseline = evaluate(0, 0);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const Dataset batch = train.subset(idx);
      try {
        if (cfg.mode == Mode::white_box) {
          first_order_step(*model, state, batch.samples, batch.labels, cfg);
        } else {
          zo_calls += zeroth_order_step(oracle, state, batch.samples, batch.labels, cfg,
                                        splitmix64(cfg.seed ^ splitmix64(trace.steps)))
                          .oracle_calls;
        }
      } catch (const DivergenceError& e) {
        throw DivergenceError(e.what(), trace, e.dump);
      }
      ++trace.steps;
    }
    EpochRecord rec = evaluate(epoch, zo_calls);
    trace.seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (!std::isfinite(rec.loss)) {
      trace.epochs.push_back(rec);
      throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch), trace,
                            state_dump(state));
    }
    trace.epochs.push_back(rec);
  }
  return {std::move(state.transform), std::move(state.output), std::move(trace)};
}

}  // namespace

ReprogramResult reprogram(const FrozenModel& model, const Dataset& target_train,
                          const Dataset& target_test, const ReprogramConfig& cfg,
                          const ReprogramHooks& hooks) {
  LocalOracle oracle(model);
  return run_reprogram(oracle, &model, model.input_range(), target_train, target_test, cfg, hooks);
}

ReprogramResult reprogram(ProbabilityOracle& oracle, const Dataset& target_train,
                          const Dataset& target_test, const ReprogramConfig& cfg,
                          const ReprogramHooks& hooks) {
  return run_reprogram(oracle, nullptr, InputRange{}, target_train, target_test, cfg, hooks);
}

}  // namespace reprog
