#include "reprog/output_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "reprog/errors.hpp"

namespace reprog {

Tensor ProbabilityOracle::query(const Tensor& batch) {
  if (batch.empty()) return {};
  require_cols(batch, input_dim(), "oracle query");
  Tensor out = do_query(batch);
  ++calls_;
  queries_ += batch.rows();
  return out;
}

bool LabelMapping::one_to_one() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const auto& b) { return b.size() == 1; });
}

void LabelMapping::validate() const {
  if (blocks.empty()) throw ConfigError("label mapping has no target classes");
  if (blocks.size() > source_classes) {
    throw AssumptionError("target classes " + std::to_string(blocks.size()) +
                          " exceed source classes " + std::to_string(source_classes) +
                          " (reprogramming requires K_T <= K_S)");
  }
  std::vector<int> owner(source_classes, -1);
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    if (blocks[t].empty()) {
      throw ConfigError("label mapping: target " + std::to_string(t) + " has no source labels");
    }
    for (int s : blocks[t]) {
      if (s < 0 || static_cast<std::size_t>(s) >= source_classes) {
        throw ConfigError("label mapping references source label " + std::to_string(s) +
                          " outside [0, " + std::to_string(source_classes) + ")");
      }
      if (owner[s] != -1) {
        throw ConfigError("label mapping reuses source label " + std::to_string(s) +
                          " for targets " + std::to_string(owner[s]) + " and " + std::to_string(t));
      }
      owner[s] = static_cast<int>(t);
    }
  }
}

Tensor aggregate_label_probs(const LabelMapping& map, const Tensor& src_probs) {
  map.validate();
  require_cols(src_probs, map.source_classes, "aggregate_label_probs");
  const std::size_t k_t = map.target_classes();
  Tensor out = Tensor::matrix(src_probs.rows(), k_t);
  for (std::size_t r = 0; r < src_probs.rows(); ++r) {
    auto p = src_probs.row(r);
    for (std::size_t t = 0; t < k_t; ++t) {
      double sum = 0.0;
      for (int s : map.blocks[t]) sum += p[static_cast<std::size_t>(s)];
      out(r, t) = sum / static_cast<double>(map.blocks[t].size());
    }
  }
  return out;
}

Tensor aggregate_label_backward(const LabelMapping& map, const Tensor& grad_target) {
  require_cols(grad_target, map.target_classes(), "aggregate_label_backward");
  Tensor g = Tensor::matrix(grad_target.rows(), map.source_classes);
  for (std::size_t r = 0; r < grad_target.rows(); ++r) {
    for (std::size_t t = 0; t < map.target_classes(); ++t) {
      const double share = grad_target(r, t) / static_cast<double>(map.blocks[t].size());
      for (int s : map.blocks[t]) g(r, static_cast<std::size_t>(s)) = share;
    }
  }
  return g;
}

LabelMapping random_label_mapping(std::size_t source_classes, std::size_t target_classes,
                                  std::size_t labels_per_target, std::uint64_t seed) {
  if (labels_per_target == 0) throw ConfigError("labels_per_target must be >= 1");
  if (labels_per_target * target_classes > source_classes) {
    throw ConfigError("label mapping capacity exceeded: " + std::to_string(labels_per_target) +
                      " x " + std::to_string(target_classes) + " > " +
                      std::to_string(source_classes) + " source labels");
  }
  std::vector<int> pool(source_classes);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  LabelMapping map{source_classes, {}};
  for (std::size_t t = 0; t < target_classes; ++t) {
    std::vector<int> block(pool.begin() + t * labels_per_target,
                           pool.begin() + (t + 1) * labels_per_target);
    std::sort(block.begin(), block.end());
    map.blocks.push_back(std::move(block));
  }
  map.validate();
  return map;
}

FrequencyCounts argmax_frequency_counts(ProbabilityOracle& oracle, const InputTransform& t,
                                        const Dataset& target_train) {
  InputTransform probe(t.layout(), t.overlay());
  const std::vector<int> top = argmax_rows(oracle.query(apply_transform(probe, target_train.samples)));
  FrequencyCounts counts(target_train.num_classes, std::vector<std::size_t>(oracle.num_classes(), 0));
  for (std::size_t i = 0; i < top.size(); ++i) {
    ++counts[static_cast<std::size_t>(target_train.labels[i])][static_cast<std::size_t>(top[i])];
  }
  return counts;
}

LabelMapping greedy_assign(const FrequencyCounts& counts, std::size_t labels_per_target) {
  const std::size_t k_t = counts.size();
  if (k_t == 0) throw ConfigError("greedy mapping needs at least one target class");
  const std::size_t k_s = counts.front().size();
  if (labels_per_target == 0) throw ConfigError("labels_per_target must be >= 1");
  if (labels_per_target * k_t > k_s) {
    throw ConfigError("label mapping capacity exceeded: " + std::to_string(labels_per_target) +
                      " x " + std::to_string(k_t) + " > " + std::to_string(k_s) +
                      " source labels");
  }
  LabelMapping map{k_s, std::vector<std::vector<int>>(k_t)};
  std::vector<bool> taken(k_s, false);
  for (std::size_t round = 0; round < labels_per_target * k_t; ++round) {
    std::size_t best_t = 0, best_s = 0;
    bool found = false;
    // Source-major scan with strict '>' keeps the first (lowest source, then
    // lowest target) pair among equal counts.
    for (std::size_t s = 0; s < k_s; ++s) {
      if (taken[s]) continue;
      for (std::size_t t = 0; t < k_t; ++t) {
        if (map.blocks[t].size() >= labels_per_target) continue;
        if (!found || counts[t][s] > counts[best_t][best_s]) {
          best_t = t;
          best_s = s;
          found = true;
        }
      }
    }
    taken[best_s] = true;
    map.blocks[best_t].push_back(static_cast<int>(best_s));
  }
  return map;
}

LabelMapping greedy_frequency_mapping(ProbabilityOracle& oracle, const InputTransform& t,
                                      const Dataset& target_train, std::size_t labels_per_target) {
  if (labels_per_target * target_train.num_classes > oracle.num_classes()) {
    throw ConfigError("label mapping capacity exceeded: " + std::to_string(labels_per_target) +
                      " x " + std::to_string(target_train.num_classes) + " > " +
                      std::to_string(oracle.num_classes()) + " source labels");
  }
  std::vector<std::size_t> per_class(target_train.num_classes, 0);
  for (int y : target_train.labels) ++per_class[static_cast<std::size_t>(y)];
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c] == 0) {
      throw DataError("greedy mapping: target class " + std::to_string(c) + " has no samples");
    }
  }
  return greedy_assign(argmax_frequency_counts(oracle, t, target_train), labels_per_target);
}

LabelMapping greedy_frequency_mapping(const FrozenModel& model, const InputTransform& t,
                                      const Dataset& target_train, std::size_t labels_per_target) {
  LocalOracle oracle(model);
  return greedy_frequency_mapping(oracle, t, target_train, labels_per_target);
}

LinearHead LinearHead::initialized(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
                                   HeadInput input) {
  LinearHead h{in_dim, out_dim, {}, {}, input};
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-limit, limit);
  h.weight.resize(in_dim * out_dim);
  for (double& w : h.weight) w = init(rng);
  h.bias.assign(out_dim, 0.0);
  return h;
}

void LinearHead::validate() const {
  if (in_dim == 0 || out_dim == 0) throw ShapeError("linear head dimensions must be positive");
  if (weight.size() != in_dim * out_dim || bias.size() != out_dim) {
    throw ShapeError("linear head parameters do not match " + std::to_string(out_dim) + " x " +
                     std::to_string(in_dim));
  }
  for (double v : weight) {
    if (!std::isfinite(v)) throw NumericError("non-finite linear head weight");
  }
  for (double v : bias) {
    if (!std::isfinite(v)) throw NumericError("non-finite linear head bias");
  }
}

Tensor linear_head_forward(const LinearHead& head, const Tensor& src_out) {
  require_cols(src_out, head.in_dim, "linear_head_forward");
  Tensor y = Tensor::matrix(src_out.rows(), head.out_dim);
  for (std::size_t r = 0; r < src_out.rows(); ++r) {
    auto x = src_out.row(r);
    for (std::size_t o = 0; o < head.out_dim; ++o) {
      const double* w = head.weight.data() + o * head.in_dim;
      double acc = head.bias[o];
      for (std::size_t k = 0; k < head.in_dim; ++k) acc += w[k] * x[k];
      y(r, o) = acc;
    }
  }
  return y;
}

LinearHeadGrad linear_head_backward(const LinearHead& head, const Tensor& src_out,
                                    const Tensor& grad_out) {
  require_cols(src_out, head.in_dim, "linear_head_backward input");
  require_shape(grad_out, src_out.rows(), head.out_dim, "linear_head_backward grad");
  LinearHeadGrad g;
  g.weight.assign(head.weight.size(), 0.0);
  g.bias.assign(head.out_dim, 0.0);
  g.input = Tensor::matrix(src_out.rows(), head.in_dim);
  for (std::size_t r = 0; r < src_out.rows(); ++r) {
    auto x = src_out.row(r);
    auto gi = g.input.row(r);
    for (std::size_t o = 0; o < head.out_dim; ++o) {
      const double go = grad_out(r, o);
      const double* w = head.weight.data() + o * head.in_dim;
      double* gw = g.weight.data() + o * head.in_dim;
      for (std::size_t k = 0; k < head.in_dim; ++k) {
        gw[k] += go * x[k];
        gi[k] += go * w[k];
      }
      g.bias[o] += go;
    }
  }
  return g;
}

std::size_t OutputMap::target_classes() const {
  return is_label_mapping() ? mapping().target_classes() : head().out_dim;
}

std::size_t OutputMap::trainable_count() const {
  return is_label_mapping() ? 0 : head().parameter_count();
}

}  // namespace reprog
