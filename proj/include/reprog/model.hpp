#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reprog/dataset.hpp"
#include "reprog/tensor.hpp"

namespace reprog {

enum class LayerKind : std::uint32_t { dense = 0, relu = 1, softmax = 2, flatten = 3 };

const char* to_string(LayerKind kind);

// Element-wise layers carry in_dim == out_dim == width and no parameters.
// Dense weights are stored row-major as (out_dim x in_dim).
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static LayerSpec dense(std::size_t in_dim, std::size_t out_dim, std::vector<double> weight = {},
                         std::vector<double> bias = {});
  static LayerSpec relu(std::size_t width) { return {LayerKind::relu, width, width, {}, {}}; }
  static LayerSpec softmax(std::size_t width) { return {LayerKind::softmax, width, width, {}, {}}; }
  static LayerSpec flatten(std::size_t width) { return {LayerKind::flatten, width, width, {}, {}}; }

  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InputRange {
  double lo = -1.0;
  double hi = 1.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const InputRange&, const InputRange&) = default;
};

// Which output of the network a gradient is taken against.
enum class OutputHead { probabilities, logits };

// A pre-trained classifier whose parameters cannot change after construction.
// The layer stack must end in softmax; logits are the input to that layer.
class FrozenModel {
 public:
  explicit FrozenModel(std::vector<LayerSpec> layers, InputRange range = {});

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t input_dim() const { return layers_.front().in_dim; }
  std::size_t num_classes() const { return layers_.back().out_dim; }
  InputRange input_range() const { return range_; }
  std::size_t parameter_count() const;

  // SHA-256 over the canonical manifest and parameter bytes, lowercase hex.
  std::string param_digest() const;

  friend bool operator==(const FrozenModel&, const FrozenModel&) = default;

 private:
  std::vector<LayerSpec> layers_;
  InputRange range_;
};

Tensor forward(const FrozenModel& model, const Tensor& batch);
Tensor logits(const FrozenModel& model, const Tensor& batch);

// Row-wise vector-Jacobian product: d<grad_out, head(x)>/dx for each row.
Tensor backward_to_input(const FrozenModel& model, const Tensor& batch, const Tensor& grad_out,
                         OutputHead head = OutputHead::probabilities);

Tensor softmax_rows(const Tensor& z);
std::vector<int> argmax_rows(const Tensor& t);

struct SourceTrainConfig {
  int epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SourceTrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

// Dense layers in `arch` with empty weights are initialised uniformly in
// +-sqrt(6 / (in + out)) with zero bias; supplied weights are kept.
FrozenModel train_source(const Dataset& data, std::vector<LayerSpec> arch,
                         const SourceTrainConfig& cfg, SourceTrainStats* stats = nullptr);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

}  // namespace reprog
