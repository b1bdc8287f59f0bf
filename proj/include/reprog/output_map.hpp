#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "reprog/dataset.hpp"
#include "reprog/input_transform.hpp"
#include "reprog/oracle.hpp"
#include "reprog/tensor.hpp"

namespace reprog {

// Many-to-one source -> target label assignment. blocks[t] lists the source
// labels whose probabilities are averaged into target label t.
struct LabelMapping {
  std::size_t source_classes = 0;
  std::vector<std::vector<int>> blocks;

  std::size_t target_classes() const { return blocks.size(); }
  bool one_to_one() const;
  // Non-empty, pairwise disjoint blocks over [0, source_classes); K_T <= K_S.
  void validate() const;

  friend bool operator==(const LabelMapping&, const LabelMapping&) = default;
};

Tensor aggregate_label_probs(const LabelMapping& map, const Tensor& src_probs);
// Gradient of a loss w.r.t. src_probs given its gradient w.r.t. the aggregated scores.
Tensor aggregate_label_backward(const LabelMapping& map, const Tensor& grad_target);

LabelMapping random_label_mapping(std::size_t source_classes, std::size_t target_classes,
                                  std::size_t labels_per_target, std::uint64_t seed);

// counts[t][s]: how often source label s is the argmax for target class t.
using FrequencyCounts = std::vector<std::vector<std::size_t>>;

FrequencyCounts argmax_frequency_counts(ProbabilityOracle& oracle, const InputTransform& t,
                                        const Dataset& target_train);

// Repeatedly takes the highest-count (target, source) pair whose source label
// is still free and whose target block is not yet full. Ties go to the lower
// source label, then the lower target label.
LabelMapping greedy_assign(const FrequencyCounts& counts, std::size_t labels_per_target);

// Counts are taken with W = 0 (pure placement), whatever `t` currently holds.
LabelMapping greedy_frequency_mapping(ProbabilityOracle& oracle, const InputTransform& t,
                                      const Dataset& target_train, std::size_t labels_per_target);
LabelMapping greedy_frequency_mapping(const FrozenModel& model, const InputTransform& t,
                                      const Dataset& target_train, std::size_t labels_per_target);

enum class HeadInput { probabilities, logits };

// Affine map from the K_S source outputs to K_T target scores.
struct LinearHead {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weight;  // out_dim x in_dim, row-major
  std::vector<double> bias;
  HeadInput input = HeadInput::probabilities;

  static LinearHead initialized(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
                                HeadInput input = HeadInput::probabilities);
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
  void validate() const;

  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

Tensor linear_head_forward(const LinearHead& head, const Tensor& src_out);

struct LinearHeadGrad {
  std::vector<double> weight;
  std::vector<double> bias;
  Tensor input;  // gradient w.r.t. src_out
};

LinearHeadGrad linear_head_backward(const LinearHead& head, const Tensor& src_out,
                                    const Tensor& grad_out);

struct OutputMap {
  std::variant<LabelMapping, LinearHead> variant;

  bool is_label_mapping() const { return std::holds_alternative<LabelMapping>(variant); }
  const LabelMapping& mapping() const { return std::get<LabelMapping>(variant); }
  const LinearHead& head() const { return std::get<LinearHead>(variant); }
  LinearHead& head() { return std::get<LinearHead>(variant); }
  std::size_t target_classes() const;
  std::size_t trainable_count() const;

  friend bool operator==(const OutputMap&, const OutputMap&) = default;
};

}  // namespace reprog
