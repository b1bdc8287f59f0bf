#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reprog/dataset.hpp"
#include "reprog/input_transform.hpp"
#include "reprog/loss.hpp"
#include "reprog/model.hpp"
#include "reprog/output_map.hpp"
#include "reprog/reprogram.hpp"

namespace reprog {

// Mean over rows of ||pred - y||_2 with y one-hot.
double rms_risk(const Tensor& pred, const Tensor& one_hot_labels);
double rms_risk(const FrozenModel& model, const Dataset& data);
double rms_risk(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                const Dataset& data);

inline constexpr std::size_t kMaxExactW1Samples = 512;

// Exact Wasserstein-1 distance between the uniform empirical measures on the
// rows of a and b (equal counts), as a minimum-cost perfect matching under the
// Euclidean ground cost. Matched costs are summed in ascending order, so the
// value depends only on the multiset of matched distances.
double empirical_w1(const Tensor& a, const Tensor& b);

// Optimal row -> column assignment for a square cost matrix (Hungarian method).
std::vector<std::size_t> min_cost_assignment(const Tensor& cost);

// Indices of n rows drawn without replacement by a seeded shuffle.
std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t n, std::uint64_t seed);

struct Theorem1Report {
  double target_risk = 0.0;
  std::optional<double> source_risk;  // absent without source held-out data
  std::optional<double> w1;           // finite-sample estimate of the alignment term
  std::size_t classes = 0;            // K under the one-to-one mapping
  std::size_t samples = 0;            // representation samples per side
  std::optional<double> bound;        // source_risk + 2 sqrt(K) w1
  std::optional<bool> holds;          // target_risk <= bound (empirical check only)

  std::optional<double> alignment_term() const;
};

// Refuses (AssumptionError) unless every target label owns exactly one
// source label. Representations are the source logits; the source side is
// restricted to held-out samples whose label is one of the mapped labels.
Theorem1Report theorem1_report(const FrozenModel& model, const InputTransform& t,
                               const LabelMapping& mapping, const Dataset* source_heldout,
                               const Dataset& target_test, std::size_t n_rep,
                               std::uint64_t seed = 0);

std::string format_theorem1_table(const Theorem1Report& report);

// Empirical W1 between source-logit samples of held-out source data and of
// transformed target data; usable as a per-epoch training hook.
class AlignmentProbe {
 public:
  AlignmentProbe(const FrozenModel& model, Dataset source_heldout, Dataset target,
                 std::size_t n_rep, std::uint64_t seed = 0);

  double operator()(const InputTransform& t, const OutputMap& out) const;

 private:
  const FrozenModel& model_;
  Dataset source_;
  Dataset target_;
  std::size_t n_rep_;
  std::uint64_t seed_;
};

// || mean_i d loss_i / d x_tilde_i ||_1 over the batch. Needs exact
// gradients, so black-box mode is rejected.
double input_gradient_l1(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                         const Dataset& batch, LossKind loss, Mode mode = Mode::white_box);

}  // namespace reprog
