#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reprog/dataset.hpp"
#include "reprog/errors.hpp"
#include "reprog/input_transform.hpp"
#include "reprog/loss.hpp"
#include "reprog/model.hpp"
#include "reprog/oracle.hpp"
#include "reprog/output_map.hpp"

namespace reprog {

enum class Mode { white_box, black_box };

const char* to_string(Mode mode);

struct ZerothOrderConfig {
  std::size_t q = 20;
  double mu = 0.01;
};

struct LayoutConfig {
  PlacementLayout::Mode mode = PlacementLayout::Mode::center;
  std::size_t offset = 0;
  std::size_t replicates = 1;
  bool overlay = false;

  PlacementLayout resolve(std::size_t target_dim, std::size_t source_dim) const;
};

struct OutputMapConfig {
  enum class Kind { label_mapping, linear_head };
  enum class Strategy { greedy, random };

  Kind kind = Kind::label_mapping;
  Strategy strategy = Strategy::greedy;
  std::size_t labels_per_target = 1;
  HeadInput head_input = HeadInput::probabilities;
};

struct ReprogramConfig {
  int epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;       // W
  double head_learning_rate = 0.01;  // omega
  double momentum = 0.9;
  std::uint64_t seed = 0;
  Mode mode = Mode::white_box;
  ZerothOrderConfig zo;
  LayoutConfig layout;
  OutputMapConfig output;
  LossKind loss = LossKind::cross_entropy;
  bool enforce_range = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // full training-set loss after the epoch
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t queries = 0;       // cumulative samples sent to the source model
  std::size_t oracle_calls = 0;  // cumulative zeroth-order oracle calls (black box)
  std::optional<double> alignment;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainTrace {
  EpochRecord baseline;             // before any update (epoch 0)
  std::vector<EpochRecord> epochs;  // one per training epoch
  std::vector<double> seconds;      // wall-clock at the end of each epoch
  std::size_t steps = 0;
};

// Trainable state owned by the training loop.
struct ReprogramState {
  InputTransform transform;
  OutputMap output;
  std::vector<double> w_velocity;
  std::vector<double> head_velocity;

  ReprogramState(InputTransform t, OutputMap o);
};

struct ReprogramResult {
  InputTransform transform;
  OutputMap output;
  TrainTrace trace;

  std::size_t trainable_parameters() const {
    return transform.trainable_count() + output.trainable_count();
  }
};

struct DivergenceError : NumericError {
  DivergenceError(const std::string& what, TrainTrace trace, std::string dump)
      : NumericError(what), trace(std::move(trace)), dump(std::move(dump)) {}
  TrainTrace trace;
  std::string dump;  // last good parameters, JSON
};

// Target scores y_hat for each row of x: averaged label probabilities for a
// label mapping, softmax of the head output for a linear head.
Tensor predict_target(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                      const Tensor& x);
Tensor predict_target(ProbabilityOracle& oracle, const InputTransform& t, const OutputMap& out,
                      const Tensor& x);

double composite_loss(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                      const Tensor& x, const std::vector<int>& labels, LossKind loss);

struct CompositeGradient {
  double loss = 0.0;
  Tensor input;               // d loss / d x_tilde, n x d_S
  std::vector<double> w;      // d loss / d W, length d_S (zero off-mask)
  std::vector<double> head;   // d loss / d omega (weights then bias); empty for label mappings
};

// Exact gradient of the mean loss through output map, frozen model and transform.
CompositeGradient composite_gradient(const FrozenModel& model, const InputTransform& t,
                                     const OutputMap& out, const Tensor& x,
                                     const std::vector<int>& labels, LossKind loss);

// One SGD-with-momentum step on (W, omega). Returns the batch loss before the step.
double first_order_step(const FrozenModel& model, ReprogramState& state, const Tensor& x,
                        const std::vector<int>& labels, const ReprogramConfig& cfg);

struct ZerothOrderStep {
  double loss = 0.0;
  std::size_t oracle_calls = 0;
};

// W moves along a zeroth-order estimate; omega (if present) along its exact
// gradient computed from the unperturbed query.
ZerothOrderStep zeroth_order_step(ProbabilityOracle& oracle, ReprogramState& state, const Tensor& x,
                                  const std::vector<int>& labels, const ReprogramConfig& cfg,
                                  std::uint64_t step_seed);

struct ReprogramHooks {
  // Evaluated on the baseline and after every epoch; stored as EpochRecord::alignment.
  std::function<double(const InputTransform&, const OutputMap&)> alignment;
};

// Builds the transform and output map, then trains them. White-box mode uses
// exact gradients; black-box mode only queries probabilities.
ReprogramResult reprogram(const FrozenModel& model, const Dataset& target_train,
                          const Dataset& target_test, const ReprogramConfig& cfg,
                          const ReprogramHooks& hooks = {});

// Black-box only: the source model is reachable solely through `oracle`.
ReprogramResult reprogram(ProbabilityOracle& oracle, const Dataset& target_train,
                          const Dataset& target_test, const ReprogramConfig& cfg,
                          const ReprogramHooks& hooks = {});

double evaluate_accuracy(ProbabilityOracle& oracle, const InputTransform& t, const OutputMap& out,
                         const Dataset& data);

}  // namespace reprog
