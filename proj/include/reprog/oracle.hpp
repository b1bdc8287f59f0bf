#pragma once

#include <cstddef>

#include "reprog/model.hpp"
#include "reprog/tensor.hpp"

namespace reprog {

// Query-only access to a source classifier: probabilities in, nothing else
// out. Counts every sample and every call it serves.
class ProbabilityOracle {
 public:
  virtual ~ProbabilityOracle() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;

  // An empty tensor is a zero-row batch and yields an empty result.
  Tensor query(const Tensor& batch);

  std::size_t queries() const { return queries_; }
  std::size_t calls() const { return calls_; }

 protected:
  virtual Tensor do_query(const Tensor& batch) = 0;

 private:
  std::size_t queries_ = 0;
  std::size_t calls_ = 0;
};

// Wraps an in-process model as if it were a black box.
class LocalOracle final : public ProbabilityOracle {
 public:
  explicit LocalOracle(const FrozenModel& model) : model_(model) {}

  std::size_t input_dim() const override { return model_.input_dim(); }
  std::size_t num_classes() const override { return model_.num_classes(); }

 protected:
  Tensor do_query(const Tensor& batch) override { return forward(model_, batch); }

 private:
  const FrozenModel& model_;
};

}  // namespace reprog
