#pragma once

#include <vector>

#include "reprog/tensor.hpp"

namespace reprog {

enum class LossKind { cross_entropy, mse };

const char* to_string(LossKind kind);

inline constexpr double kLogFloor = 1e-12;

// Mean cross-entropy after renormalising each row of `pred` to sum to one;
// the true-class probability is floored at 1e-12 inside the log.
double task_loss(const Tensor& pred, const std::vector<int>& labels);
Tensor task_loss_grad(const Tensor& pred, const std::vector<int>& labels);

// Mean over all entries of (pred - onehot)^2, on raw scores.
double mse_loss(const Tensor& pred, const std::vector<int>& labels);
Tensor mse_loss_grad(const Tensor& pred, const std::vector<int>& labels);

double loss_value(LossKind kind, const Tensor& pred, const std::vector<int>& labels);
Tensor loss_grad(LossKind kind, const Tensor& pred, const std::vector<int>& labels);

Tensor one_hot(const std::vector<int>& labels, std::size_t classes);

}  // namespace reprog
