#include "reprog/loss.hpp"

#include <cmath>

#include "reprog/errors.hpp"

namespace reprog {

namespace {

void check_labels(const Tensor& pred, const std::vector<int>& labels) {
  if (pred.rows() != labels.size()) {
    throw ShapeError("loss: " + std::to_string(pred.rows()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= pred.cols()) {
      throw DataError("loss: label " + std::to_string(y) + " outside [0, " +
                      std::to_string(pred.cols()) + ")");
    }
  }
}

double row_sum(std::span<const double> row) {
  double s = 0.0;
  for (double v : row) s += v;
  if (!(s > 0.0)) throw NumericError("loss: prediction row does not have a positive sum");
  return s;
}

}  // namespace

const char* to_string(LossKind kind) {
  return kind == LossKind::cross_entropy ? "cross_entropy" : "mse";
}

double task_loss(const Tensor& pred, const std::vector<int>& labels) {
  check_labels(pred, labels);
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    auto row = pred.row(r);
    const double p = row[static_cast<std::size_t>(labels[r])] / row_sum(row);
    total -= std::log(std::max(p, kLogFloor));
  }
  return total / static_cast<double>(pred.rows());
}

Tensor task_loss_grad(const Tensor& pred, const std::vector<int>& labels) {
  check_labels(pred, labels);
  const double n = static_cast<double>(pred.rows());
  Tensor g = Tensor::matrix(pred.rows(), pred.cols());
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    auto row = pred.row(r);
    const double s = row_sum(row);
    const auto y = static_cast<std::size_t>(labels[r]);
    // L = -log(p_y / s); below the floor the loss is constant.
    if (row[y] / s < kLogFloor) continue;
    for (std::size_t k = 0; k < row.size(); ++k) g(r, k) = 1.0 / (s * n);
    g(r, y) -= 1.0 / (row[y] * n);
  }
  return g;
}

double mse_loss(const Tensor& pred, const std::vector<int>& labels) {
  check_labels(pred, labels);
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    auto row = pred.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double d = row[k] - (static_cast<int>(k) == labels[r] ? 1.0 : 0.0);
      total += d * d;
    }
  }
  return total / static_cast<double>(pred.size());
}

Tensor mse_loss_grad(const Tensor& pred, const std::vector<int>& labels) {
  check_labels(pred, labels);
  Tensor g = Tensor::matrix(pred.rows(), pred.cols());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t k = 0; k < pred.cols(); ++k) {
      g(r, k) = scale * (pred(r, k) - (static_cast<int>(k) == labels[r] ? 1.0 : 0.0));
    }
  }
  return g;
}

double loss_value(LossKind kind, const Tensor& pred, const std::vector<int>& labels) {
  return kind == LossKind::cross_entropy ? task_loss(pred, labels) : mse_loss(pred, labels);
}

Tensor loss_grad(LossKind kind, const Tensor& pred, const std::vector<int>& labels) {
  return kind == LossKind::cross_entropy ? task_loss_grad(pred, labels) : mse_loss_grad(pred, labels);
}

Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
  Tensor y = Tensor::matrix(labels.size(), classes);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw DataError("one_hot: label " + std::to_string(labels[r]) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
    y(r, static_cast<std::size_t>(labels[r])) = 1.0;
  }
  return y;
}

}  // namespace reprog
