#include "reprog/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "reprog/errors.hpp"

namespace reprog {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> data;
  const std::size_t cols = rows.begin()->size();
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("ragged rows in Tensor::from_rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? shape_[0] : data_.size() / shape_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? " x " : "") << shape_[i];
  os << ']';
  return os.str();
}

void require_cols(const Tensor& t, std::size_t expected, const char* what) {
  if (t.rank() != 2 || t.cols() != expected) {
    throw ShapeError(std::string(what) + ": expected [n x " + std::to_string(expected) +
                     "], got " + t.shape_string());
  }
}

void require_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rank() != 2 || t.rows() != rows || t.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected [" + std::to_string(rows) + " x " +
                     std::to_string(cols) + "], got " + t.shape_string());
  }
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  const std::size_t d = t.cols();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  for (std::size_t r : rows) {
    auto src = t.row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return Tensor({rows.size(), d}, std::move(out));
}

}  // namespace reprog
