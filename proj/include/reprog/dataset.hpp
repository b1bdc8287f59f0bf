#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reprog/tensor.hpp"

namespace reprog {

// How raw values were mapped into the model input range. Affine records one
// (scale, shift) pair per feature; per-series z-normalization keeps each row's
// mean/std plus the pre-clamp value of every clamped entry so the map stays
// invertible.
struct Normalization {
  enum class Kind { identity, affine, per_series_z };

  struct Clamped {
    std::size_t row;
    std::size_t col;
    double z;
  };

  Kind kind = Kind::identity;
  std::vector<double> scale;  // affine: normalized = raw * scale + shift
  std::vector<double> shift;
  std::vector<double> series_mean;  // per_series_z
  std::vector<double> series_std;
  std::vector<Clamped> clamped;
  double clamp_bound = 1.0;

  Tensor normalize(const Tensor& raw) const;
  Tensor denormalize(const Tensor& normalized) const;
};

struct Dataset {
  Tensor samples;           // n x d
  std::vector<int> labels;  // n entries in [0, num_classes)
  std::size_t num_classes = 0;
  Normalization normalization;
  std::vector<std::string> label_names;  // original label spelling, indexed by class

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return samples.cols(); }

  // Checks n == label count and that every label is in range.
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

}  // namespace reprog
