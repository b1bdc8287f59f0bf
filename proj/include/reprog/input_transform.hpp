#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reprog/model.hpp"
#include "reprog/tensor.hpp"

namespace reprog {

// Where the target sample lands inside the source input vector.
struct PlacementLayout {
  enum class Mode { center, offset, replicate };

  std::size_t target_dim = 0;
  std::size_t source_dim = 0;
  Mode mode = Mode::center;
  std::size_t offset = 0;      // Mode::offset
  std::size_t replicates = 1;  // Mode::replicate, packed contiguously from index 0

  static PlacementLayout center(std::size_t d_t, std::size_t d_s) { return {d_t, d_s, Mode::center, 0, 1}; }
  static PlacementLayout at_offset(std::size_t d_t, std::size_t d_s, std::size_t k) {
    return {d_t, d_s, Mode::offset, k, 1};
  }
  static PlacementLayout replicate(std::size_t d_t, std::size_t d_s, std::size_t r) {
    return {d_t, d_s, Mode::replicate, 0, r};
  }

  std::size_t copies() const { return mode == Mode::replicate ? replicates : 1; }
  std::string describe() const;

  friend bool operator==(const PlacementLayout&, const PlacementLayout&) = default;
};

const char* to_string(PlacementLayout::Mode mode);

struct PlacementMask {
  std::vector<std::uint8_t> mask;      // 1 = trainable padding dimension
  std::vector<std::size_t> occupied;   // copy-major: occupied[c * d_T + i] holds x_i of copy c
};

PlacementMask build_placement_mask(const PlacementLayout& layout);

// x_tilde = place(x) + tanh(M .* W). With the default disjoint mask the
// trainable dimensions are exactly the padding; overlay sets M to all ones so
// the perturbation also lands on the data dimensions.
class InputTransform {
 public:
  explicit InputTransform(PlacementLayout layout, bool overlay = false);

  const PlacementLayout& layout() const { return layout_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  const std::vector<std::size_t>& occupied() const { return occupied_; }
  bool overlay() const { return overlay_; }

  const std::vector<double>& weights() const { return weights_; }
  void set_weights(std::vector<double> w);
  std::vector<double> theta() const;

  std::size_t trainable_count() const { return trainable_.size(); }
  const std::vector<std::size_t>& trainable_indices() const { return trainable_; }
  std::vector<double> trainable_values() const;
  void set_trainable_values(const std::vector<double>& values);

 private:
  PlacementLayout layout_;
  bool overlay_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> occupied_;
  std::vector<std::size_t> trainable_;
  std::vector<double> weights_;
};

// When `enforce` is set, every target value must lie inside that range.
Tensor apply_transform(const InputTransform& t, const Tensor& x,
                       std::optional<InputRange> enforce = std::nullopt);

// Gradient with respect to W, summed over the batch.
Tensor transform_grad(const InputTransform& t, const Tensor& grad_xtilde);

}  // namespace reprog
