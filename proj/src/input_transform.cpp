#include "reprog/input_transform.hpp"

#include <cmath>
#include <sstream>

#include "reprog/errors.hpp"

namespace reprog {

const char* to_string(PlacementLayout::Mode mode) {
  switch (mode) {
    case PlacementLayout::Mode::center: return "center";
    case PlacementLayout::Mode::offset: return "offset";
    case PlacementLayout::Mode::replicate: return "replicate";
  }
  return "unknown";
}

std::string PlacementLayout::describe() const {
  std::ostringstream os;
  os << to_string(mode);
  if (mode == Mode::offset) os << '(' << offset << ')';
  if (mode == Mode::replicate) os << '(' << replicates << ')';
  os << " d_T=" << target_dim << " d_S=" << source_dim;
  return os.str();
}

PlacementMask build_placement_mask(const PlacementLayout& layout) {
  const std::size_t d_t = layout.target_dim;
  const std::size_t d_s = layout.source_dim;
  if (d_t == 0 || d_s == 0) throw ShapeError("placement dimensions must be positive");
  if (d_t > d_s) {
    throw AssumptionError("target dimension " + std::to_string(d_t) +
                          " exceeds source dimension " + std::to_string(d_s) +
                          " (reprogramming requires d_T <= d_S)");
  }
  std::size_t start = 0;
  switch (layout.mode) {
    case PlacementLayout::Mode::center:
      start = (d_s - d_t) / 2;
      break;
    case PlacementLayout::Mode::offset:
      if (layout.offset + d_t > d_s) {
        throw ConfigError("offset " + std::to_string(layout.offset) + " + d_T " +
                          std::to_string(d_t) + " exceeds d_S " + std::to_string(d_s));
      }
      start = layout.offset;
      break;
    case PlacementLayout::Mode::replicate:
      if (layout.replicates == 0) throw ConfigError("replicate count must be >= 1");
      if (layout.replicates * d_t > d_s) {
        throw ConfigError("capacity exceeded: " + std::to_string(layout.replicates) +
                          " replicates x d_T " + std::to_string(d_t) + " > d_S " +
                          std::to_string(d_s));
      }
      break;
  }
  PlacementMask pm;
  pm.mask.assign(d_s, 1);
  for (std::size_t c = 0; c < layout.copies(); ++c) {
    for (std::size_t i = 0; i < d_t; ++i) {
      const std::size_t idx = start + c * d_t + i;
      pm.occupied.push_back(idx);
      pm.mask[idx] = 0;
    }
  }
  return pm;
}

InputTransform::InputTransform(PlacementLayout layout, bool overlay)
    : layout_(layout), overlay_(overlay) {
  PlacementMask pm = build_placement_mask(layout_);
  occupied_ = std::move(pm.occupied);
  mask_ = overlay_ ? std::vector<std::uint8_t>(layout_.source_dim, 1) : std::move(pm.mask);
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i]) trainable_.push_back(i);
  }
  weights_.assign(layout_.source_dim, 0.0);
}

void InputTransform::set_weights(std::vector<double> w) {
  if (w.size() != layout_.source_dim) {
    throw ShapeError("transform weights: expected " + std::to_string(layout_.source_dim) +
                     " values, got " + std::to_string(w.size()));
  }
  weights_ = std::move(w);
}

std::vector<double> InputTransform::theta() const {
  std::vector<double> th(weights_.size(), 0.0);
  for (std::size_t i : trainable_) th[i] = std::tanh(weights_[i]);
  return th;
}

std::vector<double> InputTransform::trainable_values() const {
  std::vector<double> v;
  v.reserve(trainable_.size());
  for (std::size_t i : trainable_) v.push_back(weights_[i]);
  return v;
}

void InputTransform::set_trainable_values(const std::vector<double>& values) {
  if (values.size() != trainable_.size()) {
    throw ShapeError("trainable values: expected " + std::to_string(trainable_.size()) +
                     ", got " + std::to_string(values.size()));
  }
  for (std::size_t k = 0; k < trainable_.size(); ++k) weights_[trainable_[k]] = values[k];
}

Tensor apply_transform(const InputTransform& t, const Tensor& x, std::optional<InputRange> enforce) {
  const std::size_t d_t = t.layout().target_dim;
  const std::size_t d_s = t.layout().source_dim;
  require_cols(x, d_t, "apply_transform input");
  if (enforce) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < d_t; ++c) {
        if (!enforce->contains(x(r, c))) {
          throw DataError("target value " + std::to_string(x(r, c)) + " at sample " +
                          std::to_string(r) + ", dim " + std::to_string(c) + " outside [" +
                          std::to_string(enforce->lo) + ", " + std::to_string(enforce->hi) + "]");
        }
      }
    }
  }
  const std::vector<double> theta = t.theta();
  const auto& occ = t.occupied();
  Tensor out = Tensor::matrix(x.rows(), d_s);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto dst = out.row(r);
    auto src = x.row(r);
    for (std::size_t k = 0; k < occ.size(); ++k) dst[occ[k]] = src[k % d_t];
    for (std::size_t i : t.trainable_indices()) dst[i] += theta[i];
  }
  return out;
}

Tensor transform_grad(const InputTransform& t, const Tensor& grad_xtilde) {
  const std::size_t d_s = t.layout().source_dim;
  require_cols(grad_xtilde, d_s, "transform_grad");
  Tensor g = Tensor::vector(std::vector<double>(d_s, 0.0));
  for (std::size_t i : t.trainable_indices()) {
    double sum = 0.0;
    for (std::size_t r = 0; r < grad_xtilde.rows(); ++r) sum += grad_xtilde(r, i);
    const double th = std::tanh(t.weights()[i]);
    g[i] = sum * (1.0 - th * th);
  }
  return g;
}

}  // namespace reprog
