#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "reprog/dataset.hpp"

namespace reprog {

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

// One IDX file: either an image block (samples filled, labels empty) or a
// label block (labels filled). Image bytes are mapped affinely onto [-1, 1].
struct IdxFragment {
  std::vector<std::size_t> dims;
  Tensor samples;
  std::vector<int> labels;
  Normalization normalization;
  bool is_labels() const { return samples.empty(); }
};

IdxFragment parse_idx(std::span<const std::uint8_t> bytes);

// Joins an image fragment with its label fragment.
Dataset idx_dataset(const IdxFragment& images, const IdxFragment& labels);

// Lines of "label,v1,...,vd". Each series is z-normalised, then clamped to
// [-1, 1]; labels are remapped to [0, K) in ascending numeric order.
Dataset parse_ucr_csv(std::string_view text);

// Applies the label remapping of `reference` (by original label spelling) to
// `other`, so that train and test splits agree on class indices.
void align_labels(const Dataset& reference, Dataset& other);

}  // namespace reprog
