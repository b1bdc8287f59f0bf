#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "reprog/dataset.hpp"
#include "reprog/model.hpp"

namespace reprog::synthetic {

// Bundled cross-domain task. The source domain is 10 classes of 8x8 oriented
// gratings; the target domain is a low-contrast 2-class 4x4 task (diagonal vs
// anti-diagonal stripes). Both live in [-1, 1]. Class prototypes are fixed;
// the seed only drives amplitude and noise. Zero-padded target samples sit
// near chance on the frozen source model, so accuracy has to come from
// training the transform.
inline constexpr std::size_t kSourceSide = 8;
inline constexpr std::size_t kSourceClasses = 10;
inline constexpr std::size_t kTargetSide = 4;
inline constexpr std::size_t kTargetClasses = 2;
inline constexpr double kTargetContrast = 0.3;

Dataset source_dataset(std::size_t n, std::uint64_t seed, double noise = 0.35);
Dataset target_dataset(std::size_t n, std::uint64_t seed, double noise = 0.1);

// 64 -> hidden (relu) -> 10 -> softmax.
std::vector<LayerSpec> source_architecture(std::size_t hidden = 32);
SourceTrainConfig source_train_config(std::uint64_t seed = 0);

// Deterministic source model trained on source_dataset(n_train, seed).
FrozenModel train_source_model(std::uint64_t seed = 0, std::size_t n_train = 2000);

}  // namespace reprog::synthetic
