#include "reprog/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace reprog::synthetic {

namespace {

std::vector<double> grating(std::size_t cls) {
  // Orientation sweeps half a turn; spatial frequency alternates.
  const double angle = std::numbers::pi * static_cast<double>(cls) / kSourceClasses;
  const double freq = cls % 2 == 0 ? 0.8 : 1.6;
  const double phase = 0.3 * static_cast<double>(cls);
  std::vector<double> p(kSourceSide * kSourceSide);
  for (std::size_t i = 0; i < kSourceSide; ++i) {
    for (std::size_t j = 0; j < kSourceSide; ++j) {
      const double s = static_cast<double>(i) * std::sin(angle) + static_cast<double>(j) * std::cos(angle);
      p[i * kSourceSide + j] = std::sin(freq * s + phase);
    }
  }
  return p;
}

// Diagonal (class 0) vs anti-diagonal (class 1) stripes, two pixels wide.
std::vector<double> stripes(std::size_t cls) {
  std::vector<double> p(kTargetSide * kTargetSide);
  for (std::size_t i = 0; i < kTargetSide; ++i) {
    for (std::size_t j = 0; j < kTargetSide; ++j) {
      const std::size_t k = cls == 0 ? i + j : i + (kTargetSide - 1) - j;
      p[i * kTargetSide + j] = (k / 2) % 2 == 0 ? kTargetContrast : -kTargetContrast;
    }
  }
  return p;
}

Dataset sample(const std::vector<std::vector<double>>& prototypes, std::size_t n,
               std::uint64_t seed, double noise) {
  const std::size_t d = prototypes.front().size();
  const std::size_t k = prototypes.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  std::normal_distribution<double> eps(0.0, noise);
  Dataset ds;
  ds.samples = Tensor::matrix(n, d);
  ds.num_classes = k;
  for (std::size_t c = 0; c < k; ++c) ds.label_names.push_back(std::to_string(c));
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t cls = r % k;
    const double a = amp(rng);
    auto row = ds.samples.row(r);
    for (std::size_t i = 0; i < d; ++i) row[i] = std::clamp(a * prototypes[cls][i] + eps(rng), -1.0, 1.0);
    ds.labels.push_back(static_cast<int>(cls));
  }
  return ds;
}

}  // namespace

Dataset source_dataset(std::size_t n, std::uint64_t seed, double noise) {
  std::vector<std::vector<double>> protos;
  for (std::size_t c = 0; c < kSourceClasses; ++c) protos.push_back(grating(c));
  return sample(protos, n, seed, noise);
}

Dataset target_dataset(std::size_t n, std::uint64_t seed, double noise) {
  std::vector<std::vector<double>> protos;
  for (std::size_t c = 0; c < kTargetClasses; ++c) protos.push_back(stripes(c));
  return sample(protos, n, seed, noise);
}

std::vector<LayerSpec> source_architecture(std::size_t hidden) {
  const std::size_t d = kSourceSide * kSourceSide;
  return {LayerSpec::flatten(d), LayerSpec::dense(d, hidden), LayerSpec::relu(hidden),
          LayerSpec::dense(hidden, kSourceClasses), LayerSpec::softmax(kSourceClasses)};
}

SourceTrainConfig source_train_config(std::uint64_t seed) {
  SourceTrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.02;
  cfg.momentum = 0.9;
  cfg.seed = seed;
  return cfg;
}

FrozenModel train_source_model(std::uint64_t seed, std::size_t n_train) {
  return train_source(source_dataset(n_train, seed), source_architecture(), source_train_config(seed));
}

}  // namespace reprog::synthetic
