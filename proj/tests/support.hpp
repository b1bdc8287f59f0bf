#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "reprog/model.hpp"
#include "reprog/synthetic.hpp"
#include "reprog/tensor.hpp"

namespace testing {

using reprog::FrozenModel;
using reprog::LayerSpec;
using reprog::Tensor;

inline Tensor random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// dims = {d_in, h_1, ..., K}; relu between dense layers, softmax at the end.
inline FrozenModel random_model(std::mt19937_64& rng, const std::vector<std::size_t>& dims,
                                double scale = 0.8) {
  std::vector<LayerSpec> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (l > 0) layers.push_back(LayerSpec::relu(dims[l]));
    layers.push_back(LayerSpec::dense(dims[l], dims[l + 1], random_vector(rng, dims[l] * dims[l + 1], -scale, scale),
                                      random_vector(rng, dims[l + 1], -0.3, 0.3)));
  }
  layers.push_back(LayerSpec::softmax(dims.back()));
  return FrozenModel(layers);
}

// Central differences of a scalar function at x.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ||a - b|| / max(||a||, ||b||, floor). The floor keeps vanishing gradients
// from turning finite-difference noise into a large ratio.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm2(d) / std::max({norm2(a), norm2(b), floor});
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (norm2(a) * norm2(b));
}

// Source classifier of the bundled task, trained once per process.
inline const FrozenModel& bundled_source() {
  static const FrozenModel model = reprog::synthetic::train_source_model(0, 2000);
  return model;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("reprog-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
