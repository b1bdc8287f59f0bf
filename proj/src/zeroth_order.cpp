#include "reprog/zeroth_order.hpp"

#include <cmath>
#include <random>

#include "reprog/errors.hpp"

namespace reprog {

std::vector<double> sphere_direction(std::uint64_t seed, std::size_t index, std::size_t dim) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> u(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : u) {
      v = normal(rng);
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& v : u) v /= norm;
  return u;
}

std::vector<double> zeroth_order_gradient(const ScalarOracle& loss_fn, const std::vector<double>& p,
                                          std::size_t q, double mu, std::uint64_t seed) {
  const double f_p = loss_fn(p);
  if (!std::isfinite(f_p)) throw NumericError("zeroth-order oracle returned a non-finite value");
  return zeroth_order_gradient(loss_fn, p, f_p, q, mu, seed);
}

std::vector<double> zeroth_order_gradient(const ScalarOracle& loss_fn, const std::vector<double>& p,
                                          double f_p, std::size_t q, double mu, std::uint64_t seed) {
  if (q < 1) throw ConfigError("zeroth-order estimator needs q >= 1");
  if (!(mu > 0.0)) throw ConfigError("zeroth-order estimator needs mu > 0");
  const std::size_t dim = p.size();
  std::vector<double> g(dim, 0.0);
  if (dim == 0) return g;
  std::vector<double> probe(dim);
  for (std::size_t i = 0; i < q; ++i) {
    const std::vector<double> u = sphere_direction(seed, i, dim);
    for (std::size_t k = 0; k < dim; ++k) probe[k] = p[k] + mu * u[k];
    const double f = loss_fn(probe);
    if (!std::isfinite(f)) throw NumericError("zeroth-order oracle returned a non-finite value");
    const double diff = f - f_p;
    for (std::size_t k = 0; k < dim; ++k) g[k] += diff * u[k];
  }
  const double scale = static_cast<double>(dim) / (static_cast<double>(q) * mu);
  for (double& v : g) v *= scale;
  return g;
}

}  // namespace reprog
