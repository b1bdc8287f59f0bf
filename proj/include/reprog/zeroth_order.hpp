#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace reprog {

using ScalarOracle = std::function<double(const std::vector<double>&)>;

// Unit direction i of a seeded family. Depends only on (seed, index, dim), so
// probes may be evaluated in any order.
std::vector<double> sphere_direction(std::uint64_t seed, std::size_t index, std::size_t dim);

// Forward-difference sphere estimator
//   g = dim / (q * mu) * sum_i [f(p + mu u_i) - f(p)] u_i
// using exactly q + 1 calls of f (f(p) first).
std::vector<double> zeroth_order_gradient(const ScalarOracle& loss_fn, const std::vector<double>& p,
                                          std::size_t q, double mu, std::uint64_t seed);

// Same estimator with f(p) already known; uses exactly q calls of f.
std::vector<double> zeroth_order_gradient(const ScalarOracle& loss_fn, const std::vector<double>& p,
                                          double f_p, std::size_t q, double mu, std::uint64_t seed);

}  // namespace reprog
