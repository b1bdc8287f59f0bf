#include "reprog/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "reprog/errors.hpp"

namespace reprog {

double rms_risk(const Tensor& pred, const Tensor& one_hot_labels) {
  if (pred.rank() != 2 || one_hot_labels.rank() != 2 || pred.rows() != one_hot_labels.rows() ||
      pred.cols() != one_hot_labels.cols()) {
    throw ShapeError("rms_risk: prediction " + pred.shape_string() + " vs labels " +
                     one_hot_labels.shape_string());
  }
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t k = 0; k < pred.cols(); ++k) {
      const double d = pred(r, k) - one_hot_labels(r, k);
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(pred.rows());
}

double rms_risk(const FrozenModel& model, const Dataset& data) {
  return rms_risk(forward(model, data.samples), one_hot(data.labels, model.num_classes()));
}

double rms_risk(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                const Dataset& data) {
  return rms_risk(predict_target(model, t, out, data.samples),
                  one_hot(data.labels, out.target_classes()));
}

std::vector<std::size_t> min_cost_assignment(const Tensor& cost) {
  const std::size_t n = cost.rows();
  if (cost.rank() != 2 || cost.cols() != n) throw ShapeError("assignment needs a square cost matrix");
  // Shortest augmenting paths with row/column potentials; 1-based internally.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double empirical_w1(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("empirical_w1 expects sample matrices");
  if (a.rows() != b.rows()) {
    throw ShapeError("empirical_w1 needs equal sample counts, got " + std::to_string(a.rows()) +
                     " and " + std::to_string(b.rows()));
  }
  if (a.cols() != b.cols()) {
    throw ShapeError("empirical_w1 dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  }
  const std::size_t n = a.rows();
  if (n > kMaxExactW1Samples) {
    throw ConfigError("empirical_w1: " + std::to_string(n) + " samples exceed the exact-assignment cap of " +
                      std::to_string(kMaxExactW1Samples) + "; subsample both sides first");
  }
  // Solve with the lexicographically smaller sample as rows so that swapping
  // the arguments yields the same assignment problem and the same value.
  const bool swap = b.data() < a.data();
  const Tensor& rows = swap ? b : a;
  const Tensor& cols = swap ? a : b;
  Tensor cost = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto ai = rows.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      auto bj = cols.row(j);
      double sq = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) {
        const double d = ai[k] - bj[k];
        sq += d * d;
      }
      cost(i, j) = std::sqrt(sq);
    }
  }
  const auto assignment = min_cost_assignment(cost);
  std::vector<double> matched(n);
  for (std::size_t i = 0; i < n; ++i) matched[i] = cost(i, assignment[i]);
  std::sort(matched.begin(), matched.end());
  double total = 0.0;
  for (double c : matched) total += c;
  return total / static_cast<double>(n);
}

std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(n, population));
  return idx;
}

std::optional<double> Theorem1Report::alignment_term() const {
  if (!w1) return std::nullopt;
  return 2.0 * std::sqrt(static_cast<double>(classes)) * *w1;
}

namespace {

std::vector<std::size_t> rows_with_labels(const Dataset& data, const std::set<int>& labels) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (labels.count(data.labels[i])) rows.push_back(i);
  }
  return rows;
}

std::set<int> mapped_labels(const OutputMap& out, std::size_t source_classes) {
  std::set<int> s;
  if (out.is_label_mapping()) {
    for (const auto& b : out.mapping().blocks) s.insert(b.begin(), b.end());
  } else {
    for (std::size_t k = 0; k < source_classes; ++k) s.insert(static_cast<int>(k));
  }
  return s;
}

// Logit samples of both sides, n rows each.
std::pair<Tensor, Tensor> representation_samples(const FrozenModel& model, const InputTransform& t,
                                                 const OutputMap& out, const Dataset& source,
                                                 const Dataset& target, std::size_t n_rep,
                                                 std::uint64_t seed) {
  const auto source_rows = rows_with_labels(source, mapped_labels(out, model.num_classes()));
  const std::size_t n = std::min({n_rep, source_rows.size(), target.size()});
  if (n < 2) throw DataError("representation samples need at least 2 rows per side");
  std::vector<std::size_t> src_pick;
  for (std::size_t i : subsample_indices(source_rows.size(), n, seed)) src_pick.push_back(source_rows[i]);
  const auto tgt_pick = subsample_indices(target.size(), n, seed);
  Tensor zs = logits(model, gather_rows(source.samples, src_pick));
  Tensor zt = logits(model, apply_transform(t, gather_rows(target.samples, tgt_pick)));
  return {std::move(zs), std::move(zt)};
}

}  // namespace

Theorem1Report theorem1_report(const FrozenModel& model, const InputTransform& t,
                               const LabelMapping& mapping, const Dataset* source_heldout,
                               const Dataset& target_test, std::size_t n_rep, std::uint64_t seed) {
  mapping.validate();
  for (std::size_t k = 0; k < mapping.blocks.size(); ++k) {
    if (mapping.blocks[k].size() != 1) {
      throw AssumptionError("the risk bound assumes a one-to-one label mapping; target label " +
                            std::to_string(k) + " maps to " +
                            std::to_string(mapping.blocks[k].size()) + " source labels");
    }
  }
  if (target_test.num_classes != mapping.target_classes()) {
    throw AssumptionError("target data has " + std::to_string(target_test.num_classes) +
                          " classes but the mapping covers " +
                          std::to_string(mapping.target_classes()));
  }
  const OutputMap out{mapping};
  Theorem1Report rep;
  rep.classes = mapping.target_classes();
  rep.target_risk = rms_risk(model, t, out, target_test);
  if (source_heldout != nullptr && source_heldout->size() > 0) {
    rep.source_risk = rms_risk(model, *source_heldout);
    auto [zs, zt] = representation_samples(model, t, out, *source_heldout, target_test, n_rep, seed);
    rep.samples = zs.rows();
    rep.w1 = empirical_w1(zt, zs);
    rep.bound = *rep.source_risk + *rep.alignment_term();
    rep.holds = rep.target_risk <= *rep.bound;
  }
  return rep;
}

std::string format_theorem1_table(const Theorem1Report& r) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << *v;
    return os.str();
  };
  const std::vector<std::string> header = {"target_risk", "eps_S", "W1_hat", "2sqrtK*W1", "bound", "holds"};
  const std::vector<std::string> row = {cell(r.target_risk), cell(r.source_risk), cell(r.w1),
                                        cell(r.alignment_term()), cell(r.bound),
                                        r.holds ? (*r.holds ? "true" : "false") : "n/a"};
  std::ostringstream os;
  for (int line = 0; line < 2; ++line) {
    const auto& cells = line == 0 ? header : row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::size_t w = std::max(header[c].size(), row[c].size());
      os << (c ? " | " : "") << std::setw(static_cast<int>(w)) << cells[c];
    }
    os << '\n';
  }
  os << "K=" << r.classes << " samples/side=" << r.samples
     << " (W1_hat is a finite-sample estimate; 'holds' is an empirical check)\n";
  return os.str();
}

AlignmentProbe::AlignmentProbe(const FrozenModel& model, Dataset source_heldout, Dataset target,
                               std::size_t n_rep, std::uint64_t seed)
    : model_(model),
      source_(std::move(source_heldout)),
      target_(std::move(target)),
      n_rep_(n_rep),
      seed_(seed) {}

double AlignmentProbe::operator()(const InputTransform& t, const OutputMap& out) const {
  auto [zs, zt] = representation_samples(model_, t, out, source_, target_, n_rep_, seed_);
  return empirical_w1(zt, zs);
}

double input_gradient_l1(const FrozenModel& model, const InputTransform& t, const OutputMap& out,
                         const Dataset& batch, LossKind loss, Mode mode) {
  if (mode == Mode::black_box) {
    throw UnsupportedModeError("input-gradient diagnostic needs white-box gradients");
  }
  const CompositeGradient g = composite_gradient(model, t, out, batch.samples, batch.labels, loss);
  // g.input holds d(mean loss)/d x_tilde_i = (1/n) d loss_i / d x_tilde_i.
  std::vector<double> mean(g.input.cols(), 0.0);
  for (std::size_t r = 0; r < g.input.rows(); ++r) {
    auto row = g.input.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) mean[k] += row[k];
  }
  double l1 = 0.0;
  for (double v : mean) l1 += std::abs(v);
  return l1;
}

}  // namespace reprog
