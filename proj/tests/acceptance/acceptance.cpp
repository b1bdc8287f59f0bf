// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reprog/blackbox.hpp"
#include "reprog/checkpoint.hpp"
#include "reprog/cli.hpp"
#include "reprog/diagnostics.hpp"
#include "reprog/output_map.hpp"
#include "reprog/report.hpp"
#include "reprog/reprogram.hpp"
#include "reprog/synthetic.hpp"
#include "reprog/zeroth_order.hpp"
#include "../support.hpp"

using namespace reprog;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Frozen-model bookkeeping shared by every run below.
struct FrozenLedger {
  int runs = 0;
  int unchanged = 0;
  void record(const std::string& before, const std::string& after) {
    ++runs;
    if (before == after) ++unchanged;
  }
};

FrozenLedger frozen;

const FrozenModel& source_model() { return testing::bundled_source(); }

ReprogramResult tracked_run(const FrozenModel& model, const Dataset& train, const Dataset& test,
                            const ReprogramConfig& cfg, const ReprogramHooks& hooks = {}) {
  const std::string before = model.param_digest();
  ReprogramResult r = reprogram(model, train, test, cfg, hooks);
  frozen.record(before, model.param_digest());
  return r;
}

// ---------------------------------------------------------------- criterion 2
Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int instances = 0, passed = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 150; ++trial) {
    std::uniform_int_distribution<std::size_t> dt(1, 5), pad(1, 5), hidden(2, 6);
    const std::size_t d_t = dt(rng), d_s = d_t + pad(rng), k_t = 2 + trial % 2, k_s = k_t + trial % 4;
    FrozenModel model = testing::random_model(rng, {d_s, hidden(rng), hidden(rng), k_s}, 1.0);
    InputTransform t(trial % 4 == 3 ? PlacementLayout::replicate(d_t, d_s + d_t, 2) : PlacementLayout::center(d_t, d_s),
                     trial % 9 == 0);
    if (trial % 4 == 3) model = testing::random_model(rng, {d_s + d_t, hidden(rng), k_s}, 1.0);
    t.set_weights(testing::random_vector(rng, t.layout().source_dim, -1.0, 1.0));
    OutputMap out;
    if (trial % 3 == 2) {
      out.variant = LinearHead::initialized(k_s, k_t, rng(), trial % 2 ? HeadInput::logits : HeadInput::probabilities);
    } else {
      out.variant = random_label_mapping(k_s, k_t, 1 + (k_s >= 2 * k_t ? trial % 2 : 0), rng());
    }
    Dataset data;
    data.samples = testing::random_matrix(rng, 5, d_t);
    data.num_classes = k_t;
    for (std::size_t i = 0; i < 5; ++i) data.labels.push_back(static_cast<int>((i + trial) % k_t));
    const LossKind loss = trial % 2 ? LossKind::mse : LossKind::cross_entropy;

    const std::string before = model.param_digest();
    CompositeGradient g = composite_gradient(model, t, out, data.samples, data.labels, loss);
    std::vector<double> analytic = g.w;
    analytic.insert(analytic.end(), g.head.begin(), g.head.end());

    std::vector<double> params = t.weights();
    if (!out.is_label_mapping()) {
      params.insert(params.end(), out.head().weight.begin(), out.head().weight.end());
      params.insert(params.end(), out.head().bias.begin(), out.head().bias.end());
    }
    auto f = [&](const std::vector<double>& p) {
      InputTransform probe_t = t;
      probe_t.set_weights(std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(t.weights().size())));
      OutputMap probe_o = out;
      if (!out.is_label_mapping()) {
        LinearHead& h = probe_o.head();
        auto it = p.begin() + static_cast<std::ptrdiff_t>(t.weights().size());
        std::copy(it, it + static_cast<std::ptrdiff_t>(h.weight.size()), h.weight.begin());
        std::copy(it + static_cast<std::ptrdiff_t>(h.weight.size()), p.end(), h.bias.begin());
      }
      return composite_loss(model, probe_t, probe_o, data.samples, data.labels, loss);
    };
    std::vector<double> fd = testing::central_difference(f, params, 1e-5);
    // Masked entries of W have exactly zero gradient on both sides.
    const double err = testing::relative_error(analytic, fd);
    worst = std::max(worst, err);
    ++instances;
    if (err < 1e-4 && model.param_digest() == before) ++passed;
  }
  const double secs = seconds_since(t0);
  return {instances >= 100 && passed == instances && secs < 60.0,
          std::to_string(passed) + "/" + std::to_string(instances) + " instances rel.err < 1e-4 (worst " + fmt(worst, 3) +
              "), " + fmt(secs, 3) + " s (limit 60 s)"};
}

// ---------------------------------------------------------------- criterion 3
Verdict zeroth_order() {
  std::mt19937_64 rng(3);
  const double eps = std::numeric_limits<double>::epsilon();
  bool linear_ok = true;
  double worst_linear = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double c = std::uniform_real_distribution<double>(-10, 10)(rng);
    const double p = std::uniform_real_distribution<double>(-1, 1)(rng);
    const double mu = std::pow(10.0, std::uniform_real_distribution<double>(-3, 0)(rng));
    auto f = [c](const std::vector<double>& v) { return c * v[0]; };
    const double g = zeroth_order_gradient(f, {p}, 1 + trial % 7, mu, rng())[0];
    // Rounding of c*(p + mu u) - c*p relative to mu.
    const double tol = 8 * eps * std::abs(c) * (1.0 + std::abs(p) / mu);
    worst_linear = std::max(worst_linear, std::abs(g - c) / tol);
    if (std::abs(g - c) > tol) linear_ok = false;
  }
  double min_cos = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 prng(100 + seed);
    std::vector<double> p = testing::random_vector(prng, 20);
    auto f = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x * x;
      return s;
    };
    std::vector<double> truth(20);
    for (std::size_t i = 0; i < 20; ++i) truth[i] = 2 * p[i];
    min_cos = std::min(min_cos, testing::cosine(zeroth_order_gradient(f, p, 1000, 1e-4, seed), truth));
  }
  return {linear_ok && min_cos >= 0.9,
          std::string("1-D linear exact to rounding in 200/200: ") + (linear_ok ? "yes" : "no") +
              " (worst " + fmt(worst_linear, 2) + " of tolerance); ||p||^2 dim 20 q=1000 mu=1e-4: min cosine " +
              fmt(min_cos) + " over 20 seeds (need >= 0.9)"};
}

// ---------------------------------------------------------------- criterion 4
Verdict label_aggregation() {
  std::mt19937_64 rng(4);
  int ok = 0, partitions = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::uniform_int_distribution<std::size_t> kt(1, 6), m(1, 4), extra(0, 4), coin(0, 1);
    const std::size_t k_t = kt(rng), per = m(rng), k_s = k_t * per + (coin(rng) ? 0 : extra(rng));
    LabelMapping map = random_label_mapping(k_s, k_t, per, rng());
    Tensor p = softmax_rows(testing::random_matrix(rng, 8, k_s, -5.0, 5.0));
    Tensor agg = aggregate_label_probs(map, p);
    bool good = true;
    for (std::size_t r = 0; r < agg.rows(); ++r) {
      double sum = 0.0;
      for (double v : agg.row(r)) {
        good = good && v >= 0.0 && v <= 1.0;
        sum += v;
      }
      if (k_s == k_t * per) good = good && std::abs(sum - 1.0 / static_cast<double>(per)) < 1e-12;
    }
    const double c = std::uniform_real_distribution<double>(1e-3, 1e3)(rng);
    Tensor scaled = p;
    for (double& v : scaled.data()) v *= c;
    good = good && argmax_rows(aggregate_label_probs(map, scaled)) == argmax_rows(agg);
    if (k_s == k_t * per) ++partitions;
    if (good) ++ok;
  }
  return {ok == 1000, std::to_string(ok) + "/1000 random mappings (" + std::to_string(partitions) +
                          " full partitions): scores in [0,1], partition sums 1/b, argmax scale-invariant"};
}

// ---------------------------------------------------------------- criterion 5
Verdict wasserstein() {
  std::mt19937_64 rng(5);
  int exact = 0, tied = 0, tied_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial) % 6, d = 1 + static_cast<std::size_t>(trial / 6) % 4;
    Tensor a = testing::random_matrix(rng, n, d, -3, 3), b = testing::random_matrix(rng, n, d, -3, 3);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<double> sums;
    do {
      std::vector<double> costs;
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k) s += (a(i, k) - b(perm[i], k)) * (a(i, k) - b(perm[i], k));
        costs.push_back(std::sqrt(s));
      }
      std::sort(costs.begin(), costs.end());
      sums.push_back(std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::sort(sums.begin(), sums.end());
    const double w = empirical_w1(a, b);
    if (sums.size() > 1 && sums[1] - sums[0] <= 1e-12) {
      ++tied;
      if (std::abs(w - sums[0]) <= 1e-12) ++tied_ok;
    } else if (w == sums[0]) {
      ++exact;
    }
  }
  int axioms = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 20, d = 1 + static_cast<std::size_t>(trial) % 6;
    Tensor a = testing::random_matrix(rng, n, d), b = testing::random_matrix(rng, n, d), c = testing::random_matrix(rng, n, d);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const double ab = empirical_w1(a, b);
    const bool ok = ab == empirical_w1(b, a) && ab > 0.0 && std::abs(empirical_w1(a, gather_rows(a, perm))) <= 1e-12 &&
                    empirical_w1(a, c) <= ab + empirical_w1(b, c) + 1e-9;
    if (ok) ++axioms;
  }
  const bool pass = exact + tied_ok == 200 && axioms == 200;
  return {pass, "brute force n<=6: " + std::to_string(exact) + " bit-exact + " + std::to_string(tied_ok) + "/" +
                    std::to_string(tied) + " tied-optimum instances within 1e-12 (of 200); metric axioms " +
                    std::to_string(axioms) + "/200 triples"};
}

// ------------------------------------------------------------ criteria 6 and 7
struct TheoremRuns {
  int holds = 0;
  int decreased = 0;
  int runs = 0;
  double secs = 0.0;
  std::string w1_pairs;
  double worst_margin = HUGE_VAL;
};

TheoremRuns theorem_runs() {
  TheoremRuns out;
  const auto t0 = Clock::now();
  const FrozenModel& model = source_model();
  const Dataset held = synthetic::source_dataset(500, 99);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset train = synthetic::target_dataset(200, 1000 + seed);
    const Dataset test = synthetic::target_dataset(200, 2000 + seed);
    ReprogramConfig cfg;
    cfg.seed = seed;
    cfg.epochs = 100;
    cfg.loss = LossKind::mse;
    AlignmentProbe probe(model, held, test, 100, 7);
    ReprogramHooks hooks;
    hooks.alignment = [&probe](const InputTransform& t, const OutputMap& o) { return probe(t, o); };
    ReprogramResult r = tracked_run(model, train, test, cfg, hooks);

    Theorem1Report rep = theorem1_report(model, r.transform, r.output.mapping(), &held, test, 100, 7);
    ++out.runs;
    if (rep.holds.value_or(false)) ++out.holds;
    out.worst_margin = std::min(out.worst_margin, *rep.bound - rep.target_risk);
    const double first = *r.trace.baseline.alignment, last = *r.trace.epochs.back().alignment;
    if (last < first) ++out.decreased;
    out.w1_pairs += (seed ? " " : "") + fmt(first, 3) + "->" + fmt(last, 3);
  }
  out.secs = seconds_since(t0);
  return out;
}

// ------------------------------------------------------------ criteria 8 and 9
struct UtilityRuns {
  double white = 0.0;
  double white_baseline = 0.0;
  double white_secs = 0.0;
  double black = 0.0;
  double black_secs = 0.0;
  int black_epochs = 0;
  bool accounting_exact = false;
  std::string accounting;
};

std::vector<std::string> serve_command(const std::filesystem::path& ckpt) {
  return {REPROG_SERVE_PATH, "--checkpoint", ckpt.string()};
}

UtilityRuns utility_runs(const std::filesystem::path& ckpt) {
  UtilityRuns out;
  const FrozenModel& model = source_model();
  const Dataset train = synthetic::target_dataset(200, 1000);
  const Dataset test = synthetic::target_dataset(200, 2000);

  ReprogramConfig white;
  white.epochs = 100;
  auto t0 = Clock::now();
  ReprogramResult w = tracked_run(model, train, test, white);
  out.white_secs = seconds_since(t0);
  out.white = w.trace.epochs.back().test_accuracy;
  out.white_baseline = w.trace.baseline.test_accuracy;

  ReprogramConfig black = white;
  black.mode = Mode::black_box;
  black.epochs = 200;
  black.zo = {20, 0.01};
  out.black_epochs = black.epochs;
  const std::string before = load_checkpoint(ckpt).param_digest();
  t0 = Clock::now();
  BlackboxEndpoint ep(serve_command(ckpt), model.input_dim(), model.num_classes());
  ReprogramResult b = reprogram(ep, train, test, black);
  out.black_secs = seconds_since(t0);
  frozen.record(before, load_checkpoint(ckpt).param_digest());
  out.black = b.trace.epochs.back().test_accuracy;

  auto served = ep.served();
  const std::size_t zo_calls = b.trace.epochs.back().oracle_calls;
  out.accounting_exact = served.samples == ep.queries() && served.requests == ep.calls() &&
                         b.trace.epochs.back().queries == ep.queries() &&
                         zo_calls == (black.zo.q + 1) * b.trace.steps;
  out.accounting = "client " + std::to_string(ep.queries()) + " samples/" + std::to_string(ep.calls()) +
                   " requests vs endpoint " + std::to_string(served.samples) + "/" + std::to_string(served.requests) +
                   "; zeroth-order calls " + std::to_string(zo_calls) + " = (q+1)*" + std::to_string(b.trace.steps);
  return out;
}

Verdict transparency(const std::filesystem::path& ckpt, const UtilityRuns& u) {
  const FrozenModel& model = source_model();
  std::mt19937_64 rng(9);
  Tensor x = testing::random_matrix(rng, 1000, model.input_dim());
  BlackboxEndpoint ep(serve_command(ckpt), model.input_dim(), model.num_classes());
  Tensor remote = ep.query(x);
  Tensor local = forward(model, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < local.size(); ++i) worst = std::max(worst, std::abs(remote[i] - local[i]));
  auto served = ep.served();
  const bool counts = served.samples == 1000 && ep.queries() == 1000 && served.requests == ep.calls();
  return {worst <= 1e-9 && counts && u.accounting_exact,
          "max |endpoint - forward| = " + fmt(worst, 3) + " on 1000 inputs (limit 1e-9); 1000-row batch counted " +
              std::to_string(ep.queries()) + "/" + std::to_string(served.samples) + "; training run: " + u.accounting};
}

// --------------------------------------------------------------- criterion 10
struct CliOutcome {
  int code;
  std::string out;
};

CliOutcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "reprog");
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return {code, out.str()};
}

Verdict reproducibility(const testing::TempDir& dir, const std::filesystem::path& ckpt) {
  std::vector<std::string> failures;
  int checks = 0;
  auto expect = [&](bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  };

  // train-source twice from the same config.
  json src = {{"dataset", {{"format", "synthetic_source"}, {"samples", 2000}, {"seed", 0}}},
              {"checkpoint", (dir / "cli_source.rpk").string()},
              {"hidden", {32}},
              {"seed", 0},
              {"epochs", 20},
              {"batch_size", 32},
              {"learning_rate", 0.02},
              {"momentum", 0.9}};
  write_text_file(dir / "source.json", src.dump(2));
  expect(cli({"train-source", "--config", (dir / "source.json").string()}).code == 0, "train-source");
  const std::string first = slurp(dir / "cli_source.rpk");
  expect(cli({"train-source", "--config", (dir / "source.json").string()}).code == 0, "train-source rerun");
  expect(slurp(dir / "cli_source.rpk") == first, "checkpoint bytes differ on rerun");
  expect(load_checkpoint(dir / "cli_source.rpk").param_digest() == source_model().param_digest(),
         "CLI-trained source differs from the library-trained one");

  auto run_and_rerun = [&](const std::string& name, json cfg) {
    const auto cfg_path = dir / (name + ".json");
    write_text_file(cfg_path, cfg.dump(2));
    const auto rep = dir / (name + "_report");
    const auto rerun = dir / (name + "_rerun");
    expect(cli({"reprogram", "--config", cfg_path.string(), "--report-dir", rep.string(), "--seed", "3"}).code == 0,
           name + " reprogram");
    json summary = json::parse(slurp(rep / "summary.json"));
    frozen.record(summary["source_digest_before"].get<std::string>(), summary["source_digest_after"].get<std::string>());
    expect(cli({"reprogram", "--config", (rep / "config.json").string(), "--report-dir", rerun.string()}).code == 0,
           name + " rerun");
    json summary2 = json::parse(slurp(rerun / "summary.json"));
    frozen.record(summary2["source_digest_before"].get<std::string>(), summary2["source_digest_after"].get<std::string>());
    for (const char* f : {"trace.jsonl", "transform.json", "output_map.json"}) {
      expect(!slurp(rep / f).empty() && slurp(rep / f) == slurp(rerun / f), name + " " + f + " differs");
    }
    for (const char* sub : {"evaluate", "diagnose"}) {
      auto a = cli({sub, "--report-dir", rep.string()});
      auto b = cli({sub, "--report-dir", rerun.string()});
      // Reports differ only in their own directory; the printed results must match.
      expect(a.code == 0 && b.code == 0 && a.out == b.out, name + " " + sub + " output differs");
    }
  };

  json white = {{"source_checkpoint", ckpt.string()},
                {"target", {{"format", "synthetic_target"}, {"samples", 200}, {"seed", 1000}}},
                {"target_test", {{"format", "synthetic_target"}, {"samples", 200}, {"seed", 2000}}},
                {"source_heldout", {{"format", "synthetic_source"}, {"samples", 500}, {"seed", 99}}},
                {"loss", "mse"},
                {"epochs", 50},
                {"diagnostics", {{"track_alignment", true}, {"n_rep", 100}, {"seed", 7}}}};
  run_and_rerun("white_box", white);

  json black = {{"source_checkpoint", ckpt.string()},
                {"target", {{"format", "synthetic_target"}, {"samples", 200}, {"seed", 1000}}},
                {"target_test", {{"format", "synthetic_target"}, {"samples", 200}, {"seed", 2000}}},
                {"mode", "black_box"},
                {"epochs", 10},
                {"zo", {{"q", 20}, {"mu", 0.01}}},
                {"endpoint", {{"command", serve_command(ckpt)}}}};
  run_and_rerun("black_box", black);

  json head = white;
  head.erase("diagnostics");
  head.erase("source_heldout");
  head["output_map"] = {{"kind", "linear_head"}};
  head["epochs"] = 20;
  head["loss"] = "cross_entropy";
  const auto head_path = dir / "head.json";
  write_text_file(head_path, head.dump(2));
  expect(cli({"reprogram", "--config", head_path.string(), "--report-dir", (dir / "head_a").string()}).code == 0,
         "head run");
  expect(cli({"reprogram", "--config", (dir / "head_a/config.json").string(), "--report-dir", (dir / "head_b").string()})
                 .code == 0,
         "head rerun");
  expect(slurp(dir / "head_a/trace.jsonl") == slurp(dir / "head_b/trace.jsonl"), "linear-head trace differs");

  std::string detail = std::to_string(checks - static_cast<int>(failures.size())) + "/" + std::to_string(checks) +
                       " checks (train-source checkpoint bytes; white-box, black-box and linear-head traces; "
                       "evaluate/diagnose output)";
  for (const auto& f : failures) detail += "; FAILED: " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const auto t_all = Clock::now();
  testing::TempDir dir("acceptance");
  const auto ckpt = dir / "source.rpk";
  save_checkpoint(source_model(), ckpt);

  std::vector<std::pair<std::string, Verdict>> results(10);
  results[1] = {"gradient fidelity", gradient_fidelity()};
  results[2] = {"zeroth-order estimator", zeroth_order()};
  results[3] = {"label aggregation invariants", label_aggregation()};
  results[4] = {"empirical W1 correctness", wasserstein()};

  TheoremRuns th = theorem_runs();
  results[5] = {"risk bound check", {th.holds >= 9 && th.secs < 300.0,
                                     std::to_string(th.holds) + "/" + std::to_string(th.runs) +
                                         " runs with target_risk <= eps_S + 2 sqrt(K) W1 (need >= 9; smallest margin " +
                                         fmt(th.worst_margin) + "), " + fmt(th.secs, 3) + " s (limit 300 s)"}};
  results[6] = {"alignment decreases", {th.decreased >= 8, std::to_string(th.decreased) + "/" +
                                                               std::to_string(th.runs) +
                                                               " runs with W1(final) < W1(epoch 0) (need >= 8): " +
                                                               th.w1_pairs}};

  UtilityRuns u = utility_runs(ckpt);
  const bool utility = u.white >= 0.85 && u.white_secs < 120.0 && u.black >= u.white - 0.10;
  results[7] = {"end-to-end utility",
                {utility, "white-box test acc " + fmt(u.white) + " (baseline " + fmt(u.white_baseline) +
                              ", need >= 0.85) in " + fmt(u.white_secs, 3) + " s; black-box " + fmt(u.black) +
                              " after " + std::to_string(u.black_epochs) + " epochs in " + fmt(u.black_secs, 3) +
                              " s (need >= " + fmt(u.white - 0.10) + ")"}};
  results[8] = {"black-box transparency", transparency(ckpt, u)};
  results[9] = {"reproducibility", reproducibility(dir, ckpt)};
  results[0] = {"frozen guarantee", {frozen.runs > 0 && frozen.unchanged == frozen.runs,
                                     std::to_string(frozen.unchanged) + "/" + std::to_string(frozen.runs) +
                                         " reprogramming runs left the source digest bit-identical"}};

  int failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [name, v] = results[i];
    if (!v.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, name.c_str(), v.detail.c_str());
  }
  std::printf("%d/10 criteria passed in %.1f s\n", 10 - failed, seconds_since(t_all));
  return failed;
}
