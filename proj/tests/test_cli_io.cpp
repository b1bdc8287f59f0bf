#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "reprog/blackbox.hpp"
#include "reprog/checkpoint.hpp"
#include "reprog/cli.hpp"
#include "reprog/errors.hpp"
#include "reprog/ingest.hpp"
#include "reprog/report.hpp"
#include "reprog/run_config.hpp"
#include "reprog/synthetic.hpp"
#include "support.hpp"

using namespace reprog;
using nlohmann::json;
using testing::random_matrix;
using testing::TempDir;

namespace {

std::vector<std::uint8_t> idx_bytes(std::uint32_t magic, const std::vector<std::uint32_t>& dims,
                                    const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> b;
  auto be = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
  };
  be(magic);
  for (auto d : dims) be(d);
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "reprog");
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_json(const std::filesystem::path& p, const json& j) { write_text_file(p, j.dump(2)); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json minimal_run(const std::filesystem::path& ckpt) {
  return json{{"source_checkpoint", ckpt.string()},
              {"target", {{"format", "synthetic_target"}, {"samples", 100}, {"seed", 1}}},
              {"target_test", {{"format", "synthetic_target"}, {"samples", 60}, {"seed", 2}}}};
}

// Shared source checkpoint for the CLI tests.
const std::filesystem::path& bundled_checkpoint() {
  static TempDir dir("cli-ckpt");
  static const std::filesystem::path path = [] {
    std::filesystem::path p = dir / "source.rpk";
    save_checkpoint(testing::bundled_source(), p);
    return p;
  }();
  return path;
}

std::vector<std::string> serve_command(const std::filesystem::path& ckpt, const std::string& fault = "none",
                                       std::size_t after = 0) {
  return {REPROG_SERVE_PATH, "--checkpoint", ckpt.string(), "--fault", fault, "--fault-after", std::to_string(after)};
}

}  // namespace

TEST_CASE("parse_idx: images and labels") {
  auto images = parse_idx(idx_bytes(0x803, {2, 2, 2}, {0, 255, 51, 204, 1, 2, 3, 4}));
  CHECK(!images.is_labels());
  CHECK(images.samples.rows() == 2);
  CHECK(images.samples.cols() == 4);
  CHECK(images.samples(0, 0) == -1.0);
  CHECK(images.samples(0, 1) == 1.0);
  CHECK(std::abs(images.samples(0, 2) - (51 / 127.5 - 1)) < 1e-15);

  auto labels = parse_idx(idx_bytes(0x801, {2}, {7, 3}));
  CHECK(labels.is_labels());
  Dataset d = idx_dataset(images, labels);
  CHECK(d.size() == 2);
  CHECK(d.dim() == 4);
  CHECK(d.num_classes == 8);
  CHECK(d.labels == std::vector<int>{7, 3});
  Tensor back = d.normalization.denormalize(d.samples);
  CHECK(back(0, 1) == 255.0);
  CHECK(back(1, 3) == 4.0);
}

TEST_CASE("parse_idx: malformed input") {
  try {
    parse_idx(idx_bytes(0x804, {2}, {1, 2}));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset == 0);
  }
  try {
    parse_idx(idx_bytes(0x803, {2, 2, 2}, {1, 2, 3}));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("missing 5") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_idx(idx_bytes(0x801, {2}, {1, 2, 3})), ParseError);
  CHECK_THROWS_AS(parse_idx(std::vector<std::uint8_t>{0, 0}), ParseError);
  CHECK_THROWS_AS(idx_dataset(parse_idx(idx_bytes(0x803, {2, 1, 1}, {0, 0})), parse_idx(idx_bytes(0x801, {3}, {0, 0, 0}))),
                  DataError);
}

TEST_CASE("parse_ucr_csv: examples") {
  Dataset d = parse_ucr_csv("1,0.5,0.3\n2,0.1,0.9");
  CHECK(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.labels == std::vector<int>{0, 1});
  CHECK(d.num_classes == 2);

  Dataset flat = parse_ucr_csv("3,2,2,2,2\n-1,1,2,3,4\n");
  for (std::size_t j = 0; j < 4; ++j) CHECK(flat.samples(0, j) == 0.0);
  CHECK(flat.labels == std::vector<int>{1, 0});  // numeric order: -1 < 3
  for (double v : flat.samples.data()) CHECK(std::abs(v) <= 1.0);

  try {
    parse_ucr_csv("1,0.5,0.3\n2,0.1\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  try {
    parse_ucr_csv("1,0.5,0.3\n2,0.1,0.2\n1,abc,0.3\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("align_labels: test split follows the training remap") {
  Dataset train = parse_ucr_csv("5,1,2\n9,2,1\n");
  Dataset test = parse_ucr_csv("9,1,2\n");
  align_labels(train, test);
  CHECK(test.labels == std::vector<int>{1});
  CHECK(test.num_classes == 2);
  Dataset unseen = parse_ucr_csv("4,1,2\n");
  CHECK_THROWS_AS(align_labels(train, unseen), DataError);
}

TEST_CASE("property: normalization round-trips") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    std::ostringstream csv;
    std::vector<std::vector<double>> raw;
    for (int r = 0; r < 6; ++r) {
      std::vector<double> row = testing::random_vector(rng, 8, -50.0, 50.0);
      if (r == 2) row.assign(8, 3.5);  // zero variance
      if (r == 3) row[0] = 1e4;        // forces clamping
      raw.push_back(row);
      csv << r % 3;
      for (double v : row) csv << ',' << format_decimal(v);
      csv << '\n';
    }
    Dataset d = parse_ucr_csv(csv.str());
    Tensor back = d.normalization.denormalize(d.samples);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(back(r, c) - raw[r][c]) <= 1e-12 * std::max(1.0, std::abs(raw[r][c])));
    }
    Tensor again = d.normalization.normalize(back);
    for (std::size_t i = 0; i < again.size(); ++i) CHECK(std::abs(again[i] - d.samples[i]) <= 1e-12);
  }
  std::vector<std::uint8_t> px(3 * 5);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng() & 0xff);
  Dataset img = idx_dataset(parse_idx(idx_bytes(0x803, {3, 1, 5}, px)), parse_idx(idx_bytes(0x801, {3}, {0, 1, 0})));
  Tensor back = img.normalization.denormalize(img.samples);
  for (std::size_t i = 0; i < px.size(); ++i) CHECK(std::abs(back[i] - px[i]) <= 1e-12);
}

TEST_CASE("run config: defaults, echo and strictness") {
  TempDir dir("cfg");
  const auto ckpt = dir / "m.rpk";
  RunConfig cfg = parse_run_config(minimal_run(ckpt), dir.path());
  CHECK(cfg.reprogram.epochs == 100);
  CHECK(cfg.reprogram.mode == Mode::white_box);
  CHECK(cfg.reprogram.loss == LossKind::cross_entropy);
  CHECK(cfg.reprogram.learning_rate == 0.05);
  CHECK(cfg.reprogram.head_learning_rate == 0.01);
  CHECK(!cfg.reprogram.layout.overlay);

  json echo = to_json(cfg);
  RunConfig again = parse_run_config(echo, "/elsewhere");
  CHECK(to_json(again) == echo);
  for (const char* key : {"mode", "seed", "epochs", "batch_size", "learning_rate", "head_learning_rate", "momentum",
                          "loss", "enforce_range", "zo", "layout", "output_map", "diagnostics"}) {
    CHECK(echo.contains(key));
  }

  json rel = minimal_run("nested/m.rpk");
  CHECK(parse_run_config(rel, dir.path()).source_checkpoint == dir / "nested/m.rpk");

  auto rejects = [&](json j, const std::string& needle) {
    try {
      parse_run_config(j, dir.path());
      FAIL("expected ConfigError for " << j.dump());
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, std::string(e.what()));
    }
  };
  json j = minimal_run(ckpt);
  j["learning_rte"] = 0.1;
  rejects(j, "learning_rte");
  j = minimal_run(ckpt);
  j["layout"] = {{"mode", "center"}, {"overlay", false}, {"extra", 1}};
  rejects(j, "layout");
  j = minimal_run(ckpt);
  j.erase("target");
  rejects(j, "target");
  j = minimal_run(ckpt);
  j["epochs"] = "ten";
  rejects(j, "epochs");
  j = minimal_run(ckpt);
  j["epochs"] = -3;
  rejects(j, "epochs");
  j = minimal_run(ckpt);
  j["mode"] = "grey_box";
  rejects(j, "grey_box");
  j = minimal_run(ckpt);
  j["zo"] = {{"q", 0}};
  rejects(j, "q");
  j = minimal_run(ckpt);
  j["target"]["format"] = "csv";
  rejects(j, "format");
  j = minimal_run(ckpt);
  j["diagnostics"] = {{"track_alignment", true}};
  rejects(j, "source_heldout");
  j = minimal_run(ckpt);
  j["endpoint"] = {{"command", json::array({"x"})}};
  rejects(j, "black_box");
  j = minimal_run(ckpt);
  j["mode"] = "black_box";
  j["output_map"] = {{"kind", "linear_head"}, {"head_input", "logits"}};
  rejects(j, "head_input");
  rejects(json::array(), "object");
}

TEST_CASE("run config: every key accepted by the parser appears in the published schema") {
  json schema = read_json_file(std::filesystem::path(REPROG_SOURCE_DIR) / "schema/run_config.schema.json");
  TempDir dir("schema");
  json j = minimal_run(dir / "m.rpk");
  j["source_heldout"] = {{"format", "synthetic_source"}, {"samples", 10}, {"seed", 1}};
  j["report_dir"] = "out";
  j["diagnostics"] = {{"track_alignment", true}};
  json echo = to_json(parse_run_config(j, dir.path()));
  json bb = minimal_run(dir / "m.rpk");
  bb["mode"] = "black_box";
  bb["endpoint"] = {{"command", json::array({"x"})}};
  json echo_bb = to_json(parse_run_config(bb, dir.path()));
  const json& props = schema.at("properties");
  CHECK(schema.at("additionalProperties") == false);
  for (const json* e : {&echo, &echo_bb}) {
    for (const auto& item : e->items()) {
      CHECK_MESSAGE(props.contains(item.key()), item.key());
      if (item.value().is_object() && props.contains(item.key()) && props[item.key()].contains("properties")) {
        for (const auto& sub : item.value().items()) CHECK(props[item.key()]["properties"].contains(sub.key()));
      }
    }
  }
  for (const auto& req : schema.at("required")) CHECK(echo.contains(req.get<std::string>()));
}

TEST_CASE("source config: parse and echo") {
  TempDir dir("srccfg");
  json j = {{"dataset", {{"format", "synthetic_source"}, {"samples", 50}, {"seed", 3}}}, {"checkpoint", "a.rpk"}};
  SourceRunConfig cfg = parse_source_config(j, dir.path());
  CHECK(cfg.checkpoint == dir / "a.rpk");
  CHECK(cfg.hidden == std::vector<std::size_t>{32});
  CHECK(to_json(parse_source_config(to_json(cfg), "/")) == to_json(cfg));
  j["hidden"] = json::array({0});
  CHECK_THROWS_AS(parse_source_config(j, dir.path()), ConfigError);
  j["hidden"] = json::array({4});
  j["epochs"] = 0;
  CHECK_THROWS_AS(parse_source_config(j, dir.path()), ConfigError);
}

TEST_CASE("blackbox endpoint: agrees with in-process forward") {
  const auto& ckpt = bundled_checkpoint();
  const FrozenModel& model = testing::bundled_source();
  BlackboxEndpoint ep(serve_command(ckpt), 64, 10);
  std::mt19937_64 rng(72);
  Tensor x = random_matrix(rng, 300, 64);
  Tensor remote = ep.query(x);
  Tensor local = forward(model, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < local.size(); ++i) worst = std::max(worst, std::abs(remote[i] - local[i]));
  CHECK(worst <= 1e-9);
  CHECK(ep.queries() == 300);
  CHECK(ep.calls() == 1);

  CHECK(ep.query(Tensor()).empty());
  CHECK(ep.queries() == 300);
  auto served = ep.served();
  CHECK(served.samples == 300);
  CHECK(served.requests == 1);
  CHECK_THROWS_AS(ep.query(Tensor::matrix(1, 3)), ShapeError);
}

TEST_CASE("blackbox endpoint: protocol faults") {
  const auto& ckpt = bundled_checkpoint();
  Tensor x = Tensor::matrix(5, 64, 0.1);
  SUBCASE("malformed line") {
    BlackboxEndpoint ep(serve_command(ckpt, "malformed", 2), 64, 10);
    try {
      ep.query(x);
      FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("probabilities not summing to one") {
    BlackboxEndpoint ep(serve_command(ckpt, "bad_sum", 0), 64, 10);
    try {
      ep.query(x);
      FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
  }
  SUBCASE("crash mid-batch") {
    BlackboxEndpoint ep(serve_command(ckpt, "crash", 7), 64, 10);
    CHECK(ep.query(x).rows() == 5);
    try {
      ep.query(x);
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.rows_received == 2);
    }
  }
  SUBCASE("missing executable") {
    bool failed = false;
    try {
      BlackboxEndpoint ep({"/nonexistent/reprog-serve"}, 64, 10);
      ep.query(x);
    } catch (const TransportError&) {
      failed = true;
    }
    CHECK(failed);
  }
}

TEST_CASE("serve_model: request and count framing") {
  FrozenModel m({LayerSpec::dense(2, 2, {1, 0, 0, 1}, {0, 0}), LayerSpec::softmax(2)});
  std::istringstream in("Q 1 2\n0 0\nQ 0 2\nC\n");
  std::ostringstream out;
  CHECK(serve_model(m, in, out) == 0);
  CHECK(out.str() == "0.5 0.5\n1 2\n");
  std::istringstream bad("Q 1 3\n0 0 0\n");
  std::ostringstream sink;
  CHECK(serve_model(m, bad, sink) != 0);
}

TEST_CASE("format_decimal round-trips") {
  std::mt19937_64 rng(73);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng), static_cast<int>(i % 40) - 20);
    CHECK(std::stod(format_decimal(v)) == v);
  }
}

TEST_CASE("report records round-trip") {
  InputTransform t(PlacementLayout::replicate(3, 10, 2));
  t.set_weights(testing::random_vector(*std::make_unique<std::mt19937_64>(74), 10));
  InputTransform back = transform_from_json(transform_json(t));
  CHECK(back.weights() == t.weights());
  CHECK(back.layout() == t.layout());
  CHECK(back.mask() == t.mask());

  OutputMap map{LabelMapping{10, {{3, 1}, {7, 0}}}};
  CHECK(output_map_from_json(output_map_json(map)) == map);
  json pairs = output_map_json(map)["pairs"];
  CHECK(pairs == json::parse("[[0,[3,1]],[1,[7,0]]]"));
  OutputMap head{LinearHead::initialized(10, 2, 5, HeadInput::logits)};
  CHECK(output_map_from_json(output_map_json(head)) == head);
  CHECK_THROWS_AS(output_map_from_json(json{{"kind", "magic"}}), DataError);
}

TEST_CASE("cli: exit codes for flag and config errors") {
  TempDir dir("cli-errors");
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({"reprogram"}).code == kExitConfig);
  CHECK(cli({"reprogram", "--config", (dir / "missing.json").string()}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);

  json j = minimal_run(bundled_checkpoint());
  j.erase("source_checkpoint");
  write_json(dir / "run.json", j);
  CliResult r = cli({"reprogram", "--config", (dir / "run.json").string(), "--report-dir", (dir / "rep").string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("source_checkpoint") != std::string::npos);

  write_json(dir / "run.json", minimal_run(bundled_checkpoint()));
  CHECK(cli({"reprogram", "--config", (dir / "run.json").string(), "--bogus", "1"}).code == kExitConfig);
  CHECK(cli({"reprogram", "--config", (dir / "run.json").string(), "--mode", "grey"}).code == kExitConfig);
  // No report directory anywhere.
  CHECK(cli({"reprogram", "--config", (dir / "run.json").string()}).code == kExitConfig);

  write_json(dir / "broken.json", minimal_run(dir / "absent.rpk"));
  CHECK(cli({"reprogram", "--config", (dir / "broken.json").string(), "--report-dir", (dir / "rep").string()}).code ==
        kExitRuntime);
  write_text_file(dir / "syntax.json", "{\"epochs\": ");
  CHECK(cli({"reprogram", "--config", (dir / "syntax.json").string()}).code == kExitConfig);
}

TEST_CASE("cli: train-source, reprogram, evaluate, diagnose") {
  TempDir dir("cli-e2e");
  json src = {{"dataset", {{"format", "synthetic_source"}, {"samples", 300}, {"seed", 0}}},
              {"checkpoint", (dir / "src.rpk").string()},
              {"hidden", {16}},
              {"epochs", 5}};
  write_json(dir / "src.json", src);
  CliResult t = cli({"train-source", "--config", (dir / "src.json").string()});
  REQUIRE(t.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "src.rpk"));
  const std::string digest = load_checkpoint(dir / "src.rpk").param_digest();
  CHECK(t.out.find(digest) != std::string::npos);
  const auto first_bytes = slurp(dir / "src.rpk");
  REQUIRE(cli({"train-source", "--config", (dir / "src.json").string()}).code == kExitOk);
  CHECK(slurp(dir / "src.rpk") == first_bytes);

  json run = minimal_run(dir / "src.rpk");
  run["epochs"] = 3;
  run["source_heldout"] = {{"format", "synthetic_source"}, {"samples", 80}, {"seed", 9}};
  run["diagnostics"] = {{"track_alignment", true}, {"n_rep", 20}};
  write_json(dir / "run.json", run);
  CliResult r = cli({"reprogram", "--config", (dir / "run.json").string(), "--report-dir", (dir / "rep").string(),
                     "--seed", "4"});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  for (const char* f : {"config.json", "transform.json", "output_map.json", "trace.jsonl", "timing.jsonl",
                        "summary.json"}) {
    CHECK(std::filesystem::exists(dir / "rep" / f));
  }
  json echoed = read_json_file(dir / "rep/config.json");
  CHECK(echoed["seed"] == 4);
  CHECK(echoed["report_dir"] == (dir / "rep").string());
  json summary = read_json_file(dir / "rep/summary.json");
  CHECK(summary["source_digest_before"] == digest);
  CHECK(summary["source_digest_after"] == digest);
  CHECK(summary["trainable_parameters"] == 48);
  CHECK(load_checkpoint(dir / "src.rpk").param_digest() == digest);

  std::istringstream trace(slurp(dir / "rep/trace.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) {
    json rec = json::parse(line);
    CHECK(rec["epoch"] == lines);
    CHECK(rec["alignment"].is_number());
    ++lines;
  }
  CHECK(lines == 4);

  // Re-running from the echoed config reproduces the trace byte for byte.
  const std::string trace_bytes = slurp(dir / "rep/trace.jsonl");
  REQUIRE(cli({"reprogram", "--config", (dir / "rep/config.json").string(), "--report-dir", (dir / "rep2").string()})
              .code == kExitOk);
  CHECK(slurp(dir / "rep2/trace.jsonl") == trace_bytes);

  CliResult e = cli({"evaluate", "--report-dir", (dir / "rep").string()});
  REQUIRE(e.code == kExitOk);
  json last = json::parse(trace_bytes.substr(trace_bytes.rfind('\n', trace_bytes.size() - 2) + 1));
  std::ostringstream acc;
  acc << std::setprecision(6) << last["test_accuracy"].get<double>();
  CHECK(e.out.find("test_accuracy " + acc.str()) != std::string::npos);

  CliResult d = cli({"diagnose", "--report-dir", (dir / "rep").string()});
  REQUIRE_MESSAGE(d.code == kExitOk, d.err);
  CHECK(d.out.find("eps_S") != std::string::npos);
  CHECK(d.out.find("input_gradient_l1") != std::string::npos);
  json th = read_json_file(dir / "rep/theorem1.json");
  CHECK(th["w1"].is_number());
  CHECK(th["bound"].get<double>() >= th["source_risk"].get<double>());

  // Many-to-one mapping: diagnose refuses with exit 2.
  json many = run;
  many["output_map"] = {{"labels_per_target", 2}};
  many["diagnostics"] = {{"track_alignment", false}};
  many["epochs"] = 1;
  write_json(dir / "many.json", many);
  REQUIRE(cli({"reprogram", "--config", (dir / "many.json").string(), "--report-dir", (dir / "many").string()}).code ==
          kExitOk);
  CliResult refused = cli({"diagnose", "--report-dir", (dir / "many").string()});
  CHECK(refused.code == kExitConfig);
  CHECK(refused.err.find("one-to-one") != std::string::npos);
}

TEST_CASE("cli: black-box run through the endpoint has exact query accounting") {
  TempDir dir("cli-bb");
  json run = minimal_run(bundled_checkpoint());
  run["mode"] = "black_box";
  run["epochs"] = 2;
  run["zo"] = {{"q", 3}, {"mu", 0.01}};
  run["endpoint"] = {{"command", serve_command(bundled_checkpoint())}};
  write_json(dir / "bb.json", run);
  CliResult r = cli({"reprogram", "--config", (dir / "bb.json").string(), "--report-dir", (dir / "rep").string()});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  json s = read_json_file(dir / "rep/summary.json");
  CHECK(s["endpoint_samples"] == s["queries"]);
  CHECK(s["endpoint_requests"] == s["requests"]);
  CHECK(s["queries"].get<std::size_t>() > 0);

  CliResult e = cli({"evaluate", "--report-dir", (dir / "rep").string()});
  CHECK(e.code == kExitOk);
  CHECK(e.out.find("queries 60") != std::string::npos);

  run["endpoint"] = {{"command", serve_command(bundled_checkpoint(), "crash", 50)}};
  write_json(dir / "crash.json", run);
  CHECK(cli({"reprogram", "--config", (dir / "crash.json").string(), "--report-dir", (dir / "crash").string()}).code ==
        kExitRuntime);
}
