#include "reprog/report.hpp"

#include <fstream>

#include "reprog/errors.hpp"

namespace reprog {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

PlacementLayout::Mode layout_mode_from(const std::string& s) {
  if (s == "center") return PlacementLayout::Mode::center;
  if (s == "offset") return PlacementLayout::Mode::offset;
  if (s == "replicate") return PlacementLayout::Mode::replicate;
  throw DataError("unknown layout mode '" + s + "'");
}

void optional_json(json& j, const char* key, const std::optional<double>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

}  // namespace

json transform_json(const InputTransform& t) {
  const PlacementLayout& l = t.layout();
  json j;
  j["layout"] = {{"target_dim", l.target_dim}, {"source_dim", l.source_dim}, {"mode", to_string(l.mode)},
                 {"offset", l.offset}, {"replicates", l.replicates}};
  j["overlay"] = t.overlay();
  j["mask"] = t.mask();
  j["occupied"] = t.occupied();
  j["W"] = t.weights();
  return j;
}

InputTransform transform_from_json(const json& j) {
  try {
    const json& l = j.at("layout");
    PlacementLayout layout{l.at("target_dim").get<std::size_t>(), l.at("source_dim").get<std::size_t>(),
                           layout_mode_from(l.at("mode").get<std::string>()),
                           l.at("offset").get<std::size_t>(), l.at("replicates").get<std::size_t>()};
    InputTransform t(layout, j.at("overlay").get<bool>());
    t.set_weights(j.at("W").get<std::vector<double>>());
    if (j.at("mask").get<std::vector<std::uint8_t>>() != t.mask()) {
      throw DataError("stored mask disagrees with the layout");
    }
    return t;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed transform record: ") + e.what());
  }
}

json output_map_json(const OutputMap& out) {
  json j;
  if (out.is_label_mapping()) {
    const LabelMapping& m = out.mapping();
    j["kind"] = "label_mapping";
    j["source_classes"] = m.source_classes;
    json pairs = json::array();
    for (std::size_t t = 0; t < m.blocks.size(); ++t) pairs.push_back(json::array({t, m.blocks[t]}));
    j["pairs"] = pairs;
  } else {
    const LinearHead& h = out.head();
    j["kind"] = "linear_head";
    j["in_dim"] = h.in_dim;
    j["out_dim"] = h.out_dim;
    j["input"] = h.input == HeadInput::probabilities ? "probabilities" : "logits";
    j["weight"] = h.weight;
    j["bias"] = h.bias;
  }
  return j;
}

OutputMap output_map_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "label_mapping") {
      LabelMapping m;
      m.source_classes = j.at("source_classes").get<std::size_t>();
      const json& pairs = j.at("pairs");
      m.blocks.resize(pairs.size());
      for (const auto& p : pairs) {
        std::size_t t = p.at(0).get<std::size_t>();
        if (t >= m.blocks.size()) throw DataError("label mapping target index out of range");
        m.blocks[t] = p.at(1).get<std::vector<int>>();
      }
      m.validate();
      return OutputMap{m};
    }
    if (kind == "linear_head") {
      LinearHead h;
      h.in_dim = j.at("in_dim").get<std::size_t>();
      h.out_dim = j.at("out_dim").get<std::size_t>();
      h.input = j.at("input").get<std::string>() == "logits" ? HeadInput::logits : HeadInput::probabilities;
      h.weight = j.at("weight").get<std::vector<double>>();
      h.bias = j.at("bias").get<std::vector<double>>();
      h.validate();
      return OutputMap{h};
    }
    throw DataError("unknown output map kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed output map record: ") + e.what());
  }
}

json epoch_json(const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.loss;
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  j["queries"] = r.queries;
  j["oracle_calls"] = r.oracle_calls;
  optional_json(j, "alignment", r.alignment);
  return j;
}

std::string trace_jsonl(const TrainTrace& trace) {
  std::string out = epoch_json(trace.baseline).dump() + "\n";
  for (const auto& r : trace.epochs) out += epoch_json(r).dump() + "\n";
  return out;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed for " + path.string());
}

void write_report(const fs::path& dir, const RunConfig& cfg, const ReprogramResult& result,
                  const RunSummary& summary) {
  fs::create_directories(dir);
  write_text_file(dir / report_files::config, to_json(cfg).dump(2) + "\n");
  write_text_file(dir / report_files::transform, transform_json(result.transform).dump() + "\n");
  write_text_file(dir / report_files::output_map, output_map_json(result.output).dump(2) + "\n");
  write_text_file(dir / report_files::trace, trace_jsonl(result.trace));

  std::string timing;
  for (std::size_t i = 0; i < result.trace.seconds.size(); ++i) {
    timing += json{{"epoch", i + 1}, {"seconds", result.trace.seconds[i]}}.dump() + "\n";
  }
  write_text_file(dir / report_files::timing, timing);

  json s;
  s["source_digest_before"] = summary.source_digest_before;
  s["source_digest_after"] = summary.source_digest_after;
  s["source_unchanged"] = summary.source_digest_before == summary.source_digest_after;
  s["trainable_parameters"] = summary.trainable_parameters;
  s["baseline_test_accuracy"] = result.trace.baseline.test_accuracy;
  s["final_test_accuracy"] = summary.final_test_accuracy;
  s["queries"] = summary.queries;
  s["requests"] = summary.requests;
  s["steps"] = result.trace.steps;
  if (summary.endpoint_samples) s["endpoint_samples"] = *summary.endpoint_samples;
  if (summary.endpoint_requests) s["endpoint_requests"] = *summary.endpoint_requests;
  write_text_file(dir / report_files::summary, s.dump(2) + "\n");
}

json theorem1_json(const Theorem1Report& r) {
  json j;
  j["target_risk"] = r.target_risk;
  optional_json(j, "source_risk", r.source_risk);
  optional_json(j, "w1", r.w1);
  optional_json(j, "alignment_term", r.alignment_term());
  optional_json(j, "bound", r.bound);
  j["holds"] = r.holds ? json(*r.holds) : json(nullptr);
  j["classes"] = r.classes;
  j["samples"] = r.samples;
  return j;
}

void write_theorem1(const fs::path& dir, const Theorem1Report& r) {
  fs::create_directories(dir);
  write_text_file(dir / report_files::theorem1, theorem1_json(r).dump(2) + "\n");
}

LoadedReport load_report(const fs::path& dir) {
  RunConfig cfg = parse_run_config(read_json_file(dir / report_files::config), dir);
  auto read = [&](const char* name) {
    fs::path p = dir / name;
    std::ifstream f(p);
    if (!f) throw DataError("missing report file " + p.string());
    try {
      return json::parse(f);
    } catch (const json::exception& e) {
      throw DataError(p.string() + ": " + e.what());
    }
  };
  InputTransform t = transform_from_json(read(report_files::transform));
  OutputMap out = output_map_from_json(read(report_files::output_map));
  return {std::move(cfg), std::move(t), std::move(out)};
}

}  // namespace reprog
