#include "reprog/run_config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "reprog/checkpoint.hpp"
#include "reprog/errors.hpp"
#include "reprog/ingest.hpp"
#include "reprog/synthetic.hpp"

namespace reprog {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* type_name(const json& v) { return v.type_name(); }

// Walks one JSON object, remembering which keys were consumed so leftovers can
// be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(where() + ": expected an object, got " + type_name(j_));
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& required(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where() + ": missing required key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  const json* optional(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  std::string string_at(const std::string& key, const json& v) const {
    if (!v.is_string()) throw ConfigError(child(key) + ": expected a string, got " + type_name(v));
    return v.get<std::string>();
  }

  std::uint64_t uint_at(const std::string& key, const json& v) const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError(child(key) + ": expected a non-negative integer, got " + v.dump());
    }
    return v.get<std::uint64_t>();
  }

  double number_at(const std::string& key, const json& v) const {
    if (!v.is_number()) throw ConfigError(child(key) + ": expected a number, got " + type_name(v));
    return v.get<double>();
  }

  bool bool_at(const std::string& key, const json& v) const {
    if (!v.is_boolean()) throw ConfigError(child(key) + ": expected a boolean, got " + type_name(v));
    return v.get<bool>();
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const json* v = optional(key);
    return v ? string_at(key, *v) : fallback;
  }
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) {
    const json* v = optional(key);
    return v ? uint_at(key, *v) : fallback;
  }
  double get_number(const std::string& key, double fallback) {
    const json* v = optional(key);
    return v ? number_at(key, *v) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) {
    const json* v = optional(key);
    return v ? bool_at(key, *v) : fallback;
  }

  template <typename E, std::size_t N>
  E get_enum(const std::string& key, E fallback, const std::pair<const char*, E> (&names)[N]) {
    const json* v = optional(key);
    if (!v) return fallback;
    std::string s = string_at(key, *v);
    std::string allowed;
    for (const auto& [name, value] : names) {
      if (s == name) return value;
      allowed += allowed.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(child(key) + ": unknown value '" + s + "' (allowed: " + allowed + ")");
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(where() + ": unknown key '" + item.key() + "'");
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve_path(const std::string& p, const fs::path& base) {
  if (p.empty()) throw ConfigError("empty path");
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return fs::absolute(path).lexically_normal();
}

constexpr std::pair<const char*, DatasetSpec::Format> kFormats[] = {
    {"synthetic_source", DatasetSpec::Format::synthetic_source},
    {"synthetic_target", DatasetSpec::Format::synthetic_target},
    {"idx", DatasetSpec::Format::idx},
    {"ucr", DatasetSpec::Format::ucr},
};
constexpr std::pair<const char*, Mode> kModes[] = {
    {"white_box", Mode::white_box},
    {"black_box", Mode::black_box},
};
constexpr std::pair<const char*, PlacementLayout::Mode> kLayouts[] = {
    {"center", PlacementLayout::Mode::center},
    {"offset", PlacementLayout::Mode::offset},
    {"replicate", PlacementLayout::Mode::replicate},
};
constexpr std::pair<const char*, OutputMapConfig::Kind> kKinds[] = {
    {"label_mapping", OutputMapConfig::Kind::label_mapping},
    {"linear_head", OutputMapConfig::Kind::linear_head},
};
constexpr std::pair<const char*, OutputMapConfig::Strategy> kStrategies[] = {
    {"greedy", OutputMapConfig::Strategy::greedy},
    {"random", OutputMapConfig::Strategy::random},
};
constexpr std::pair<const char*, HeadInput> kHeadInputs[] = {
    {"probabilities", HeadInput::probabilities},
    {"logits", HeadInput::logits},
};
constexpr std::pair<const char*, LossKind> kLosses[] = {
    {"cross_entropy", LossKind::cross_entropy},
    {"mse", LossKind::mse},
};

template <typename E, std::size_t N>
const char* enum_name(E value, const std::pair<const char*, E> (&names)[N]) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "?";
}

DatasetSpec parse_dataset(const json& j, const std::string& path, const fs::path& base) {
  ObjectReader r(j, path);
  DatasetSpec spec;
  r.required("format");
  spec.format = r.get_enum("format", spec.format, kFormats);
  switch (spec.format) {
    case DatasetSpec::Format::synthetic_source:
    case DatasetSpec::Format::synthetic_target:
      spec.samples = r.uint_at("samples", r.required("samples"));
      if (spec.samples == 0) throw ConfigError(r.child("samples") + ": must be positive");
      spec.seed = r.get_uint("seed", 0);
      break;
    case DatasetSpec::Format::idx:
      spec.images = resolve_path(r.string_at("images", r.required("images")), base);
      spec.labels = resolve_path(r.string_at("labels", r.required("labels")), base);
      break;
    case DatasetSpec::Format::ucr:
      spec.path = resolve_path(r.string_at("path", r.required("path")), base);
      break;
  }
  r.finish();
  return spec;
}

json dataset_json(const DatasetSpec& s) {
  json j;
  j["format"] = enum_name(s.format, kFormats);
  switch (s.format) {
    case DatasetSpec::Format::synthetic_source:
    case DatasetSpec::Format::synthetic_target:
      j["samples"] = s.samples;
      j["seed"] = s.seed;
      break;
    case DatasetSpec::Format::idx:
      j["images"] = s.images.string();
      j["labels"] = s.labels.string();
      break;
    case DatasetSpec::Format::ucr:
      j["path"] = s.path.string();
      break;
  }
  return j;
}

int epochs_at(ObjectReader& r, const std::string& key, int fallback) {
  std::uint64_t v = r.get_uint(key, static_cast<std::uint64_t>(fallback));
  if (v > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw ConfigError(r.child(key) + ": too large");
  }
  return static_cast<int>(v);
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec) {
  switch (spec.format) {
    case DatasetSpec::Format::synthetic_source:
      return synthetic::source_dataset(spec.samples, spec.seed);
    case DatasetSpec::Format::synthetic_target:
      return synthetic::target_dataset(spec.samples, spec.seed);
    case DatasetSpec::Format::idx: {
      auto images = read_file_bytes(spec.images);
      auto labels = read_file_bytes(spec.labels);
      return idx_dataset(parse_idx(images), parse_idx(labels));
    }
    case DatasetSpec::Format::ucr: {
      auto bytes = read_file_bytes(spec.path);
      return parse_ucr_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
  }
  throw ConfigError("unknown dataset format");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

RunConfig parse_run_config(const json& j, const fs::path& base) {
  ObjectReader r(j, "");
  RunConfig cfg;
  ReprogramConfig& rc = cfg.reprogram;

  cfg.source_checkpoint = resolve_path(r.string_at("source_checkpoint", r.required("source_checkpoint")), base);
  cfg.target = parse_dataset(r.required("target"), "target", base);
  cfg.target_test = parse_dataset(r.required("target_test"), "target_test", base);
  if (const json* v = r.optional("source_heldout")) {
    cfg.source_heldout = parse_dataset(*v, "source_heldout", base);
  }
  if (const json* v = r.optional("report_dir")) {
    cfg.report_dir = resolve_path(r.string_at("report_dir", *v), base);
  }

  rc.mode = r.get_enum("mode", rc.mode, kModes);
  rc.seed = r.get_uint("seed", rc.seed);
  rc.epochs = epochs_at(r, "epochs", rc.epochs);
  rc.batch_size = r.get_uint("batch_size", rc.batch_size);
  rc.learning_rate = r.get_number("learning_rate", rc.learning_rate);
  rc.head_learning_rate = r.get_number("head_learning_rate", rc.head_learning_rate);
  rc.momentum = r.get_number("momentum", rc.momentum);
  rc.loss = r.get_enum("loss", rc.loss, kLosses);
  rc.enforce_range = r.get_bool("enforce_range", rc.enforce_range);

  if (const json* v = r.optional("zo")) {
    ObjectReader z(*v, "zo");
    rc.zo.q = z.get_uint("q", rc.zo.q);
    rc.zo.mu = z.get_number("mu", rc.zo.mu);
    z.finish();
  }
  if (const json* v = r.optional("layout")) {
    ObjectReader l(*v, "layout");
    rc.layout.mode = l.get_enum("mode", rc.layout.mode, kLayouts);
    rc.layout.offset = l.get_uint("offset", rc.layout.offset);
    rc.layout.replicates = l.get_uint("replicates", rc.layout.replicates);
    rc.layout.overlay = l.get_bool("overlay", rc.layout.overlay);
    l.finish();
  }
  if (const json* v = r.optional("output_map")) {
    ObjectReader o(*v, "output_map");
    rc.output.kind = o.get_enum("kind", rc.output.kind, kKinds);
    rc.output.strategy = o.get_enum("strategy", rc.output.strategy, kStrategies);
    rc.output.labels_per_target = o.get_uint("labels_per_target", rc.output.labels_per_target);
    rc.output.head_input = o.get_enum("head_input", rc.output.head_input, kHeadInputs);
    o.finish();
  }
  if (const json* v = r.optional("endpoint")) {
    ObjectReader e(*v, "endpoint");
    const json& cmd = e.required("command");
    if (!cmd.is_array() || cmd.empty()) {
      throw ConfigError("endpoint.command: expected a non-empty array of strings");
    }
    EndpointSpec spec;
    for (const auto& part : cmd) {
      if (!part.is_string()) throw ConfigError("endpoint.command: expected a non-empty array of strings");
      spec.command.push_back(part.get<std::string>());
    }
    e.finish();
    cfg.endpoint = spec;
  }
  if (const json* v = r.optional("diagnostics")) {
    ObjectReader d(*v, "diagnostics");
    cfg.diagnostics.n_rep = d.get_uint("n_rep", cfg.diagnostics.n_rep);
    cfg.diagnostics.track_alignment = d.get_bool("track_alignment", cfg.diagnostics.track_alignment);
    cfg.diagnostics.seed = d.get_uint("seed", cfg.diagnostics.seed);
    d.finish();
    if (cfg.diagnostics.n_rep == 0) throw ConfigError("diagnostics.n_rep: must be positive");
  }
  r.finish();

  rc.validate();
  if (cfg.endpoint && rc.mode != Mode::black_box) {
    throw ConfigError("endpoint: only meaningful with mode black_box");
  }
  if (cfg.diagnostics.track_alignment && !cfg.source_heldout) {
    throw ConfigError("diagnostics.track_alignment: requires source_heldout");
  }
  if (cfg.diagnostics.track_alignment && rc.mode == Mode::black_box) {
    throw ConfigError("diagnostics.track_alignment: needs source logits, unavailable in black_box mode");
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  const ReprogramConfig& rc = cfg.reprogram;
  json j;
  j["source_checkpoint"] = cfg.source_checkpoint.string();
  j["target"] = dataset_json(cfg.target);
  j["target_test"] = dataset_json(cfg.target_test);
  if (cfg.source_heldout) j["source_heldout"] = dataset_json(*cfg.source_heldout);
  if (!cfg.report_dir.empty()) j["report_dir"] = cfg.report_dir.string();
  j["mode"] = enum_name(rc.mode, kModes);
  j["seed"] = rc.seed;
  j["epochs"] = rc.epochs;
  j["batch_size"] = rc.batch_size;
  j["learning_rate"] = rc.learning_rate;
  j["head_learning_rate"] = rc.head_learning_rate;
  j["momentum"] = rc.momentum;
  j["loss"] = enum_name(rc.loss, kLosses);
  j["enforce_range"] = rc.enforce_range;
  j["zo"] = {{"q", rc.zo.q}, {"mu", rc.zo.mu}};
  j["layout"] = {{"mode", enum_name(rc.layout.mode, kLayouts)},
                 {"offset", rc.layout.offset},
                 {"replicates", rc.layout.replicates},
                 {"overlay", rc.layout.overlay}};
  j["output_map"] = {{"kind", enum_name(rc.output.kind, kKinds)},
                     {"strategy", enum_name(rc.output.strategy, kStrategies)},
                     {"labels_per_target", rc.output.labels_per_target},
                     {"head_input", enum_name(rc.output.head_input, kHeadInputs)}};
  if (cfg.endpoint) j["endpoint"] = {{"command", cfg.endpoint->command}};
  j["diagnostics"] = {{"n_rep", cfg.diagnostics.n_rep},
                      {"track_alignment", cfg.diagnostics.track_alignment},
                      {"seed", cfg.diagnostics.seed}};
  return j;
}

SourceRunConfig parse_source_config(const json& j, const fs::path& base) {
  ObjectReader r(j, "");
  SourceRunConfig cfg;
  cfg.dataset = parse_dataset(r.required("dataset"), "dataset", base);
  cfg.checkpoint = resolve_path(r.string_at("checkpoint", r.required("checkpoint")), base);
  if (const json* v = r.optional("hidden")) {
    if (!v->is_array()) throw ConfigError("hidden: expected an array of positive integers");
    cfg.hidden.clear();
    for (const auto& h : *v) {
      if (!h.is_number_unsigned() || h.get<std::uint64_t>() == 0) {
        throw ConfigError("hidden: expected an array of positive integers");
      }
      cfg.hidden.push_back(h.get<std::size_t>());
    }
  }
  SourceTrainConfig& t = cfg.training;
  t.seed = r.get_uint("seed", t.seed);
  t.epochs = epochs_at(r, "epochs", t.epochs);
  t.batch_size = r.get_uint("batch_size", t.batch_size);
  t.learning_rate = r.get_number("learning_rate", t.learning_rate);
  t.momentum = r.get_number("momentum", t.momentum);
  r.finish();
  t.validate();
  return cfg;
}

json to_json(const SourceRunConfig& cfg) {
  json j;
  j["dataset"] = dataset_json(cfg.dataset);
  j["checkpoint"] = cfg.checkpoint.string();
  j["hidden"] = cfg.hidden;
  j["seed"] = cfg.training.seed;
  j["epochs"] = cfg.training.epochs;
  j["batch_size"] = cfg.training.batch_size;
  j["learning_rate"] = cfg.training.learning_rate;
  j["momentum"] = cfg.training.momentum;
  return j;
}

std::vector<LayerSpec> mlp_architecture(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                        std::size_t classes) {
  std::vector<LayerSpec> arch;
  arch.push_back(LayerSpec::flatten(input_dim));
  std::size_t width = input_dim;
  for (std::size_t h : hidden) {
    arch.push_back(LayerSpec::dense(width, h));
    arch.push_back(LayerSpec::relu(h));
    width = h;
  }
  arch.push_back(LayerSpec::dense(width, classes));
  arch.push_back(LayerSpec::softmax(classes));
  return arch;
}

}  // namespace reprog
